//! Reference and approximate path simulation under common Brownian increments.

use std::io::{self, Write};

use crate::error::{BcosError, Result};
use crate::problem::{FbsdeProblem, FieldJets};
use crate::reference::brownian::BrownianBundle;
use crate::solver::BcosSolution;
use crate::transition::{coefficients, SchemeKind};

/// Sampled `(X, Y, Z)` on a uniform coarse grid, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub times: Vec<f64>,
    paths: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    /// Field evaluations outside the truncation range.
    pub clamp_count: u64,
}

impl PathSet {
    fn with_shape(times: Vec<f64>, paths: usize) -> Self {
        let len = times.len() * paths;
        Self { times, paths, x: vec![0.0; len], y: vec![0.0; len], z: vec![0.0; len], clamp_count: 0 }
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn x(&self, m: usize) -> &[f64] {
        let w = self.times.len();
        &self.x[m * w..(m + 1) * w]
    }

    pub fn y(&self, m: usize) -> &[f64] {
        let w = self.times.len();
        &self.y[m * w..(m + 1) * w]
    }

    /// `Z` along path `m`; the entry at `t_N` is not used by the error metrics.
    pub fn z(&self, m: usize) -> &[f64] {
        let w = self.times.len();
        &self.z[m * w..(m + 1) * w]
    }

    fn row_mut(&mut self, m: usize) -> (&mut [f64], &mut [f64], &mut [f64]) {
        let w = self.times.len();
        let r = m * w..(m + 1) * w;
        (&mut self.x[r.clone()], &mut self.y[r.clone()], &mut self.z[r])
    }

    /// A copy with every path value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|a| a * factor).collect();
        Self { times: self.times.clone(), paths: self.paths, x: s(&self.x), y: s(&self.y), z: s(&self.z), clamp_count: self.clamp_count }
    }

    #[cfg(test)]
    pub(crate) fn shift_x(&mut self, dx: f64) {
        self.x.iter_mut().for_each(|v| *v += dx);
    }

    /// CSV dump with columns `path,n,t,X,Y,Z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path,n,t,X,Y,Z")?;
        for m in 0..self.paths {
            let (x, y, z) = (self.x(m), self.y(m), self.z(m));
            for (n, &t) in self.times.iter().enumerate() {
                writeln!(w, "{m},{n},{t:.16e},{:.16e},{:.16e},{:.16e}", x[n], y[n], z[n])?;
            }
        }
        Ok(())
    }
}

fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Fine-grid weak Taylor simulation under the analytic decoupling fields,
/// sampled at each of the requested coarse grids.
///
/// Every coarse size must divide the bundle's fine step count.
pub fn reference_paths_multi(problem: &dyn FbsdeProblem, bundle: &BrownianBundle, coarse: &[usize]) -> Result<Vec<PathSet>> {
    let exact = problem.analytic().ok_or_else(|| BcosError::MissingAnalyticFields(problem.name()))?;
    let ratios = coarse.iter().map(|&n| bundle.ratio(n)).collect::<Result<Vec<_>>>()?;
    let horizon = problem.horizon();
    let n_fine = bundle.n_fine();
    let h = horizon / n_fine as f64;
    let mut sets: Vec<PathSet> = coarse.iter().map(|&n| PathSet::with_shape(uniform_times(horizon, n), bundle.paths())).collect();
    for m in 0..bundle.paths() {
        let dw = bundle.fine_increments(m)?;
        let mut x = problem.x0();
        let record = |sets: &mut [PathSet], step: usize, x: f64| {
            let t = horizon * step as f64 / n_fine as f64;
            for (set, &r) in sets.iter_mut().zip(&ratios) {
                if step % r == 0 {
                    let n = step / r;
                    let (xs, ys, zs) = set.row_mut(m);
                    xs[n] = x;
                    ys[n] = exact.u(t, x).value;
                    zs[n] = exact.v(t, x).value;
                }
            }
        };
        for (step, &w) in dw.iter().enumerate() {
            record(&mut sets, step, x);
            let t = horizon * step as f64 / n_fine as f64;
            let jets = FieldJets { y: exact.u(t, x), z: exact.v(t, x) };
            let c = coefficients(SchemeKind::WeakTaylor2, problem, &jets, t, h, x)?;
            x += c.m_bar * h + c.s_bar * w + c.kappa_bar * w * w;
        }
        record(&mut sets, n_fine, x);
        for set in sets.iter_mut() {
            let n = set.n_steps();
            let (xs, ys, _) = set.row_mut(m);
            ys[n] = problem.terminal(xs[n]);
        }
    }
    Ok(sets)
}

/// Single-grid form of [`reference_paths_multi`].
pub fn reference_paths(problem: &dyn FbsdeProblem, bundle: &BrownianBundle, coarse: usize) -> Result<PathSet> {
    Ok(reference_paths_multi(problem, bundle, &[coarse])?.remove(0))
}

/// Simulate the decoupled scheme under the numerical fields of `solution`.
///
/// The step from `t_n` uses the fields of level `n + 1`, as the solver does.
pub fn approx_paths(problem: &dyn FbsdeProblem, solution: &BcosSolution, scheme: SchemeKind, bundle: &BrownianBundle) -> Result<PathSet> {
    let n = solution.n_steps();
    let ratio = bundle.ratio(n).map_err(|_| BcosError::StepCountMismatch { solution: n, requested: bundle.n_fine() })?;
    if (solution.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(BcosError::ShapeMismatch("solution horizon differs from the problem horizon".into()));
    }
    let grid = &solution.grid;
    let dt = solution.horizon() / n as f64;
    let derivs = scheme.required_tier() != crate::problem::DerivativeTier::None;
    let mut set = PathSet::with_shape(solution.times.clone(), bundle.paths());
    let mut clamps = 0u64;
    for m in 0..bundle.paths() {
        let dw = crate::reference::brownian::aggregate(&bundle.fine_increments(m)?, ratio);
        let (xs, ys, zs) = set.row_mut(m);
        let mut x = problem.x0();
        for step in 0..n {
            if !grid.contains(x) {
                clamps += 1;
            }
            let (y, z) = solution.fields[step].eval(x);
            xs[step] = x;
            ys[step] = y;
            zs[step] = z;
            let next = &solution.fields[step + 1];
            let jets = if derivs { next.jet(x) } else { value_jets(next.eval(x)) };
            let c = coefficients(scheme, problem, &jets, solution.times[step], dt, x)?;
            let w = dw[step];
            x += c.m_bar * dt + c.s_bar * w + c.kappa_bar * w * w;
        }
        if !grid.contains(x) {
            clamps += 1;
        }
        xs[n] = x;
        ys[n] = problem.terminal(x);
        zs[n] = solution.fields[n].z.eval(x);
    }
    set.clamp_count = clamps;
    Ok(set)
}

fn value_jets((y, z): (f64, f64)) -> FieldJets {
    use crate::cosine::Jet;
    FieldJets { y: Jet::constant(y), z: Jet::constant(z) }
}
