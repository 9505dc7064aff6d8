//! Backward theta-scheme recursion with explicit decoupling.
//!
//! At step `n` the forward transition is frozen with the decoupling pair of
//! level `n + 1`; `z` is computed first and enters the implicit `y` equation,
//! which is resolved by Picard iteration.

use std::sync::Arc;

use crate::cosine::{dct2, CosineSeries, Jet, SpatialGrid};
use crate::error::{BcosError, Result};
use crate::problem::{DerivativeTier, FbsdeProblem, FieldJets, State};
use crate::transition::{build_table, SchemeKind, TransitionTable};

/// Weights of the generalised theta-scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaParams {
    theta1: f64,
    theta2: f64,
    theta3: f64,
    theta4: f64,
}

impl ThetaParams {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64) -> Result<Self> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(theta1) || !unit(theta2) {
            return Err(BcosError::InvalidTheta(format!("theta1, theta2 must lie in [0, 1], got {theta1}, {theta2}")));
        }
        if !(theta3 > 0.0 && theta3 <= 1.0) {
            return Err(BcosError::InvalidTheta(format!("theta3 must lie in (0, 1], got {theta3}")));
        }
        if !(theta4.abs() <= theta3) {
            return Err(BcosError::InvalidTheta(format!("|theta4| must not exceed theta3, got {theta4}")));
        }
        Ok(Self { theta1, theta2, theta3, theta4 })
    }

    pub fn from_array(t: [f64; 4]) -> Result<Self> {
        Self::new(t[0], t[1], t[2], t[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.theta3, self.theta4]
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn theta3(&self) -> f64 {
        self.theta3
    }

    pub fn theta4(&self) -> f64 {
        self.theta4
    }
}

/// Cosine expansions of `y(t, ·)` and `z(t, ·)` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingField {
    pub t: f64,
    pub y: CosineSeries,
    pub z: CosineSeries,
}

impl DecouplingField {
    pub fn new(t: f64, y: CosineSeries, z: CosineSeries) -> Result<Self> {
        if y.grid() != z.grid() {
            return Err(BcosError::ShapeMismatch("y and z series live on different grids".into()));
        }
        Ok(Self { t, y, z })
    }

    /// Encode nodal values.
    pub fn from_nodes(t: f64, grid: &Arc<SpatialGrid>, y: &[f64], z: &[f64]) -> Result<Self> {
        Ok(Self { t, y: dct2(y, grid)?, z: dct2(z, grid)? })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        self.y.grid()
    }

    /// Field jets at `x` (clamped).
    pub fn jet(&self, x: f64) -> FieldJets {
        FieldJets { y: self.y.jet(x), z: self.z.jet(x) }
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.y.eval(x), self.z.eval(x))
    }

    /// Jets at every node; derivatives are only computed when `tier` needs them.
    pub fn node_jets(&self, tier: DerivativeTier) -> Vec<FieldJets> {
        if tier == DerivativeTier::None {
            return self
                .y
                .eval_nodes()
                .into_iter()
                .zip(self.z.eval_nodes())
                .map(|(y, z)| FieldJets { y: Jet::constant(y), z: Jet::constant(z) })
                .collect();
        }
        self.y.jet_nodes().into_iter().zip(self.z.jet_nodes()).map(|(y, z)| FieldJets { y, z }).collect()
    }
}

/// Picard iteration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_picard: usize,
    /// Stopping tolerance on the update, relative to `max(1, |y|)`.
    pub eps: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_picard: 100, eps: 1e-15 }
    }
}

/// Cosine coefficients of `y`, `z` and the driver at level `n + 1`.
#[derive(Debug, Clone, Copy)]
pub struct NextLevel<'a> {
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub f: &'a [f64],
}

/// Conditional expectations needed at one node, all in one pass over `k`:
/// `E[z⁺]`, `E[a⁺ΔW]`, `E[b⁺]`, `E[f⁺]` with `a = (θ3-θ4)y + (1-θ2)dt f`
/// and `b = y + (1-θ1)dt f`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct NodeExpectations {
    z: f64,
    a_dw: f64,
    b: f64,
    f: f64,
}

fn node_expectations(table: &TransitionTable, next: &NextLevel<'_>, theta: &ThetaParams, i: usize) -> NodeExpectations {
    let dt = table.dt();
    let ca = theta.theta3 - theta.theta4;
    let cf_a = (1.0 - theta.theta2) * dt;
    let cf_b = (1.0 - theta.theta1) * dt;
    let omega = table.grid().frequency(1);
    let s = table.s_bar()[i];
    let kappa = table.kappa_bar()[i];
    let row = table.phi_node(i);
    let mut out = NodeExpectations::default();
    for (k, p) in row.iter().enumerate() {
        let (yk, zk, fk) = (next.y[k], next.z[k], next.f[k]);
        let u = k as f64 * omega;
        let c = 2.0 * u * kappa * dt;
        let scale = u * s * dt / (1.0 + c * c);
        // Re{w1 Φ} with w1 = scale·(-c + i)
        let re_w1_phi = -scale * (c * p.re + p.im);
        let half = if k == 0 { 0.5 } else { 1.0 };
        out.z += half * zk * p.re;
        out.a_dw += half * (ca * yk + cf_a * fk) * re_w1_phi;
        out.b += half * (yk + cf_b * fk) * p.re;
        out.f += half * fk * p.re;
    }
    out
}

fn z_from(e: &NodeExpectations, theta: &ThetaParams, dt: f64) -> f64 {
    (theta.theta4 * dt * e.z + e.a_dw) / (theta.theta3 * dt)
}

/// `z(t_n, x_i)` from the level-`n+1` coefficients.
pub fn step_z(table: &TransitionTable, next: &NextLevel<'_>, theta: &ThetaParams, i: usize) -> f64 {
    z_from(&node_expectations(table, next, theta, i), theta, table.dt())
}

/// Result of the implicit `y` update at all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct YUpdate {
    pub y: Vec<f64>,
    /// Largest iteration count over nodes.
    pub picard_count: usize,
    pub converged: bool,
}

fn picard(
    problem: &dyn FbsdeProblem,
    t_n: f64,
    x: f64,
    z: f64,
    g: f64,
    y0: f64,
    theta1_dt: f64,
    opts: &SolverOptions,
) -> (f64, usize, bool) {
    if theta1_dt == 0.0 {
        return (g, 0, true);
    }
    let mut y = y0;
    for p in 1..=opts.max_picard {
        let next = theta1_dt * problem.driver(&State::new(t_n, x, y, z)) + g;
        let delta = (next - y).abs();
        y = next;
        if delta <= opts.eps * y.abs().max(1.0) {
            return (y, p, true);
        }
        if !y.is_finite() {
            return (y, p, false);
        }
    }
    (y, opts.max_picard, false)
}

/// Solve `y = θ1·dt·f(t_n, x_i, y, z_now[i]) + G_i` at every node.
pub fn step_y(
    table: &TransitionTable,
    next: &NextLevel<'_>,
    z_now: &[f64],
    theta: &ThetaParams,
    problem: &dyn FbsdeProblem,
    t_n: f64,
    opts: &SolverOptions,
) -> Result<YUpdate> {
    let k = table.grid().len();
    if z_now.len() != k {
        return Err(BcosError::LengthMismatch { expected: k, got: z_now.len() });
    }
    let theta1_dt = theta.theta1 * table.dt();
    let mut out = YUpdate { y: Vec::with_capacity(k), picard_count: 0, converged: true };
    for (i, &x) in table.grid().nodes().iter().enumerate() {
        let e = node_expectations(table, next, theta, i);
        let (y, count, ok) = picard(problem, t_n, x, z_now[i], e.b, e.b + theta1_dt * e.f, theta1_dt, opts);
        out.y.push(y);
        out.picard_count = out.picard_count.max(count);
        out.converged &= ok;
    }
    Ok(out)
}

/// Numerical decoupling fields on a uniform time partition.
#[derive(Debug, Clone)]
pub struct BcosSolution {
    pub problem: String,
    pub scheme: SchemeKind,
    pub theta: ThetaParams,
    pub grid: Arc<SpatialGrid>,
    pub times: Vec<f64>,
    pub fields: Vec<DecouplingField>,
    pub driver_series: Vec<CosineSeries>,
    /// Picard iterations used at steps `0..N`.
    pub picard_counts: Vec<usize>,
    /// Steps whose Picard iteration hit the limit without converging.
    pub picard_failures: Vec<usize>,
}

impl BcosSolution {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("time partition is never empty")
    }

    /// `(y, z)` at level `n` and point `x` (clamped to the grid).
    pub fn eval(&self, n: usize, x: f64) -> Result<(f64, f64)> {
        self.fields
            .get(n)
            .map(|f| f.eval(x))
            .ok_or(BcosError::IndexOutOfRange { index: n, max: self.n_steps() })
    }

    pub fn picard_max(&self) -> usize {
        self.picard_counts.iter().copied().max().unwrap_or(0)
    }
}

/// Same as [`BcosSolution::eval`].
pub fn eval_solution(solution: &BcosSolution, n: usize, x: f64) -> Result<(f64, f64)> {
    solution.eval(n, x)
}

const TERMINAL_MAX_ITER: usize = 100;

/// Terminal field `y = g`, `z = g'·σ(T, x, g, z)` and the terminal driver series.
pub fn terminal_fields(problem: &dyn FbsdeProblem, grid: &Arc<SpatialGrid>) -> Result<(DecouplingField, CosineSeries)> {
    let t = problem.horizon();
    let mut ys = Vec::with_capacity(grid.len());
    let mut zs = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        let y = problem.terminal(x);
        let dg = problem.terminal_deriv(x);
        let mut z = dg * problem.sigma(&State::new(t, x, y, 0.0));
        if problem.sigma_depends_on_z() {
            let mut converged = false;
            for _ in 0..TERMINAL_MAX_ITER {
                let next = dg * problem.sigma(&State::new(t, x, y, z));
                let delta = (next - z).abs();
                z = next;
                if !z.is_finite() {
                    break;
                }
                if delta <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(BcosError::TerminalFixedPointDivergence { x });
            }
        }
        ys.push(y);
        zs.push(z);
    }
    let fs: Vec<f64> = grid.nodes().iter().zip(ys.iter().zip(&zs)).map(|(&x, (&y, &z))| problem.driver(&State::new(t, x, y, z))).collect();
    Ok((DecouplingField::from_nodes(t, grid, &ys, &zs)?, dct2(&fs, grid)?))
}

/// Run the backward recursion with `n_steps` uniform steps.
pub fn solve(
    problem: &dyn FbsdeProblem,
    grid: &Arc<SpatialGrid>,
    n_steps: usize,
    theta: ThetaParams,
    scheme: SchemeKind,
    opts: &SolverOptions,
) -> Result<BcosSolution> {
    if n_steps == 0 {
        return Err(BcosError::InvalidSize("at least one time step is required".into()));
    }
    if problem.tier() < scheme.required_tier() {
        return Err(BcosError::TierUnavailable { problem: problem.name(), required: scheme.required_tier().describe() });
    }
    let horizon = problem.horizon();
    let dt = horizon / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|n| horizon * n as f64 / n_steps as f64).collect();
    let (terminal, terminal_f) = terminal_fields(problem, grid)?;

    let mut fields = vec![terminal];
    let mut drivers = vec![terminal_f];
    let mut picard_counts = vec![0; n_steps];
    let mut picard_failures = Vec::new();
    let theta1_dt = theta.theta1 * dt;
    let k = grid.len();
    let mut zs = vec![0.0; k];
    let mut ys = vec![0.0; k];
    let mut fs = vec![0.0; k];

    for n in (0..n_steps).rev() {
        let t_n = times[n];
        let (field, driver) = (fields.last().unwrap(), drivers.last().unwrap());
        let table = build_table(scheme, problem, field, t_n, dt)?;
        let next = NextLevel { y: field.y.coeffs(), z: field.z.coeffs(), f: driver.coeffs() };
        let mut count = 0;
        let mut converged = true;
        for (i, &x) in grid.nodes().iter().enumerate() {
            let e = node_expectations(&table, &next, &theta, i);
            let z = z_from(&e, &theta, dt);
            let (y, c, ok) = picard(problem, t_n, x, z, e.b, e.b + theta1_dt * e.f, theta1_dt, opts);
            zs[i] = z;
            ys[i] = y;
            fs[i] = problem.driver(&State::new(t_n, x, y, z));
            count = count.max(c);
            converged &= ok;
        }
        picard_counts[n] = count;
        if !converged {
            picard_failures.push(n);
        }
        fields.push(DecouplingField::from_nodes(t_n, grid, &ys, &zs)?);
        drivers.push(dct2(&fs, grid)?);
    }
    fields.reverse();
    drivers.reverse();
    picard_failures.reverse();
    Ok(BcosSolution {
        problem: problem.name(),
        scheme,
        theta,
        grid: Arc::clone(grid),
        times,
        fields,
        driver_series: drivers,
        picard_counts,
        picard_failures,
    })
}
