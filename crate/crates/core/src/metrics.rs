//! Strong and weak error functionals and empirical convergence slopes.

use crate::error::{BcosError, Result};
use crate::reference::paths::PathSet;
use crate::solver::BcosSolution;
use crate::transition::SchemeKind;

/// Strong errors of one run, in the order X, Y, Z.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrongErrors {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl StrongErrors {
    pub fn total(&self) -> f64 {
        self.x + self.y + self.z
    }
}

/// Weak errors at `t_0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeakErrors {
    pub y0: f64,
    pub z0: f64,
}

impl WeakErrors {
    pub fn total(&self) -> f64 {
        self.y0 + self.z0
    }
}

/// Strong errors between two path sets on the same time grid.
///
/// X and Y use the worst RMS over time points; Z uses the time-integrated
/// mean square over `t_0..t_{N-1}`.
pub fn strong_errors(approx: &PathSet, reference: &PathSet) -> Result<StrongErrors> {
    if approx.paths() != reference.paths() {
        return Err(BcosError::ShapeMismatch(format!("{} vs {} paths", approx.paths(), reference.paths())));
    }
    if approx.times.len() != reference.times.len()
        || approx.times.iter().zip(&reference.times).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
    {
        return Err(BcosError::ShapeMismatch("time grids differ".into()));
    }
    let n = approx.n_steps();
    let m = approx.paths();
    if n == 0 {
        return Err(BcosError::ShapeMismatch("path sets need at least one step".into()));
    }
    let horizon = approx.times[n] - approx.times[0];
    let mut sx = vec![0.0; n + 1];
    let mut sy = vec![0.0; n + 1];
    let mut sz = 0.0;
    for p in 0..m {
        let (ax, ay, az) = (approx.x(p), approx.y(p), approx.z(p));
        let (rx, ry, rz) = (reference.x(p), reference.y(p), reference.z(p));
        for i in 0..=n {
            sx[i] += (ax[i] - rx[i]).powi(2);
            sy[i] += (ay[i] - ry[i]).powi(2);
        }
        sz += (0..n).map(|i| (az[i] - rz[i]).powi(2)).sum::<f64>();
    }
    let worst = |s: &[f64]| s.iter().fold(0.0f64, |acc, v| acc.max((v / m as f64).sqrt()));
    Ok(StrongErrors { x: worst(&sx), y: worst(&sy), z: (horizon / (n * m) as f64 * sz).sqrt() })
}

/// Distance of the numerical `(y, z)` at `(t_0, x0)` from reference values.
pub fn weak_errors_t0(solution: &BcosSolution, x0: f64, u0: f64, v0: f64) -> Result<WeakErrors> {
    let (y, z) = solution.eval(0, x0)?;
    Ok(WeakErrors { y0: (y - u0).abs(), z0: (z - v0).abs() })
}

/// Least-squares slope of `log(error)` against `log(T/N)`.
///
/// `None` when fewer than two points are given, an error is not positive and
/// finite, or all step counts coincide.
pub fn fit_slope(points: &[(usize, f64)], horizon: f64) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(n, e)| n == 0 || !(e > 0.0) || !e.is_finite()) {
        return None;
    }
    let data: Vec<(f64, f64)> = points.iter().map(|&(n, e)| ((horizon / n as f64).ln(), e.ln())).collect();
    let len = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / len;
    let my = data.iter().map(|d| d.1).sum::<f64>() / len;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return None;
    }
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    Some(sxy / sxx)
}

/// One measured cell of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub problem: String,
    pub scheme: SchemeKind,
    pub theta: [f64; 4],
    pub k: usize,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub strong: StrongErrors,
    pub weak: WeakErrors,
    pub picard_max: usize,
    pub clamp_count: u64,
}
