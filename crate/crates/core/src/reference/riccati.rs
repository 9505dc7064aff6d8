//! Semi-analytic decoupling fields for the linear-quadratic benchmark.
//!
//! With a linear terminal condition the decoupling field is affine,
//! `u(t, x) = a(t)x + b(t)`, and `v = u_x σ(x, u, v)` is affine as well:
//! `v(t, x) = p(t)x + q(t)` with
//!
//! ```text
//! p = a (σx + σy a) / (1 - a σz),   q = a (σy b + σ0) / (1 - a σz).
//! ```
//!
//! Substituting into `u_t + μ u_x + f = 0` (the second-derivative term
//! vanishes) and matching powers of `x` gives
//!
//! ```text
//! a' = -(μx a + μy a² + μz a p + fy a + fz p + fx)
//! b' = -(a (μy b + μz q + μ0) + fy b + fz q)
//! ```
//!
//! with `a(T) = -G`, `b(T) = 0`, integrated backwards with classical RK4.

use crate::cosine::Jet;
use crate::error::{BcosError, Result};
use crate::problem::{AnalyticSolution, LqCoefficients, LqParams};

pub const DEFAULT_ODE_STEPS: usize = 100_000;

const BLOWUP_GUARD: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    lin: LqCoefficients,
    horizon: f64,
    step: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
}

fn z_coefficients(lin: &LqCoefficients, a: f64, b: f64) -> Option<(f64, f64)> {
    let denom = 1.0 - a * lin.sz;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((a * (lin.sx + lin.sy * a) / denom, a * (lin.sy * b + lin.s0) / denom))
}

fn rhs(lin: &LqCoefficients, a: f64, b: f64) -> Option<(f64, f64)> {
    let (p, q) = z_coefficients(lin, a, b)?;
    let da = -(lin.mx * a + lin.my * a * a + lin.mz * a * p + lin.fy * a + lin.fz * p + lin.fx);
    let db = -(a * (lin.my * b + lin.mz * q + lin.m0) + lin.fy * b + lin.fz * q);
    Some((da, db))
}

/// Integrate the Riccati system on a uniform grid of `ode_steps` intervals.
pub fn reference_riccati(params: &LqParams, ode_steps: usize) -> Result<RiccatiSolution> {
    params.validate()?;
    if ode_steps == 0 {
        return Err(BcosError::InvalidSize("ode_steps must be positive".into()));
    }
    let lin = params.coefficients();
    let horizon = params.horizon;
    let h = horizon / ode_steps as f64;
    let n = ode_steps + 1;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut da = vec![0.0; n];
    let mut db = vec![0.0; n];
    a[ode_steps] = -params.g;
    b[ode_steps] = 0.0;
    let blowup = |i: usize| BcosError::RiccatiBlowup { t: i as f64 * h };
    for i in (0..ode_steps).rev() {
        let (a0, b0) = (a[i + 1], b[i + 1]);
        // backward in time: step -h
        let k1 = rhs(&lin, a0, b0).ok_or_else(|| blowup(i + 1))?;
        let k2 = rhs(&lin, a0 - 0.5 * h * k1.0, b0 - 0.5 * h * k1.1).ok_or_else(|| blowup(i))?;
        let k3 = rhs(&lin, a0 - 0.5 * h * k2.0, b0 - 0.5 * h * k2.1).ok_or_else(|| blowup(i))?;
        let k4 = rhs(&lin, a0 - h * k3.0, b0 - h * k3.1).ok_or_else(|| blowup(i))?;
        a[i] = a0 - h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        b[i] = b0 - h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(a[i].abs() < BLOWUP_GUARD && b[i].abs() < BLOWUP_GUARD) {
            return Err(blowup(i));
        }
    }
    for i in 0..n {
        let (x, y) = rhs(&lin, a[i], b[i]).ok_or_else(|| blowup(i))?;
        da[i] = x;
        db[i] = y;
    }
    Ok(RiccatiSolution { lin, horizon, step: h, a, b, da, db })
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl RiccatiSolution {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `(a(t), b(t))` by cubic Hermite interpolation of the RK4 nodes.
    pub fn ab(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.horizon);
        let last = self.a.len() - 1;
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(last - 1);
        let s = pos - i as f64;
        (
            hermite(self.a[i], self.a[i + 1], self.da[i], self.da[i + 1], self.step, s),
            hermite(self.b[i], self.b[i + 1], self.db[i], self.db[i + 1], self.step, s),
        )
    }

    /// Slope and intercept of `v(t, ·)`.
    pub fn pq(&self, t: f64) -> (f64, f64) {
        let (a, b) = self.ab(t);
        z_coefficients(&self.lin, a, b).expect("denominator checked during integration")
    }
}

impl AnalyticSolution for RiccatiSolution {
    fn u(&self, t: f64, x: f64) -> Jet {
        let (a, b) = self.ab(t);
        Jet { value: a * x + b, d1: a, d2: 0.0 }
    }

    fn v(&self, t: f64, x: f64) -> Jet {
        let (p, q) = self.pq(t);
        Jet { value: p * x + q, d1: p, d2: 0.0 }
    }
}
