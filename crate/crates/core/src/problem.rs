//! Scalar FBSDE problem contract and the three benchmark problems.
//!
//! A problem supplies the forward drift `μ`, diffusion `σ`, driver `f`,
//! terminal condition `g` and as many partial derivatives of `μ` and `σ` as
//! its [`DerivativeTier`] promises. Composition with a decoupling pair
//! `(φ, ζ)` gives the decoupled coefficients `f̄(t, x) = f(t, x, φ(x), ζ(x))`
//! and their total `x`-derivatives.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use crate::cosine::Jet;
use crate::error::{BcosError, Result};
use crate::reference::riccati::{RiccatiSolution, DEFAULT_ODE_STEPS};

/// A point `(t, x, y, z)` at which coefficient functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }
}

/// Partial derivatives of a coefficient function of `(t, x, y, z)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partials {
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dxz: f64,
    pub dyy: f64,
    pub dyz: f64,
    pub dzz: f64,
}

/// Which partial derivatives of `μ` and `σ` a problem provides.
///
/// `First` covers `∂x σ, ∂y σ, ∂z σ` (Milstein); `Second` adds the time
/// derivatives and the full second-order set of both `μ` and `σ`
/// (simplified order 2.0 weak Taylor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DerivativeTier {
    None,
    First,
    Second,
}

impl DerivativeTier {
    pub fn describe(self) -> &'static str {
        match self {
            DerivativeTier::None => "no partial derivatives",
            DerivativeTier::First => "first-order partials of sigma",
            DerivativeTier::Second => "second-order partials of mu and sigma",
        }
    }
}

/// Closed-form decoupling fields `u(t, x)` and `v(t, x)` with their first two
/// `x`-derivatives.
pub trait AnalyticSolution: Send + Sync {
    fn u(&self, t: f64, x: f64) -> Jet;
    fn v(&self, t: f64, x: f64) -> Jet;
}

/// Coefficients of a scalar fully coupled FBSDE.
///
/// Partial-derivative methods are only consulted up to the declared
/// [`tier`](FbsdeProblem::tier); the defaults return zeros.
pub trait FbsdeProblem: Send + Sync {
    fn name(&self) -> String;
    fn horizon(&self) -> f64;
    fn x0(&self) -> f64;
    fn tier(&self) -> DerivativeTier;
    fn sigma_depends_on_z(&self) -> bool;

    fn mu(&self, s: &State) -> f64;
    fn sigma(&self, s: &State) -> f64;
    fn driver(&self, s: &State) -> f64;
    fn terminal(&self, x: f64) -> f64;
    fn terminal_deriv(&self, x: f64) -> f64;

    fn mu_partials(&self, _s: &State) -> Partials {
        Partials::default()
    }

    fn sigma_partials(&self, _s: &State) -> Partials {
        Partials::default()
    }

    fn analytic(&self) -> Option<&dyn AnalyticSolution> {
        None
    }
}

/// Values and derivatives of a decoupling pair `(φ, ζ)` at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldJets {
    pub y: Jet,
    pub z: Jet,
}

/// Second-order part of [`ComposedCoefficients`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SecondOrderTerms {
    pub dt_mu: f64,
    pub dx_mu: f64,
    pub dxx_mu: f64,
    pub dt_sigma: f64,
    pub dxx_sigma: f64,
}

/// Decoupled coefficients `μ̄, σ̄` and their total derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedCoefficients {
    pub mu_bar: f64,
    pub sigma_bar: f64,
    /// `∂x σ̄`, present from tier `First`.
    pub dx_sigma_bar: Option<f64>,
    /// Present at tier `Second`.
    pub second: Option<SecondOrderTerms>,
}

fn total_first(p: &Partials, f: &FieldJets) -> f64 {
    p.dx + p.dy * f.y.d1 + p.dz * f.z.d1
}

fn total_second(p: &Partials, f: &FieldJets) -> f64 {
    let (y1, z1) = (f.y.d1, f.z.d1);
    p.dxx
        + 2.0 * p.dxy * y1
        + 2.0 * p.dxz * z1
        + p.dyy * y1 * y1
        + 2.0 * p.dyz * y1 * z1
        + p.dzz * z1 * z1
        + p.dy * f.y.d2
        + p.dz * f.z.d2
}

/// Compose `μ` and `σ` with a decoupling pair and return the total
/// `x`-derivatives required by `tier`.
pub fn compose(
    problem: &dyn FbsdeProblem,
    t: f64,
    x: f64,
    field: &FieldJets,
    tier: DerivativeTier,
) -> Result<ComposedCoefficients> {
    if problem.tier() < tier {
        return Err(BcosError::TierUnavailable { problem: problem.name(), required: tier.describe() });
    }
    let s = State::new(t, x, field.y.value, field.z.value);
    let mu_bar = problem.mu(&s);
    let sigma_bar = problem.sigma(&s);
    let mut out = ComposedCoefficients { mu_bar, sigma_bar, dx_sigma_bar: None, second: None };
    if tier == DerivativeTier::None {
        return Ok(out);
    }
    let sp = problem.sigma_partials(&s);
    out.dx_sigma_bar = Some(total_first(&sp, field));
    if tier == DerivativeTier::Second {
        let mp = problem.mu_partials(&s);
        out.second = Some(SecondOrderTerms {
            dt_mu: mp.dt,
            dx_mu: total_first(&mp, field),
            dxx_mu: total_second(&mp, field),
            dt_sigma: sp.dt,
            dxx_sigma: total_second(&sp, field),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Example 1: decoupled problem with a Gaussian-bump solution.

/// Decoupled benchmark on `[0, 10]` with solution `u = exp(-x²/(t+1))`.
#[derive(Debug, Clone)]
pub struct Example1 {
    horizon: f64,
    x0: f64,
}

struct Example1Solution;

fn ex1_s(x: f64) -> (f64, f64, f64) {
    let q = 2.0 + x * x;
    let s = (1.0 + x * x) / q;
    let ds = 2.0 * x / (q * q);
    let dds = (4.0 - 6.0 * x * x) / (q * q * q);
    (s, ds, dds)
}

impl AnalyticSolution for Example1Solution {
    fn u(&self, t: f64, x: f64) -> Jet {
        let tp = t + 1.0;
        let u = (-x * x / tp).exp();
        Jet { value: u, d1: -2.0 * x / tp * u, d2: (4.0 * x * x / (tp * tp) - 2.0 / tp) * u }
    }

    fn v(&self, t: f64, x: f64) -> Jet {
        let tp = t + 1.0;
        let u = self.u(t, x);
        let (s, ds, dds) = ex1_s(x);
        let w = -2.0 * x * s / tp;
        let dw = -2.0 * (s + x * ds) / tp;
        let ddw = -2.0 * (2.0 * ds + x * dds) / tp;
        Jet {
            value: w * u.value,
            d1: dw * u.value + w * u.d1,
            d2: ddw * u.value + 2.0 * dw * u.d1 + w * u.d2,
        }
    }
}

pub fn example1() -> Example1 {
    Example1 { horizon: 10.0, x0: 1.0 }
}

impl FbsdeProblem for Example1 {
    fn name(&self) -> String {
        "example1".into()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn tier(&self) -> DerivativeTier {
        DerivativeTier::Second
    }
    fn sigma_depends_on_z(&self) -> bool {
        false
    }

    fn mu(&self, s: &State) -> f64 {
        let x = s.x;
        let q = 2.0 + x * x;
        x * (1.0 + x * x) / (q * q * q)
    }

    fn sigma(&self, s: &State) -> f64 {
        ex1_s(s.x).0
    }

    fn driver(&self, s: &State) -> f64 {
        let State { t, x, y, z } = *s;
        let tp = t + 1.0;
        let x2 = x * x;
        let q = 2.0 + x2;
        let ratio = (1.0 + x2) / q;
        let bump = (-x2 / tp).exp();
        let bracket = 4.0 * x2 * (1.0 + x2) / (q * q * q) + ratio * ratio * (1.0 - 2.0 * x2 / tp) - x2 / tp;
        let root = ((1.0 + y * y + (-2.0 * x2 / tp).exp()) / (1.0 + 2.0 * y * y)).sqrt();
        bump * bracket / tp + z * x / (q * q) * root
    }

    fn terminal(&self, x: f64) -> f64 {
        (-x * x / (self.horizon + 1.0)).exp()
    }

    fn terminal_deriv(&self, x: f64) -> f64 {
        -2.0 * x / (self.horizon + 1.0) * self.terminal(x)
    }

    fn mu_partials(&self, s: &State) -> Partials {
        let x = s.x;
        let x2 = x * x;
        let q = 2.0 + x2;
        Partials {
            dx: (2.0 + x2 - 3.0 * x2 * x2) / q.powi(4),
            dxx: (12.0 * x2 * x2 * x - 30.0 * x2 * x - 12.0 * x) / q.powi(5),
            ..Partials::default()
        }
    }

    fn sigma_partials(&self, s: &State) -> Partials {
        let (_, ds, dds) = ex1_s(s.x);
        Partials { dx: ds, dxx: dds, ..Partials::default() }
    }

    fn analytic(&self) -> Option<&dyn AnalyticSolution> {
        Some(&Example1Solution)
    }
}

// ---------------------------------------------------------------------------
// Example 2: coupling through Y in both coefficients and Z in the drift.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2Params {
    pub horizon: f64,
    pub x0: f64,
    pub r: f64,
    pub sigma_bar: f64,
    pub kappa_y: f64,
    pub kappa_z: f64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Self { horizon: 1.0, x0: FRAC_PI_4, r: 0.0, sigma_bar: 0.4, kappa_y: 0.1, kappa_z: 0.0 }
    }
}

/// Partially coupled benchmark with solution `u = e^{-r(T-t)} sin x`.
#[derive(Debug, Clone)]
pub struct Example2 {
    p: Example2Params,
}

impl Example2 {
    pub fn with_params(p: Example2Params) -> Self {
        Self { p }
    }

    pub fn params(&self) -> &Example2Params {
        &self.p
    }
}

pub fn example2(kappa_z: f64) -> Example2 {
    Example2 { p: Example2Params { kappa_z, ..Example2Params::default() } }
}

impl AnalyticSolution for Example2 {
    fn u(&self, t: f64, x: f64) -> Jet {
        let d = (-self.p.r * (self.p.horizon - t)).exp();
        let (s, c) = x.sin_cos();
        Jet { value: d * s, d1: d * c, d2: -d * s }
    }

    fn v(&self, t: f64, x: f64) -> Jet {
        // σ̄ sin x cos x = (σ̄/2) sin 2x
        let d = (-2.0 * self.p.r * (self.p.horizon - t)).exp() * self.p.sigma_bar;
        let (s2, c2) = (2.0 * x).sin_cos();
        Jet { value: 0.5 * d * s2, d1: d * c2, d2: -2.0 * d * s2 }
    }
}

impl FbsdeProblem for Example2 {
    fn name(&self) -> String {
        "example2".into()
    }
    fn horizon(&self) -> f64 {
        self.p.horizon
    }
    fn x0(&self) -> f64 {
        self.p.x0
    }
    fn tier(&self) -> DerivativeTier {
        DerivativeTier::Second
    }
    fn sigma_depends_on_z(&self) -> bool {
        false
    }

    fn mu(&self, s: &State) -> f64 {
        self.p.kappa_y * self.p.sigma_bar * s.y + self.p.kappa_z * s.z
    }

    fn sigma(&self, s: &State) -> f64 {
        self.p.sigma_bar * s.y
    }

    fn driver(&self, s: &State) -> f64 {
        let Example2Params { horizon, r, sigma_bar, kappa_y, kappa_z, .. } = self.p;
        let e3 = (-3.0 * r * (horizon - s.t)).exp();
        let (sn, cs) = s.x.sin_cos();
        -r * s.y + 0.5 * e3 * sigma_bar * sigma_bar * sn.powi(3) - kappa_y * s.z
            - kappa_z * sigma_bar * e3 * sn * cs * cs
    }

    fn terminal(&self, x: f64) -> f64 {
        x.sin()
    }

    fn terminal_deriv(&self, x: f64) -> f64 {
        x.cos()
    }

    fn mu_partials(&self, _s: &State) -> Partials {
        Partials { dy: self.p.kappa_y * self.p.sigma_bar, dz: self.p.kappa_z, ..Partials::default() }
    }

    fn sigma_partials(&self, _s: &State) -> Partials {
        Partials { dy: self.p.sigma_bar, ..Partials::default() }
    }

    fn analytic(&self) -> Option<&dyn AnalyticSolution> {
        Some(self)
    }
}

// ---------------------------------------------------------------------------
// Example 3: linear-quadratic control, fully coupled.

/// Parameters of the linear-quadratic control benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqParams {
    pub horizon: f64,
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub c: f64,
    pub d: f64,
    pub sigma: f64,
    pub r_x: f64,
    pub r_xu: f64,
    pub r_u: f64,
    pub g: f64,
}

impl Default for LqParams {
    fn default() -> Self {
        Self {
            horizon: 0.25,
            x0: 0.1,
            a: -1.0,
            b: 0.1,
            beta: 0.0,
            c: 1.0,
            d: 0.01,
            sigma: 0.05,
            r_x: 2.0,
            r_xu: 0.0,
            r_u: 2.0,
            g: 2.0,
        }
    }
}

/// Linear coefficients of the LQ system, `μ = mx·x + my·y + mz·z + m0`
/// and likewise for `σ` and the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqCoefficients {
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
    pub m0: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub s0: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

impl LqParams {
    pub fn validate(&self) -> Result<()> {
        if self.r_u == 0.0 || !self.r_u.is_finite() {
            return Err(BcosError::InvalidParams("R_u must be non-zero".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(BcosError::InvalidParams("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> LqCoefficients {
        let a_t = self.a - self.b * self.r_xu / self.r_u;
        let c_t = self.c - self.d * self.r_xu / self.r_u;
        LqCoefficients {
            mx: a_t,
            my: self.b * self.b / self.r_u,
            mz: self.b * self.d / self.r_u,
            m0: self.beta,
            sx: c_t,
            sy: self.d * self.b / self.r_u,
            sz: self.d * self.d / self.r_u,
            s0: self.sigma,
            fx: -(self.r_x - self.r_xu / self.r_u),
            fy: a_t,
            fz: c_t,
        }
    }
}

/// Fully coupled linear-quadratic benchmark; its reference solution comes
/// from a Riccati system.
#[derive(Debug, Clone)]
pub struct Example3 {
    params: LqParams,
    lin: LqCoefficients,
    solution: Arc<RiccatiSolution>,
}

pub fn example3(params: LqParams) -> Result<Example3> {
    example3_with_ode_steps(params, DEFAULT_ODE_STEPS)
}

pub fn example3_with_ode_steps(params: LqParams, ode_steps: usize) -> Result<Example3> {
    params.validate()?;
    let solution = Arc::new(crate::reference::riccati::reference_riccati(&params, ode_steps)?);
    Ok(Example3 { params, lin: params.coefficients(), solution })
}

impl Example3 {
    pub fn params(&self) -> &LqParams {
        &self.params
    }

    pub fn riccati(&self) -> &RiccatiSolution {
        &self.solution
    }
}

impl FbsdeProblem for Example3 {
    fn name(&self) -> String {
        "example3".into()
    }
    fn horizon(&self) -> f64 {
        self.params.horizon
    }
    fn x0(&self) -> f64 {
        self.params.x0
    }
    fn tier(&self) -> DerivativeTier {
        DerivativeTier::Second
    }
    fn sigma_depends_on_z(&self) -> bool {
        true
    }

    fn mu(&self, s: &State) -> f64 {
        let l = &self.lin;
        l.mx * s.x + l.my * s.y + l.mz * s.z + l.m0
    }

    fn sigma(&self, s: &State) -> f64 {
        let l = &self.lin;
        l.sx * s.x + l.sy * s.y + l.sz * s.z + l.s0
    }

    fn driver(&self, s: &State) -> f64 {
        let l = &self.lin;
        l.fy * s.y + l.fz * s.z + l.fx * s.x
    }

    fn terminal(&self, x: f64) -> f64 {
        -self.params.g * x
    }

    fn terminal_deriv(&self, _x: f64) -> f64 {
        -self.params.g
    }

    fn mu_partials(&self, _s: &State) -> Partials {
        let l = &self.lin;
        Partials { dx: l.mx, dy: l.my, dz: l.mz, ..Partials::default() }
    }

    fn sigma_partials(&self, _s: &State) -> Partials {
        let l = &self.lin;
        Partials { dx: l.sx, dy: l.sy, dz: l.sz, ..Partials::default() }
    }

    fn analytic(&self) -> Option<&dyn AnalyticSolution> {
        Some(&*self.solution)
    }
}

/// Look up a shipped problem by name.
pub fn by_name(name: &str, kappa_z: f64, lq: LqParams) -> Result<Arc<dyn FbsdeProblem>> {
    match name {
        "example1" => Ok(Arc::new(example1())),
        "example2" => Ok(Arc::new(example2(kappa_z))),
        "example3" => Ok(Arc::new(example3(lq)?)),
        other => Err(BcosError::InvalidParams(format!("unknown problem `{other}`"))),
    }
}
