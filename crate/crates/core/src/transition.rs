//! One-step Markov transitions `X⁺ = x + m̄Δt + s̄ΔW + κ̄ΔW²` and their
//! closed-form characteristic functions.
//!
//! For each node `x_i` of the spatial grid a [`TransitionTable`] stores the
//! scheme coefficients and `Φ(u_k | x_i) = φ(u_k | x_i)·exp(-i u_k a)` at the
//! cosine frequencies `u_k = kπ/(b - a)`. Conditional expectations of
//! `h(X⁺)(ΔW)^p` for `p ≤ 2` then reduce to weighted sums over the cosine
//! coefficients of `h`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::cosine::SpatialGrid;
use crate::error::{BcosError, Result};
use crate::problem::{compose, ComposedCoefficients, DerivativeTier, FbsdeProblem, FieldJets};
use crate::solver::DecouplingField;

/// Forward discretisation of the decoupled SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Euler,
    Milstein,
    WeakTaylor2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Euler, SchemeKind::Milstein, SchemeKind::WeakTaylor2];

    /// Partial derivatives the problem must supply for this scheme.
    pub fn required_tier(self) -> DerivativeTier {
        match self {
            SchemeKind::Euler => DerivativeTier::None,
            SchemeKind::Milstein => DerivativeTier::First,
            SchemeKind::WeakTaylor2 => DerivativeTier::Second,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Milstein => "milstein",
            SchemeKind::WeakTaylor2 => "weak-taylor-2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = BcosError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(SchemeKind::Euler),
            "milstein" => Ok(SchemeKind::Milstein),
            "weak-taylor-2" | "weak-taylor" | "weak_taylor_2" | "wt2" => Ok(SchemeKind::WeakTaylor2),
            other => Err(BcosError::InvalidParams(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Transition coefficients `(m̄, s̄, κ̄)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub m_bar: f64,
    pub s_bar: f64,
    pub kappa_bar: f64,
}

/// Scheme coefficients from already composed `μ̄, σ̄` and their derivatives.
///
/// `c` must carry the derivatives required by `scheme`.
pub fn scheme_coefficients(scheme: SchemeKind, c: &ComposedCoefficients, dt: f64) -> Result<StepCoefficients> {
    let missing = || BcosError::TierUnavailable { problem: "composed coefficients".into(), required: scheme.required_tier().describe() };
    match scheme {
        SchemeKind::Euler => Ok(StepCoefficients { m_bar: c.mu_bar, s_bar: c.sigma_bar, kappa_bar: 0.0 }),
        SchemeKind::Milstein => {
            let kappa = c.sigma_bar * c.dx_sigma_bar.ok_or_else(missing)? / 2.0;
            Ok(StepCoefficients { m_bar: c.mu_bar - kappa, s_bar: c.sigma_bar, kappa_bar: kappa })
        }
        SchemeKind::WeakTaylor2 => {
            let dxs = c.dx_sigma_bar.ok_or_else(missing)?;
            let d = c.second.ok_or_else(missing)?;
            let (mu, sigma) = (c.mu_bar, c.sigma_bar);
            let kappa = sigma * dxs / 2.0;
            let m_bar = mu - kappa + (d.dt_mu + mu * d.dx_mu + d.dxx_mu * sigma * sigma / 2.0) * dt / 2.0;
            let s_bar = sigma + (d.dx_mu * sigma + d.dt_sigma + mu * dxs + d.dxx_sigma * sigma * sigma / 2.0) * dt / 2.0;
            Ok(StepCoefficients { m_bar, s_bar, kappa_bar: kappa })
        }
    }
}

/// Transition coefficients at `(t_n, x)` under the decoupling pair `field`.
pub fn coefficients(
    scheme: SchemeKind,
    problem: &dyn FbsdeProblem,
    field: &FieldJets,
    t_n: f64,
    dt: f64,
    x: f64,
) -> Result<StepCoefficients> {
    let c = compose(problem, t_n, x, field, scheme.required_tier())?;
    scheme_coefficients(scheme, &c, dt)
}

/// `1/d` and `1/√d` for `d = 1 - i c` with real `c`, principal branch.
///
/// Writing `√d = p - i q` gives `p² - q² = 1`, `2pq = c`, so no
/// transcendental call beyond two square roots is needed.
#[inline(always)]
fn inverse_roots(c: f64) -> (Complex64, Complex64) {
    let t = 1.0 + c * c;
    let modulus = t.sqrt();
    let p = ((modulus + 1.0) / 2.0).sqrt();
    let q = c / (2.0 * p);
    let inv_t = 1.0 / t;
    (Complex64::new(inv_t, c * inv_t), Complex64::new(p / modulus, q / modulus))
}

/// `E[exp(iu X⁺)]` for `X⁺ = x + m̄Δt + s̄ΔW + κ̄ΔW²`, `ΔW ~ N(0, Δt)`.
pub fn characteristic(m_bar: f64, s_bar: f64, kappa_bar: f64, dt: f64, x: f64, u: f64) -> Complex64 {
    let c = 2.0 * u * kappa_bar * dt;
    let (inv_d, inv_sqrt_d) = inverse_roots(c);
    let g = u * u * s_bar * s_bar * dt / 2.0;
    let (sin, cos) = (u * (x + m_bar * dt) - g * inv_d.im).sin_cos();
    Complex64::new(cos, sin) * ((-g * inv_d.re).exp() * inv_sqrt_d)
}

/// Re-anchor interval of the phase rotation recurrence.
const PHASE_ANCHOR: usize = 64;

/// Entries with modulus below `e^-50` are stored as zero.
const NEGLIGIBLE_EXPONENT: f64 = -50.0;

/// Append `Φ(jω | x)` for `j < k`, where `theta = ω(x + m̄Δt - a)`.
///
/// The phase `jθ` linear in `j` is advanced by complex rotation and re-anchored
/// by an exact `sin_cos` every [`PHASE_ANCHOR`] steps; only the residual phase
/// from `κ̄` goes through `sin_cos` at each entry.
#[inline(always)]
fn tabulate_node(out: &mut Vec<Complex64>, c: &StepCoefficients, dt: f64, theta: f64, omega: f64, k: usize) {
    let (s1, c1) = theta.sin_cos();
    let rot = Complex64::new(c1, s1);
    let half_var = c.s_bar * c.s_bar * dt / 2.0;
    let two_kappa_dt = 2.0 * c.kappa_bar * dt;
    let mut base = Complex64::new(1.0, 0.0);
    for j in 0..k {
        if j % PHASE_ANCHOR == 0 {
            let (s, c) = libm::sincos(j as f64 * theta);
            base = Complex64::new(c, s);
        }
        let u = j as f64 * omega;
        let cc = two_kappa_dt * u;
        let modulus = (1.0 + cc * cc).sqrt();
        let p = ((modulus + 1.0) / 2.0).sqrt();
        let r = 1.0 / (p * modulus);
        let inv_t = (p * r) * (p * r);
        let g = u * u * half_var;
        let re = -g * inv_t;
        if re < NEGLIGIBLE_EXPONENT {
            out.push(Complex64::new(0.0, 0.0));
        } else {
            // 1/√d = (p + iq)/|d| with q = c/(2p)
            let inv_sqrt_d = Complex64::new(p * p * r, cc * r / 2.0);
            let (sin, cos) = libm::sincos(-g * cc * inv_t);
            out.push(base * Complex64::new(cos, sin) * (inv_sqrt_d * re.exp()));
        }
        base *= rot;
    }
}

/// Multiplier `w_k` with `E[exp(iuX⁺)ΔW^k] = w_k·E[exp(iuX⁺)]`.
pub fn jk_weight(u: f64, s_bar: f64, kappa_bar: f64, dt: f64, k: u32) -> Result<Complex64> {
    let (inv_d, _) = inverse_roots(2.0 * u * kappa_bar * dt);
    let w1 = Complex64::new(0.0, u * s_bar * dt) * inv_d;
    match k {
        0 => Ok(Complex64::new(1.0, 0.0)),
        1 => Ok(w1),
        2 => Ok(w1 * w1 + inv_d * dt),
        _ => Err(BcosError::UnsupportedPower(k)),
    }
}

/// Per-node coefficients and the `K × K` characteristic matrix of one step.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    grid: Arc<SpatialGrid>,
    dt: f64,
    m_bar: Vec<f64>,
    s_bar: Vec<f64>,
    kappa_bar: Vec<f64>,
    /// Node-major: `phi[i * K + k] = Φ(u_k | x_i)`.
    phi: Vec<Complex64>,
}

impl TransitionTable {
    /// Tabulate `Φ` from per-node coefficients.
    pub fn from_coefficients(grid: Arc<SpatialGrid>, dt: f64, coeffs: &[StepCoefficients]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(BcosError::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        let k = grid.len();
        if coeffs.len() != k {
            return Err(BcosError::LengthMismatch { expected: k, got: coeffs.len() });
        }
        let omega = grid.frequency(1);
        let a = grid.a();
        let mut phi = Vec::with_capacity(k * k);
        for (c, &x) in coeffs.iter().zip(grid.nodes()) {
            tabulate_node(&mut phi, c, dt, omega * (x + c.m_bar * dt - a), omega, k);
        }
        Ok(Self {
            m_bar: coeffs.iter().map(|c| c.m_bar).collect(),
            s_bar: coeffs.iter().map(|c| c.s_bar).collect(),
            kappa_bar: coeffs.iter().map(|c| c.kappa_bar).collect(),
            grid,
            dt,
            phi,
        })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn m_bar(&self) -> &[f64] {
        &self.m_bar
    }

    pub fn s_bar(&self) -> &[f64] {
        &self.s_bar
    }

    pub fn kappa_bar(&self) -> &[f64] {
        &self.kappa_bar
    }

    /// `Φ(kπ/(b - a) | x_i)`.
    pub fn phi(&self, k: usize, i: usize) -> Complex64 {
        self.phi[i * self.grid.len() + k]
    }

    /// All frequencies for node `i`.
    pub fn phi_node(&self, i: usize) -> &[Complex64] {
        let k = self.grid.len();
        &self.phi[i * k..(i + 1) * k]
    }

    /// The `ΔW` weight `w_1(u_k)` at node `i`.
    #[inline]
    pub fn w1(&self, k: usize, i: usize) -> Complex64 {
        let u = self.grid.frequency(k);
        let c = 2.0 * u * self.kappa_bar[i] * self.dt;
        let inv_t = 1.0 / (1.0 + c * c);
        let scale = u * self.s_bar[i] * self.dt * inv_t;
        Complex64::new(-c * scale, scale)
    }

    /// `E[h(X⁺)(ΔW)^power | X = x_i]` for `h = Σ' series_coeffs[l] cos(u_l(· - a))`.
    pub fn cos_expectation(&self, series_coeffs: &[f64], i: usize, power: u32) -> Result<f64> {
        let k = self.grid.len();
        if series_coeffs.len() != k {
            return Err(BcosError::LengthMismatch { expected: k, got: series_coeffs.len() });
        }
        if i >= k {
            return Err(BcosError::IndexOutOfRange { index: i, max: k - 1 });
        }
        let (s, kappa) = (self.s_bar[i], self.kappa_bar[i]);
        let row = self.phi_node(i);
        let mut sum = 0.0;
        for (l, (&v, &p)) in series_coeffs.iter().zip(row).enumerate() {
            let w = jk_weight(self.grid.frequency(l), s, kappa, self.dt, power)?;
            let term = v * (w * p).re;
            sum += if l == 0 { 0.5 * term } else { term };
        }
        Ok(sum)
    }
}

/// Build the transition table of `scheme` at `t_n` with decoupling `field`.
pub fn build_table(
    scheme: SchemeKind,
    problem: &dyn FbsdeProblem,
    field: &DecouplingField,
    t_n: f64,
    dt: f64,
) -> Result<TransitionTable> {
    let grid = Arc::clone(field.grid());
    let jets = field.node_jets(scheme.required_tier());
    let coeffs = grid
        .nodes()
        .iter()
        .zip(&jets)
        .map(|(&x, jet)| coefficients(scheme, problem, jet, t_n, dt, x))
        .collect::<Result<Vec<_>>>()?;
    TransitionTable::from_coefficients(grid, dt, &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosine::{dct2, Jet};
    use crate::problem::{example1, example2, Partials, State};
    use gauss_quad::GaussHermite;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    /// `E[F(ΔW)]` for `ΔW ~ N(0, dt)` by Gauss–Hermite quadrature.
    fn gh_expect<F: Fn(f64) -> Complex64>(quad: &GaussHermite, dt: f64, f: F) -> Complex64 {
        let scale = (2.0 * dt).sqrt();
        quad.iter()
            .map(|(t, w)| f(scale * t) * *w)
            .fold(Complex64::new(0.0, 0.0), |acc, v| acc + v)
            / PI.sqrt()
    }

    struct Decoupled {
        mu: f64,
        sigma: f64,
    }

    impl FbsdeProblem for Decoupled {
        fn name(&self) -> String {
            "decoupled".into()
        }
        fn horizon(&self) -> f64 {
            1.0
        }
        fn x0(&self) -> f64 {
            0.0
        }
        fn tier(&self) -> DerivativeTier {
            DerivativeTier::Second
        }
        fn sigma_depends_on_z(&self) -> bool {
            false
        }
        fn mu(&self, _s: &State) -> f64 {
            self.mu
        }
        fn sigma(&self, _s: &State) -> f64 {
            self.sigma
        }
        fn driver(&self, _s: &State) -> f64 {
            0.0
        }
        fn terminal(&self, x: f64) -> f64 {
            x
        }
        fn terminal_deriv(&self, _x: f64) -> f64 {
            1.0
        }
    }

    fn field_of(grid: &Arc<SpatialGrid>, y: impl Fn(f64) -> f64, z: impl Fn(f64) -> f64) -> DecouplingField {
        let ys: Vec<f64> = grid.nodes().iter().map(|&x| y(x)).collect();
        let zs: Vec<f64> = grid.nodes().iter().map(|&x| z(x)).collect();
        DecouplingField::new(0.0, dct2(&ys, grid).unwrap(), dct2(&zs, grid).unwrap()).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeKind::ALL {
            assert_eq!(s.name().parse::<SchemeKind>().unwrap(), s);
        }
        assert!("rk4".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn characteristic_normalisation_and_gaussian_case() {
        assert_eq!(characteristic(0.3, 0.7, 0.2, 0.1, 1.5, 0.0), Complex64::new(1.0, 0.0));
        let c = characteristic(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        assert!((c - Complex64::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn characteristic_matches_monte_carlo() {
        let (m, s, kappa, dt, x, u) = (0.1, 0.3, 0.2, 0.5, 0.0, 2.0);
        let exact = characteristic(m, s, kappa, dt, x, u);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000;
        let (mut sr, mut si, mut sr2, mut si2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let (sin, cos) = (u * (x + m * dt + s * dw + kappa * dw * dw)).sin_cos();
            sr += cos;
            si += sin;
            sr2 += cos * cos;
            si2 += sin * sin;
        }
        let nf = n as f64;
        let (mr, mi) = (sr / nf, si / nf);
        let se_r = ((sr2 / nf - mr * mr) / nf).sqrt();
        let se_i = ((si2 / nf - mi * mi) / nf).sqrt();
        assert!((mr - exact.re).abs() < 3.0 * se_r, "re {mr} vs {}", exact.re);
        assert!((mi - exact.im).abs() < 3.0 * se_i, "im {mi} vs {}", exact.im);
    }

    #[test]
    fn characteristic_matches_quadrature() {
        let quad = GaussHermite::new(200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = rng.random_range(-1.0..1.0);
            let s = rng.random_range(0.05..1.0);
            let kappa = rng.random_range(-0.5..0.5);
            let dt = rng.random_range(0.001..0.1);
            let x = rng.random_range(-2.0..2.0);
            let u = rng.random_range(-10.0..10.0);
            let exact = characteristic(m, s, kappa, dt, x, u);
            let q = gh_expect(&quad, dt, |dw| Complex64::new(0.0, u * (x + m * dt + s * dw + kappa * dw * dw)).exp());
            assert!((exact - q).norm() < 1e-10, "{exact} vs {q}");
        }
    }

    #[test]
    fn jk_trivial_moments() {
        assert_eq!(jk_weight(0.0, 0.4, 0.3, 0.1, 0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(jk_weight(0.0, 0.4, 0.3, 0.1, 1).unwrap(), Complex64::new(0.0, 0.0));
        assert!((jk_weight(0.0, 0.4, 0.3, 0.1, 2).unwrap() - Complex64::new(0.1, 0.0)).norm() < 1e-16);
        assert_eq!(jk_weight(1.0, 0.4, 0.3, 0.1, 3), Err(BcosError::UnsupportedPower(3)));
        let w = jk_weight(2.0, 0.4, 0.0, 0.1, 1).unwrap();
        assert!((w - Complex64::new(0.0, 2.0 * 0.4 * 0.1)).norm() < 1e-16);
    }

    #[test]
    fn jk_weights_match_quadrature() {
        let quad = GaussHermite::new(200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let m = rng.random_range(-1.0..1.0);
            let s = rng.random_range(0.05..1.0);
            let kappa = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-0.5..0.5) };
            let dt = rng.random_range(0.001..0.1);
            let x = rng.random_range(-2.0..2.0);
            let u = rng.random_range(-10.0..10.0);
            let phi = characteristic(m, s, kappa, dt, x, u);
            for k in 1..=2 {
                let w = jk_weight(u, s, kappa, dt, k).unwrap();
                let q = gh_expect(&quad, dt, |dw| {
                    Complex64::new(0.0, u * (x + m * dt + s * dw + kappa * dw * dw)).exp() * dw.powi(k as i32)
                });
                assert!((w * phi - q).norm() < 1e-10, "k={k}: {} vs {q}", w * phi);
            }
        }
    }

    #[test]
    fn table_entries_match_direct_characteristic() {
        let grid = SpatialGrid::shared(-5.0, 7.0, 700).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coeffs: Vec<StepCoefficients> = (0..grid.len())
            .map(|_| StepCoefficients {
                m_bar: rng.random_range(-1.0..1.0),
                s_bar: rng.random_range(0.0..1.0),
                kappa_bar: rng.random_range(-0.5..0.5),
            })
            .collect();
        let dt = 0.01;
        let table = TransitionTable::from_coefficients(Arc::clone(&grid), dt, &coeffs).unwrap();
        for i in (0..grid.len()).step_by(37) {
            let c = coeffs[i];
            for k in 0..grid.len() {
                let u = grid.frequency(k);
                let direct = characteristic(c.m_bar, c.s_bar, c.kappa_bar, dt, grid.nodes()[i], u)
                    * Complex64::new(0.0, -u * grid.a()).exp();
                assert!((table.phi(k, i) - direct).norm() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn single_node_table_is_one() {
        let grid = SpatialGrid::shared(-1.0, 1.0, 1).unwrap();
        let coeffs = [StepCoefficients { m_bar: 0.2, s_bar: 0.3, kappa_bar: 0.1 }];
        let table = TransitionTable::from_coefficients(grid, 0.1, &coeffs).unwrap();
        assert_eq!(table.phi(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn constant_and_linear_payoffs() {
        let grid = SpatialGrid::shared(-5.0, 5.0, 256).unwrap();
        let problem = Decoupled { mu: 0.1, sigma: 0.2 };
        let field = field_of(&grid, |_| 0.0, |_| 0.0);
        let table = build_table(SchemeKind::Euler, &problem, &field, 0.0, 0.01).unwrap();
        let mut constant = vec![0.0; 256];
        constant[0] = 2.0 * 1.7;
        let i = 100;
        assert!((table.cos_expectation(&constant, i, 0).unwrap() - 1.7).abs() < 1e-14);
        assert!(table.cos_expectation(&constant, i, 1).unwrap().abs() < 1e-14);
        assert!((table.cos_expectation(&constant, i, 2).unwrap() - 1.7 * 0.01).abs() < 1e-14);

        // h(x) = x from the node x_500 = 0.5
        let grid = SpatialGrid::shared(-4.505, 5.495, 1000).unwrap();
        let i = 500;
        assert!((grid.nodes()[i] - 0.5).abs() < 1e-12);
        let field = field_of(&grid, |_| 0.0, |_| 0.0);
        let table = build_table(SchemeKind::Euler, &problem, &field, 0.0, 0.01).unwrap();
        let h = dct2(grid.nodes(), &grid).unwrap();
        let mean = table.cos_expectation(h.coeffs(), i, 0).unwrap();
        assert!((mean - 0.501).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn modulus_is_bounded_on_example1() {
        let problem = example1();
        let grid = SpatialGrid::shared(-19.341110327048455, 22.822591808529936, 128).unwrap();
        let sol = problem.analytic().unwrap();
        let field = field_of(&grid, |x| sol.u(0.0, x).value, |x| sol.v(0.0, x).value);
        for scheme in SchemeKind::ALL {
            for dt in [1.0, 0.1, 0.01] {
                let table = build_table(scheme, &problem, &field, 0.0, dt).unwrap();
                for i in 0..grid.len() {
                    assert_eq!(table.phi(0, i), Complex64::new(1.0, 0.0));
                    for k in 0..grid.len() {
                        assert!(table.phi(k, i).norm() <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_tables_ignore_the_field() {
        let problem = example1();
        let grid = SpatialGrid::shared(-19.341110327048455, 22.822591808529936, 64).unwrap();
        let f1 = field_of(&grid, |x| (-x * x).exp(), |x| x.sin());
        let f2 = field_of(&grid, |x| 3.0 + x, |x| x.cos());
        for scheme in SchemeKind::ALL {
            let t1 = build_table(scheme, &problem, &f1, 0.0, 0.1).unwrap();
            let t2 = build_table(scheme, &problem, &f2, 0.0, 0.1).unwrap();
            assert_eq!(t1.phi, t2.phi);
        }
    }

    #[test]
    fn milstein_degenerates_to_euler_for_flat_diffusion() {
        let grid = SpatialGrid::shared(-3.0, 5.0, 64).unwrap();
        let problem = example2(0.01);
        // σ = σ̄y is flat in x for a constant y field
        let field = field_of(&grid, |_| 0.7, |x| 0.1 * x);
        let e = build_table(SchemeKind::Euler, &problem, &field, 0.0, 0.05).unwrap();
        let m = build_table(SchemeKind::Milstein, &problem, &field, 0.0, 0.05).unwrap();
        assert_eq!(e.phi, m.phi);
        assert_eq!(e.kappa_bar, m.kappa_bar);
    }

    #[test]
    fn weak_taylor_trivial_for_brownian_motion() {
        let problem = Decoupled { mu: 0.0, sigma: 1.0 };
        let jets = FieldJets::default();
        let c = coefficients(SchemeKind::WeakTaylor2, &problem, &jets, 0.3, 0.1, 0.4).unwrap();
        assert_eq!(c, StepCoefficients { m_bar: 0.0, s_bar: 1.0, kappa_bar: 0.0 });
    }

    #[test]
    fn milstein_kappa_matches_finite_differences_on_example2() {
        let problem = example2(0.0);
        let sol = problem.analytic().unwrap();
        let (t, x) = (0.0, PI / 4.0);
        let jets = FieldJets { y: sol.u(t, x), z: sol.v(t, x) };
        let c = coefficients(SchemeKind::Milstein, &problem, &jets, t, 0.01, x).unwrap();
        let sigma = |x: f64| problem.sigma(&State::new(t, x, sol.u(t, x).value, sol.v(t, x).value));
        let h = 1e-5;
        let fd = sigma(x) * (sigma(x + h) - sigma(x - h)) / (2.0 * h) / 2.0;
        assert!((c.kappa_bar - fd).abs() < 1e-6);
        let sb = problem.params().sigma_bar;
        let u = sol.u(t, x);
        assert!((c.kappa_bar - sb * sb * u.value * u.d1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tier_is_enforced() {
        struct Flat;
        impl FbsdeProblem for Flat {
            fn name(&self) -> String {
                "flat".into()
            }
            fn horizon(&self) -> f64 {
                1.0
            }
            fn x0(&self) -> f64 {
                0.0
            }
            fn tier(&self) -> DerivativeTier {
                DerivativeTier::None
            }
            fn sigma_depends_on_z(&self) -> bool {
                false
            }
            fn mu(&self, _s: &State) -> f64 {
                0.0
            }
            fn sigma(&self, _s: &State) -> f64 {
                1.0
            }
            fn driver(&self, _s: &State) -> f64 {
                0.0
            }
            fn terminal(&self, _x: f64) -> f64 {
                0.0
            }
            fn terminal_deriv(&self, _x: f64) -> f64 {
                0.0
            }
            fn sigma_partials(&self, _s: &State) -> Partials {
                Partials::default()
            }
        }
        let jets = FieldJets { y: Jet::constant(1.0), z: Jet::constant(0.0) };
        assert!(coefficients(SchemeKind::Euler, &Flat, &jets, 0.0, 0.1, 0.0).is_ok());
        assert!(matches!(
            coefficients(SchemeKind::Milstein, &Flat, &jets, 0.0, 0.1, 0.0),
            Err(BcosError::TierUnavailable { .. })
        ));
    }

    /// `h` as a clamped cosine series, so quadrature sees exactly the payoff
    /// the COS sum represents.
    fn random_series(grid: &Arc<SpatialGrid>, rng: &mut ChaCha8Rng) -> crate::cosine::CosineSeries {
        let shift = rng.random_range(-1.0..1.0);
        let width = rng.random_range(0.5..2.0);
        let samples: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| ((x - shift) / width).tanh() + 0.3 * (-(x - shift).powi(2)).exp())
            .collect();
        dct2(&samples, grid).unwrap()
    }

    #[test]
    fn cos_expectation_matches_quadrature_for_all_powers() {
        let quad = GaussHermite::new(200).unwrap();
        let grid = SpatialGrid::shared(-5.0, 5.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..12 {
            let h = random_series(&grid, &mut rng);
            let dt = rng.random_range(0.01..0.1);
            let kappa = if trial % 3 == 0 { 0.0 } else { rng.random_range(-0.3..0.3) };
            let coeffs: Vec<StepCoefficients> = (0..grid.len())
                .map(|_| StepCoefficients { m_bar: rng.random_range(-0.5..0.5), s_bar: rng.random_range(0.1..0.5), kappa_bar: kappa })
                .collect();
            let table = TransitionTable::from_coefficients(Arc::clone(&grid), dt, &coeffs).unwrap();
            for i in [100, 128, 150] {
                let c = coeffs[i];
                let x = grid.nodes()[i];
                for p in 0..=2u32 {
                    let cos = table.cos_expectation(h.coeffs(), i, p).unwrap();
                    let q = gh_expect(&quad, dt, |dw| {
                        let xn = x + c.m_bar * dt + c.s_bar * dw + c.kappa_bar * dw * dw;
                        Complex64::new(h.eval(xn) * dw.powi(p as i32), 0.0)
                    });
                    assert!((cos - q.re).abs() < 1e-8, "trial {trial} node {i} power {p}: {cos} vs {}", q.re);
                }
            }
        }
    }

    #[test]
    fn time_weighted_increment_identity() {
        // (ΔW, ΔB) with ΔB = ∫(s - t_n)dW_s is bivariate normal with
        // Var ΔW = dt, Var ΔB = dt³/3, Cov = dt²/2.
        let quad = GaussHermite::new(200).unwrap();
        let pairs: Vec<(f64, f64)> = quad.iter().map(|(t, w)| (*t * 2f64.sqrt(), *w / PI.sqrt())).collect();
        let grid = SpatialGrid::shared(-5.0, 5.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..4 {
            let h = random_series(&grid, &mut rng);
            let dt = rng.random_range(0.01..0.1);
            let c = StepCoefficients { m_bar: rng.random_range(-0.5..0.5), s_bar: rng.random_range(0.1..0.5), kappa_bar: 0.0 };
            let coeffs = vec![c; grid.len()];
            let table = TransitionTable::from_coefficients(Arc::clone(&grid), dt, &coeffs).unwrap();
            let i = 128;
            let x = grid.nodes()[i];
            let mut lhs = 0.0;
            for &(xi1, w1) in &pairs {
                let dw = dt.sqrt() * xi1;
                let hx = h.eval(x + c.m_bar * dt + c.s_bar * dw);
                for &(xi2, w2) in &pairs {
                    let db = dt.powf(1.5) * (xi1 / 2.0 + xi2 / 12f64.sqrt());
                    lhs += w1 * w2 * db * hx;
                }
            }
            let rhs = dt / 2.0 * table.cos_expectation(h.coeffs(), i, 1).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn table_validates_inputs() {
        let grid = SpatialGrid::shared(0.0, 1.0, 4).unwrap();
        let c = StepCoefficients { m_bar: 0.0, s_bar: 1.0, kappa_bar: 0.0 };
        assert!(TransitionTable::from_coefficients(Arc::clone(&grid), 0.0, &[c; 4]).is_err());
        assert!(TransitionTable::from_coefficients(Arc::clone(&grid), 0.1, &[c; 3]).is_err());
        let table = TransitionTable::from_coefficients(grid, 0.1, &[c; 4]).unwrap();
        assert!(table.cos_expectation(&[0.0; 3], 0, 0).is_err());
        assert!(table.cos_expectation(&[0.0; 4], 4, 0).is_err());
        assert!(table.cos_expectation(&[0.0; 4], 0, 3).is_err());
    }
}
