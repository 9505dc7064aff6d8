//! Truncated Fourier cosine expansions on a bounded interval `[a, b]`.
//!
//! Coefficients follow the primed-sum convention: the `k = 0` coefficient is
//! stored in full and halved whenever the series is summed. Coefficients are
//! recovered from samples on the half-shifted grid
//! `x_l = a + (l + 1/2)(b - a)/K` by a type-2 DCT, and evaluation on that grid
//! is the matching type-3 DCT, so the pair is an exact inverse.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{BcosError, Result};

/// Half-shifted uniform grid on `[a, b]` with one node per Fourier term.
#[derive(Clone)]
pub struct SpatialGrid {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    transform: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("k", &self.nodes.len())
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.nodes.len() == other.nodes.len()
    }
}

impl SpatialGrid {
    pub fn new(a: f64, b: f64, k: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(BcosError::InvalidBounds { a, b });
        }
        if k == 0 {
            return Err(BcosError::InvalidSize("grid needs at least one node".into()));
        }
        let h = (b - a) / k as f64;
        let nodes = (0..k).map(|l| a + (l as f64 + 0.5) * h).collect();
        let transform = DctPlanner::new().plan_dct2(k);
        Ok(Self { a, b, nodes, transform })
    }

    /// Shared-ownership constructor, the form every series expects.
    pub fn shared(a: f64, b: f64, k: usize) -> Result<Arc<Self>> {
        Self::new(a, b, k).map(Arc::new)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Number of nodes, equal to the number of Fourier terms.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Angular frequency `k π / (b - a)` of the `k`-th basis function.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * PI / self.width()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.a, self.b)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Value and first two derivatives of a function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self { value, d1: 0.0, d2: 0.0 }
    }
}

/// A truncated cosine series `Σ' V_k cos(kπ(x - a)/(b - a))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeries {
    grid: Arc<SpatialGrid>,
    coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn from_coeffs(grid: Arc<SpatialGrid>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(BcosError::LengthMismatch { expected: grid.len(), got: coeffs.len() });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let coeffs = vec![0.0; grid.len()];
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x).value
    }

    pub fn eval_deriv1(&self, x: f64) -> f64 {
        self.jet(x).d1
    }

    pub fn eval_deriv2(&self, x: f64) -> f64 {
        self.jet(x).d2
    }

    /// Series value and analytic first and second derivatives at `x`, with
    /// `x` clamped to `[a, b]`.
    ///
    /// The basis `cos(kθ), sin(kθ)` is generated by a rotation recurrence, so
    /// the cost is one `sin_cos` plus `O(K)` multiply-adds.
    pub fn jet(&self, x: f64) -> Jet {
        let grid = &*self.grid;
        let omega = PI / grid.width();
        let theta = omega * (grid.clamp(x) - grid.a);
        let (s1, c1) = theta.sin_cos();
        let (mut c, mut s) = (1.0_f64, 0.0_f64);
        let mut value = 0.5 * self.coeffs[0];
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (k, &v) in self.coeffs.iter().enumerate().skip(1) {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            let kf = k as f64;
            value += v * c;
            d1 -= kf * v * s;
            d2 -= kf * kf * v * c;
        }
        Jet { value, d1: d1 * omega, d2: d2 * omega * omega }
    }

    /// Series values at every grid node (type-3 DCT, `O(K log K)`).
    pub fn eval_nodes(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        self.grid.transform.process_dct3(&mut buf);
        buf
    }

    /// Analytic first derivative at every grid node (type-3 DST).
    pub fn deriv1_nodes(&self) -> Vec<f64> {
        let k = self.grid.len();
        let omega = PI / self.grid.width();
        let mut buf = vec![0.0; k];
        for n in 1..k {
            buf[n - 1] = -(n as f64) * omega * self.coeffs[n];
        }
        self.grid.transform.process_dst3(&mut buf);
        buf
    }

    /// Analytic second derivative at every grid node (type-3 DCT).
    pub fn deriv2_nodes(&self) -> Vec<f64> {
        let omega = PI / self.grid.width();
        let mut buf: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, &v)| -(n as f64 * omega).powi(2) * v)
            .collect();
        self.grid.transform.process_dct3(&mut buf);
        buf
    }

    /// Value, first and second derivative at every node.
    pub fn jet_nodes(&self) -> Vec<Jet> {
        let v = self.eval_nodes();
        let d1 = self.deriv1_nodes();
        let d2 = self.deriv2_nodes();
        v.into_iter()
            .zip(d1)
            .zip(d2)
            .map(|((value, d1), d2)| Jet { value, d1, d2 })
            .collect()
    }
}

/// Coefficient recovery `V_k = (2/K) Σ_l samples[l] cos(kπ(2l+1)/(2K))`.
pub fn dct2(samples: &[f64], grid: &Arc<SpatialGrid>) -> Result<CosineSeries> {
    let k = grid.len();
    if samples.len() != k {
        return Err(BcosError::LengthMismatch { expected: k, got: samples.len() });
    }
    let mut buf = samples.to_vec();
    grid.transform.process_dct2(&mut buf);
    let scale = 2.0 / k as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(CosineSeries { grid: Arc::clone(grid), coeffs: buf })
}

/// Direct `O(K²)` evaluation of the same sum as [`dct2`].
pub fn dct2_direct(samples: &[f64], grid: &Arc<SpatialGrid>) -> Result<CosineSeries> {
    let k = grid.len();
    if samples.len() != k {
        return Err(BcosError::LengthMismatch { expected: k, got: samples.len() });
    }
    let kf = k as f64;
    let coeffs = (0..k)
        .map(|j| {
            let sum: f64 = samples
                .iter()
                .enumerate()
                .map(|(l, &s)| s * (j as f64 * PI * (2 * l + 1) as f64 / (2.0 * kf)).cos())
                .sum();
            2.0 * sum / kf
        })
        .collect();
    Ok(CosineSeries { grid: Arc::clone(grid), coeffs })
}
