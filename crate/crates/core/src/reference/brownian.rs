//! Reproducible Brownian increments with one random stream per path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{BcosError, Result};

/// Fine-grid Brownian increments for `paths` paths on `[0, horizon]`.
///
/// Increments are regenerated on demand from `(seed, path)`, so a bundle is
/// cheap to hold regardless of `n_fine`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianBundle {
    seed: u64,
    paths: usize,
    n_fine: usize,
    horizon: f64,
}

impl BrownianBundle {
    pub fn new(seed: u64, paths: usize, n_fine: usize, horizon: f64) -> Result<Self> {
        if paths == 0 || n_fine == 0 {
            return Err(BcosError::InvalidSize("path count and fine step count must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(BcosError::InvalidParams(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { seed, paths, n_fine, horizon })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_path(&self, path: usize) -> Result<()> {
        if path >= self.paths {
            return Err(BcosError::IndexOutOfRange { index: path, max: self.paths - 1 });
        }
        Ok(())
    }

    /// The `n_fine` increments of one path, each `N(0, horizon/n_fine)`.
    pub fn fine_increments(&self, path: usize) -> Result<Vec<f64>> {
        self.check_path(path)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        let scale = (self.horizon / self.n_fine as f64).sqrt();
        Ok((0..self.n_fine).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
    }

    /// Number of fine steps per coarse step, if `coarse` divides `n_fine`.
    pub fn ratio(&self, coarse: usize) -> Result<usize> {
        if coarse == 0 || self.n_fine % coarse != 0 {
            return Err(BcosError::NonDivisor { coarse, fine: self.n_fine });
        }
        Ok(self.n_fine / coarse)
    }

    /// Increments of one path summed to `coarse` uniform steps.
    pub fn coarse_increments(&self, path: usize, coarse: usize) -> Result<Vec<f64>> {
        let ratio = self.ratio(coarse)?;
        Ok(aggregate(&self.fine_increments(path)?, ratio))
    }
}

/// Sum consecutive blocks of `ratio` increments.
pub fn aggregate(fine: &[f64], ratio: usize) -> Vec<f64> {
    fine.chunks(ratio).map(|c| c.iter().sum()).collect()
}
