//! Seeded trial vectors for the randomized identity checks.

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{DiscreteFunction, Grid};

/// Deterministic source of Gaussian test functions.
#[derive(Debug, Clone)]
pub struct TrialRng {
    rng: ChaCha8Rng,
}

impl TrialRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// i.i.d. standard normal samples; imaginary parts are zero when
    /// `real` is set.
    pub fn function(&mut self, grid: &Grid, real: bool) -> DiscreteFunction {
        let values = (0..grid.len())
            .map(|_| {
                let re = self.normal();
                let im = if real { 0.0 } else { self.normal() };
                Complex::new(re, im)
            })
            .collect();
        DiscreteFunction::new(grid, values).expect("normal samples are finite")
    }
}
