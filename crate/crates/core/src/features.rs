//! Feature-map families whose induced kernels are known in closed form.
//!
//! | family | `h(t, p)` | `K(p, q)` |
//! |--------|-----------|-----------|
//! | fourier | `exp(−i t p) / sqrt(2π)` on `T = [−b, b]` | `sin(b(p−q)) / (π(p−q))` |
//! | indicator | `1{t ≤ p}` on `T = E` | `min(p, q)` |
//! | gaussian | `exp(−(t−p)² / (2σ²))` on `T ⊇ [p_min − 8σ, p_max + 8σ]` | `σ sqrt(π) exp(−(p−q)² / (4σ²))` |
//! | orthonormal_diagonal | orthonormal cosine modes rescaled by `sqrt(v/w)` | `v(p) δ(p−q)` |
//!
//! The gaussian closed form assumes `T = ℝ`. Truncating to `8σ` beyond the
//! data drops a relative mass of at most `erfc(8) ≈ 1.1e-29`, far below
//! quadrature error.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Rule};
use crate::kernel::sinc_kernel;
use crate::transform::FeatureMap;
use crate::C64;

/// Half-width of the gaussian truncation, in units of `σ`.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureFamily {
    Fourier {
        band: f64,
    },
    Indicator,
    Gaussian {
        sigma: f64,
    },
    OrthonormalDiagonal {
        modes: usize,
        /// `v(p) = 1 + weight_slope · (p − a)/(b − a)`; zero gives `v ≡ 1`.
        #[serde(default)]
        weight_slope: f64,
    },
}

impl FeatureFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FeatureFamily::Fourier { band } => band > 0.0 && band.is_finite(),
            FeatureFamily::Indicator => true,
            FeatureFamily::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            FeatureFamily::OrthonormalDiagonal {
                modes,
                weight_slope,
            } => modes >= 1 && weight_slope > -1.0 && weight_slope.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    /// Whether the family needs complex arithmetic.
    pub fn is_complex(&self) -> bool {
        matches!(self, FeatureFamily::Fourier { .. })
    }

    /// Closed-form induced kernel. The diagonal family has no pointwise form.
    pub fn closed_form(&self, p: f64, q: f64) -> Option<f64> {
        match *self {
            FeatureFamily::Fourier { band } => Some(sinc_kernel(band, p - q)),
            FeatureFamily::Indicator => Some(p.min(q)),
            FeatureFamily::Gaussian { sigma } => {
                Some(sigma * PI.sqrt() * (-(p - q).powi(2) / (4.0 * sigma * sigma)).exp())
            }
            FeatureFamily::OrthonormalDiagonal { .. } => None,
        }
    }

    /// The multiplier `v(pᵢ)` built into the diagonal family.
    pub fn construction_weights(&self, grid_e: &Grid) -> Option<Vec<f64>> {
        match *self {
            FeatureFamily::OrthonormalDiagonal { weight_slope, .. } => {
                let (a, b) = grid_e.interval();
                Some(
                    grid_e
                        .points()
                        .iter()
                        .map(|p| 1.0 + weight_slope * (p - a) / (b - a))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// A `T` grid that satisfies the family's compatibility rules. `n`
    /// defaults to the size of `grid_e` (the mode count for the diagonal
    /// family, where it is fixed).
    pub fn default_time_grid(&self, grid_e: &Grid, n: Option<usize>) -> Result<Grid> {
        self.validate()?;
        let n = n.unwrap_or(grid_e.len());
        match *self {
            FeatureFamily::Fourier { band } => Grid::uniform(-band, band, n, Rule::Midpoint),
            FeatureFamily::Indicator => {
                let (a, b) = grid_e.interval();
                Grid::uniform(a, b, n, grid_e.rule())
            }
            FeatureFamily::Gaussian { sigma } => {
                let (lo, hi) = point_span(grid_e);
                let pad = GAUSSIAN_TRUNCATION * sigma;
                Grid::uniform(lo - pad, hi + pad, n, Rule::Trapezoid)
            }
            FeatureFamily::OrthonormalDiagonal { modes, .. } => {
                Grid::uniform(0.0, 1.0, modes, Rule::Midpoint)
            }
        }
    }
}

fn point_span(grid: &Grid) -> (f64, f64) {
    let p = grid.points();
    (p[0], p[p.len() - 1])
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

/// Samples the family's `h(t, p)` on the two grids.
pub fn make_feature_map(
    family: &FeatureFamily,
    grid_t: &Grid,
    grid_e: &Grid,
) -> Result<FeatureMap> {
    family.validate()?;
    let (ta, tb) = grid_t.interval();
    let (ea, eb) = grid_e.interval();
    match *family {
        FeatureFamily::Fourier { band } => {
            if !(close(ta, -band, band) && close(tb, band, band)) {
                return Err(Error::IncompatibleGrids(format!(
                    "fourier features need T = [-{band}, {band}], got [{ta}, {tb}]"
                )));
            }
            let norm = 1.0 / (2.0 * PI).sqrt();
            FeatureMap::from_fn(grid_t, grid_e, |t, p| Complex::from_polar(norm, -t * p))
        }
        FeatureFamily::Indicator => {
            let scale = ea.abs().max(eb.abs());
            if !(close(ta, ea, scale) && close(tb, eb, scale)) {
                return Err(Error::IncompatibleGrids(format!(
                    "indicator features need T = E, got T = [{ta}, {tb}], E = [{ea}, {eb}]"
                )));
            }
            FeatureMap::from_fn(grid_t, grid_e, |t, p| {
                Complex::new(if t <= p { 1.0 } else { 0.0 }, 0.0)
            })
        }
        FeatureFamily::Gaussian { sigma } => {
            let (lo, hi) = point_span(grid_e);
            let pad = GAUSSIAN_TRUNCATION * sigma;
            let scale = lo.abs().max(hi.abs()) + pad;
            if ta > lo - pad + 1e-12 * scale || tb < hi + pad - 1e-12 * scale {
                return Err(Error::IncompatibleGrids(format!(
                    "gaussian features need T ⊇ [{}, {}], got [{ta}, {tb}]",
                    lo - pad,
                    hi + pad
                )));
            }
            let s2 = 2.0 * sigma * sigma;
            FeatureMap::from_fn(grid_t, grid_e, |t, p| {
                Complex::new((-(t - p).powi(2) / s2).exp(), 0.0)
            })
        }
        FeatureFamily::OrthonormalDiagonal { modes, .. } => {
            let n = grid_e.len();
            if modes != n || grid_t.len() != n {
                return Err(Error::IncompatibleGrids(format!(
                    "orthonormal_diagonal needs modes = |T| = |E|, got modes {modes}, |T| {}, |E| {n}",
                    grid_t.len()
                )));
            }
            let v = family
                .construction_weights(grid_e)
                .expect("diagonal family");
            let w = grid_e.weights();
            let m = grid_t.weights();
            let h = DMatrix::from_fn(n, n, |k, i| {
                let u = cosine_mode(n, k, i);
                Complex::new(u * (v[i] / w[i]).sqrt() / m[k].sqrt(), 0.0)
            });
            FeatureMap::new(grid_t, grid_e, h)
        }
    }
}

/// Entry `(k, i)` of the orthonormal DCT-II matrix of size `n`.
fn cosine_mode(n: usize, k: usize, i: usize) -> f64 {
    let nf = n as f64;
    let c = if k == 0 {
        (1.0 / nf).sqrt()
    } else {
        (2.0 / nf).sqrt()
    };
    c * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * nf)).cos()
}

/// Largest `|K_induced − K_closed|` over the grid, for families with a
/// closed form.
pub fn closed_form_error(
    family: &FeatureFamily,
    gram: &DMatrix<C64>,
    grid_e: &Grid,
) -> Option<f64> {
    let p = grid_e.points();
    let mut err = 0.0f64;
    for i in 0..p.len() {
        for j in 0..p.len() {
            let exact = family.closed_form(p[i], p[j])?;
            err = err.max((gram[(i, j)] - Complex::new(exact, 0.0)).norm());
        }
    }
    Some(err)
}
