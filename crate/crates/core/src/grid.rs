//! One-dimensional quadrature grids and sampled functions on them.
//!
//! Every integral over the domain `E` (or the parameter set `T` with its
//! measure `dm`) is replaced by a weighted sum over grid points. A measure
//! with a density is realized by multiplying the quadrature weights by the
//! density sampled at the nodes.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Identifies a grid by the bit patterns of its nodes and weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GridId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Trapezoid,
    Midpoint,
}

/// Named positive densities for `dm(t) = density(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    Constant {
        value: f64,
    },
    /// `intercept + slope * t`
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// `scale * exp(rate * t)`
    Exponential {
        scale: f64,
        rate: f64,
    },
}

impl Density {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Linear { intercept, slope } => intercept + slope * t,
            Density::Exponential { scale, rate } => scale * (rate * t).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: f64,
    upper: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    rule: Rule,
    id: GridId,
}

impl Grid {
    /// Uniform grid on `[lower, upper]` with Lebesgue weights.
    pub fn uniform(lower: f64, upper: f64, n: usize, rule: Rule) -> Result<Self> {
        make_uniform_grid(lower, upper, n, rule, None::<fn(f64) -> f64>)
    }

    /// Uniform grid whose weights carry a named density.
    pub fn with_density(
        lower: f64,
        upper: f64,
        n: usize,
        rule: Rule,
        density: Density,
    ) -> Result<Self> {
        make_uniform_grid(lower, upper, n, rule, Some(|t| density.eval(t)))
    }

    /// Builds a grid from explicit nodes and weights, e.g. for custom
    /// quadrature rules read from disk.
    pub fn from_parts(points: Vec<f64>, weights: Vec<f64>, rule: Rule) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if points.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid"));
        }
        if let Some(index) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedGrid { index: index + 1 });
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| **w <= 0.0) {
            return Err(Error::NonPositiveDensity {
                point: points[i],
                value: w,
            });
        }
        let id = grid_id(&points, &weights);
        Ok(Self {
            lower: points[0],
            upper: points[points.len() - 1],
            points,
            weights,
            rule,
            id,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn id(&self) -> GridId {
        self.id
    }

    /// The interval the grid discretizes.
    pub fn interval(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn sqrt_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.weights.iter().map(|w| w.sqrt()))
    }

    pub(crate) fn check(&self, f: &DiscreteFunction) -> Result<()> {
        if f.grid_id != self.id || f.values.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.id,
                expected_len: self.len(),
                found: f.grid_id,
                found_len: f.values.len(),
            });
        }
        Ok(())
    }

    /// Weighted L² norm `sqrt(Σ wᵢ |fᵢ|²)`.
    pub fn norm(&self, f: &DiscreteFunction) -> Result<f64> {
        Ok(inner_product_l2(f, f, self)?.re.max(0.0).sqrt())
    }
}

/// Composite quadrature on `[a, b]` with `n` nodes. When `density` is given
/// the weights are multiplied by it pointwise.
///
/// A one-point trapezoid rule degenerates to the one-point midpoint rule.
pub fn make_uniform_grid<D>(
    a: f64,
    b: f64,
    n: usize,
    rule: Rule,
    density: Option<D>,
) -> Result<Grid>
where
    D: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidInterval { lower: a, upper: b });
    }
    if n == 0 {
        return Err(Error::EmptyGrid);
    }
    let len = b - a;
    let (points, mut weights): (Vec<f64>, Vec<f64>) = match rule {
        Rule::Trapezoid if n > 1 => {
            let h = len / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let p = if i == n - 1 { b } else { a + i as f64 * h };
                    let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                    (p, w)
                })
                .unzip()
        }
        _ => {
            let h = len / n as f64;
            (0..n).map(|i| (a + (i as f64 + 0.5) * h, h)).unzip()
        }
    };
    if let Some(index) = points.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::UnorderedGrid { index: index + 1 });
    }
    if let Some(density) = density {
        for (p, w) in points.iter().zip(weights.iter_mut()) {
            let d = density(*p);
            if d.is_nan() || d <= 0.0 || d.is_infinite() {
                return Err(Error::NonPositiveDensity {
                    point: *p,
                    value: d,
                });
            }
            *w *= d;
        }
    }
    let id = grid_id(&points, &weights);
    Ok(Grid {
        lower: a,
        upper: b,
        points,
        weights,
        rule,
        id,
    })
}

fn grid_id(points: &[f64], weights: &[f64]) -> GridId {
    let mut hasher = DefaultHasher::new();
    points.len().hash(&mut hasher);
    for v in points.iter().chain(weights) {
        v.to_bits().hash(&mut hasher);
    }
    GridId(hasher.finish())
}

/// Complex samples of a function on a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    values: Vec<C64>,
    grid_id: GridId,
}

impl DiscreteFunction {
    pub fn new(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite("function samples"));
        }
        Ok(Self {
            values,
            grid_id: grid.id(),
        })
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(grid, grid.points().iter().map(|&p| f(p)).collect())
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |p| Complex::new(f(p), 0.0))
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![Complex::new(0.0, 0.0); grid.len()],
            grid_id: grid.id(),
        }
    }

    /// Wraps a vector already known to be finite and aligned to `grid`.
    pub(crate) fn from_vector(grid: &Grid, v: DVector<C64>) -> Self {
        debug_assert_eq!(v.len(), grid.len());
        Self {
            values: v.data.into(),
            grid_id: grid.id(),
        }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn grid_id(&self) -> GridId {
        self.grid_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub(crate) fn to_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.values)
    }

    /// `self - other`, both on the same grid.
    pub fn sub(&self, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        if self.grid_id != other.grid_id || self.len() != other.len() {
            return Err(Error::GridMismatch {
                expected: self.grid_id,
                expected_len: self.len(),
                found: other.grid_id,
                found_len: other.len(),
            });
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            grid_id: self.grid_id,
        })
    }

    pub fn scale(&self, c: C64) -> DiscreteFunction {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            grid_id: self.grid_id,
        }
    }
}

/// `Σᵢ wᵢ fᵢ conj(gᵢ)`: linear in `f`, conjugate-linear in `g`.
///
/// Swapping the arguments yields the exact complex conjugate.
pub fn inner_product_l2(f: &DiscreteFunction, g: &DiscreteFunction, grid: &Grid) -> Result<C64> {
    grid.check(f)?;
    grid.check(g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(grid.weights())
        .map(|((a, b), &w)| (a * b.conj()) * w)
        .sum())
}
