//! Reproducing kernel Hilbert spaces on discretized intervals.
//!
//! The crate turns the continuous objects of RKHS theory into dense
//! matrices over one-dimensional quadrature grids and checks their
//! identities numerically:
//!
//! | module | contents |
//! |--------|----------|
//! | [`grid`] | quadrature grids, sampled functions, the weighted `L²` product |
//! | [`kernel`] | kernel matrices, nonnegativity, spectral pseudo-inverse |
//! | [`rkhs`] | the inner product `[f, g] = (K⁻¹f, g)` and the reproducing identity |
//! | [`transform`] | `LF = ∫ conj(h(t,p)) F(t) dm(t)`, its adjoints, `K = LL*`, inversion |
//! | [`features`] | feature-map families with closed-form induced kernels |
//! | [`analysis`] | detecting weighted-`L²` kernels and the unitary inversion case |
//! | [`io`] | CSV import and export |
//!
//! ```
//! use rkhslab::grid::{Grid, Rule, DiscreteFunction};
//! use rkhslab::kernel::BuiltinKernel;
//! use rkhslab::rkhs::RkhsSpace;
//!
//! let grid = Grid::uniform(0.0, 1.0, 101, Rule::Trapezoid).unwrap();
//! let kernel = BuiltinKernel::Brownian.assemble(&grid).unwrap();
//! let space = RkhsSpace::new(kernel, 1e-12, 1e-6).unwrap();
//!
//! // K(·, 1) = p has squared norm K(1, 1) = 1
//! let f = DiscreteFunction::from_real_fn(&grid, |p| p).unwrap();
//! assert!((space.rkhs_inner(&f, &f).unwrap().re - 1.0).abs() < 1e-9);
//! ```

pub mod analysis;
pub mod error;
pub mod features;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod random;
pub mod rkhs;
pub mod transform;

pub use error::{Error, Result};

/// Complex double.
pub type C64 = nalgebra::Complex<f64>;
