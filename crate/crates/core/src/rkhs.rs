//! The RKHS inner product `[f, g] = (K⁻¹f, g)` and the checks that follow
//! from it: the reproducing identity, the point-evaluation bound, and
//! projections onto finite spans of kernel sections.
//!
//! Elements are stored by their whitened eigen-coordinates
//! `s_k = (Vᴴ W^{1/2} f)_k / sqrt(λ_k)` over the retained spectrum, so that
//! `[f, g] = Σ_k s_k(f) conj(s_k(g))`. This is algebraically the same as
//! solving `Kx = f` and taking `(x, g)` in `L²`, but it keeps the product
//! Hermitian and nonnegative in floating point.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Grid};
use crate::kernel::{hermitian_eigen, KernelMatrix, SpectralData};
use crate::C64;

/// Default relative range residual allowed for inner-product arguments.
pub const DEFAULT_RANGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RkhsSpace {
    kernel: KernelMatrix,
    spectral: SpectralData,
    cutoff_rel: f64,
    range_tol: f64,
    /// Whitened coordinates of every kernel section, one column per grid point.
    sections: DMatrix<C64>,
}

/// A function together with its whitened coordinates in a particular space.
#[derive(Debug, Clone)]
pub struct RkhsElement {
    function: DiscreteFunction,
    whitened: DVector<C64>,
    range_residual: f64,
}

impl RkhsElement {
    pub fn function(&self) -> &DiscreteFunction {
        &self.function
    }

    pub fn range_residual(&self) -> f64 {
        self.range_residual
    }

    /// `‖f‖_{H_K}`
    pub fn norm(&self) -> f64 {
        self.whitened.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEvalBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionProjection {
    pub coefficients: Vec<C64>,
    pub residual_norm: f64,
    /// Set when the section Gram submatrix was numerically singular and a
    /// reduced-rank solve was used.
    pub reduced_rank: bool,
}

impl RkhsSpace {
    pub fn new(kernel: KernelMatrix, cutoff_rel: f64, range_tol: f64) -> Result<Self> {
        if !(cutoff_rel > 0.0 && cutoff_rel < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff_rel must lie in (0, 1), got {cutoff_rel}"
            )));
        }
        if range_tol.is_nan() || range_tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "range tolerance must be positive, got {range_tol}"
            )));
        }
        let spectral = kernel.spectral(cutoff_rel);
        let n = kernel.len();
        let mut sections = DMatrix::zeros(spectral.numerical_rank(), n);
        for q in 0..n {
            let col = spectral.coordinates(&kernel.gram().column(q).into_owned());
            sections.set_column(q, &whiten(&spectral, &col));
        }
        Ok(Self {
            kernel,
            spectral,
            cutoff_rel,
            range_tol,
            sections,
        })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn cutoff_rel(&self) -> f64 {
        self.cutoff_rel
    }

    pub fn range_tol(&self) -> f64 {
        self.range_tol
    }

    /// Relative reconstruction error of the stored eigendecomposition.
    pub fn spectral_consistency(&self) -> f64 {
        self.spectral.reconstruction_error(&self.kernel)
    }

    /// Embeds `f`, failing if it is not in the numerical range of `K`.
    pub fn element(&self, f: &DiscreteFunction) -> Result<RkhsElement> {
        let e = self.element_unchecked(f)?;
        if e.range_residual > self.range_tol {
            return Err(Error::RangeViolation {
                residual: e.range_residual,
                tolerance: self.range_tol,
            });
        }
        Ok(e)
    }

    /// Embeds `f` without the range check. Components outside the numerical
    /// range are dropped.
    pub fn element_unchecked(&self, f: &DiscreteFunction) -> Result<RkhsElement> {
        self.grid().check(f)?;
        let coords = self.spectral.coordinates(&f.to_vector());
        Ok(RkhsElement {
            function: f.clone(),
            whitened: whiten(&self.spectral, &coords),
            range_residual: self.spectral.range_residual_of(&coords),
        })
    }

    /// The kernel section `K(·, p_q)` as an element.
    pub fn section(&self, q: usize) -> Result<RkhsElement> {
        let function = self.kernel.section(q)?;
        let coords = self.spectral.coordinates(&function.to_vector());
        Ok(RkhsElement {
            function,
            whitened: self.sections.column(q).into_owned(),
            range_residual: self.spectral.range_residual_of(&coords),
        })
    }

    /// `[f, g]` for embedded elements.
    pub fn inner(&self, f: &RkhsElement, g: &RkhsElement) -> C64 {
        f.whitened
            .iter()
            .zip(g.whitened.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// `[f, g] = (K⁻¹f, g)_{L²}`.
    pub fn rkhs_inner(&self, f: &DiscreteFunction, g: &DiscreteFunction) -> Result<C64> {
        Ok(self.inner(&self.element(f)?, &self.element(g)?))
    }

    pub fn norm(&self, f: &DiscreteFunction) -> Result<f64> {
        Ok(self.element(f)?.norm())
    }

    /// `[f, K(·, p_q)]` for every grid index at once.
    pub fn evaluate_via_sections(&self, f: &RkhsElement) -> DVector<C64> {
        self.sections.adjoint() * &f.whitened
    }

    /// `|[f, K(·,q)] − f(q)| / (1 + |f(q)|)`.
    pub fn check_reproducing(&self, f: &DiscreteFunction, q: usize) -> Result<f64> {
        self.check_index(q)?;
        let e = self.element(f)?;
        let via: C64 = self
            .sections
            .column(q)
            .iter()
            .zip(e.whitened.iter())
            .map(|(s, a)| a * s.conj())
            .sum();
        let fq = f.values()[q];
        Ok((via - fq).norm() / (1.0 + fq.norm()))
    }

    /// Reproducing residuals at every grid index.
    pub fn reproducing_residuals(&self, f: &RkhsElement) -> Vec<f64> {
        self.evaluate_via_sections(f)
            .iter()
            .zip(f.function.values())
            .map(|(via, fq)| (via - fq).norm() / (1.0 + fq.norm()))
            .collect()
    }

    /// `|f(q)| ≤ ‖f‖ · sqrt(K(q,q))`.
    pub fn point_eval_bound(&self, f: &DiscreteFunction, q: usize) -> Result<PointEvalBound> {
        self.check_index(q)?;
        let e = self.element(f)?;
        Ok(self.point_eval_bound_of(&e, q))
    }

    pub fn point_eval_bound_of(&self, f: &RkhsElement, q: usize) -> PointEvalBound {
        let lhs = f.function.values()[q].norm();
        let rhs = f.norm() * self.kernel.value(q, q).re.max(0.0).sqrt();
        PointEvalBound {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-10),
        }
    }

    /// Best approximation of `f` in `span{K(·, p_i) : i ∈ indices}` in the
    /// `H_K` norm. The normal equations reduce to interpolation:
    /// `G_sub X = f(sub)`.
    pub fn project_onto_sections(
        &self,
        indices: &[usize],
        f: &DiscreteFunction,
    ) -> Result<SectionProjection> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("index set is empty".into()));
        }
        for &i in indices {
            self.check_index(i)?;
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("index set has duplicates".into()));
        }
        self.element(f)?;

        let m = indices.len();
        let sub = DMatrix::from_fn(m, m, |r, c| self.kernel.value(indices[r], indices[c]));
        let rhs = DVector::from_iterator(m, indices.iter().map(|&i| f.values()[i]));
        let (values, vectors) = hermitian_eigen(sub);
        let cutoff = self.cutoff_rel * values[0].max(0.0);
        let rank = values.iter().take_while(|&&l| l > cutoff).count();
        let a = vectors.adjoint() * rhs;
        let scaled = DVector::from_iterator(rank, (0..rank).map(|k| a[k] / values[k]));
        let x = vectors.columns(0, rank) * scaled;

        let mut approx = DVector::<C64>::zeros(self.kernel.len());
        for (j, &i) in indices.iter().enumerate() {
            approx.axpy(x[j], &self.kernel.gram().column(i), Complex::new(1.0, 0.0));
        }
        let residual = f.sub(&DiscreteFunction::from_vector(self.grid(), approx))?;
        let residual_norm = self.element_unchecked(&residual)?.norm();
        Ok(SectionProjection {
            coefficients: x.iter().copied().collect(),
            residual_norm,
            reduced_rank: rank < m,
        })
    }

    fn check_index(&self, q: usize) -> Result<()> {
        if q >= self.kernel.len() {
            return Err(Error::IndexOutOfRange {
                index: q,
                len: self.kernel.len(),
            });
        }
        Ok(())
    }
}

fn whiten(spectral: &SpectralData, coords: &DVector<C64>) -> DVector<C64> {
    let r = spectral.numerical_rank();
    let ev = spectral.eigenvalues();
    DVector::from_iterator(r, (0..r).map(|k| coords[k] / ev[k].sqrt()))
}

/// Free-function form of [`RkhsSpace::rkhs_inner`].
pub fn rkhs_inner(space: &RkhsSpace, f: &DiscreteFunction, g: &DiscreteFunction) -> Result<C64> {
    space.rkhs_inner(f, g)
}

/// Free-function form of [`RkhsSpace::check_reproducing`].
pub fn check_reproducing(space: &RkhsSpace, f: &DiscreteFunction, q: usize) -> Result<f64> {
    space.check_reproducing(f, q)
}

/// Free-function form of [`RkhsSpace::point_eval_bound`].
pub fn point_eval_bound(
    space: &RkhsSpace,
    f: &DiscreteFunction,
    q: usize,
) -> Result<PointEvalBound> {
    space.point_eval_bound(f, q)
}

/// Free-function form of [`RkhsSpace::project_onto_sections`].
pub fn project_onto_sections(
    space: &RkhsSpace,
    indices: &[usize],
    f: &DiscreteFunction,
) -> Result<SectionProjection> {
    space.project_onto_sections(indices, f)
}
