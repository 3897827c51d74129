//! Kernel matrices `K(pᵢ, pⱼ)`, their nonnegativity check, and the spectral
//! pseudo-inverse that stands in for `K⁻¹`.
//!
//! The integral operator `(Kf)(p) = ∫ K(p,q) f(q) dq` is discretized as
//! `gram · W · f`, with `W` the diagonal of quadrature weights. It is
//! self-adjoint in the weighted product, so all spectral work is done on the
//! Hermitian form `S = W^{1/2} · gram · W^{1/2}`, which is similar to
//! `gram · W`. Eigencomponents of `S` below `cutoff_rel · λ_max` are treated
//! as the null space: solving on the remaining range is the quotient by
//! `N(K)`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Grid, GridId};
use crate::C64;

/// Relative hermitian defect above which a kernel is rejected.
pub const HERMITIAN_DEFECT_LIMIT: f64 = 1e-6;

pub const DEFAULT_CUTOFF_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Grid,
    gram: DMatrix<C64>,
    hermitian_defect: f64,
}

impl KernelMatrix {
    /// Takes ownership of raw kernel values and makes them exactly Hermitian.
    ///
    /// The defect `max |gram − gramᴴ|` is recorded before symmetrization;
    /// anything above [`HERMITIAN_DEFECT_LIMIT`] relative to `max |gram|`
    /// is not a self-adjoint kernel.
    pub fn from_gram(grid: &Grid, mut gram: DMatrix<C64>) -> Result<Self> {
        let n = grid.len();
        if gram.nrows() != n || gram.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: gram.nrows().max(gram.ncols()),
            });
        }
        if gram.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("kernel values"));
        }
        let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let a = gram[(i, j)];
                let b = gram[(j, i)].conj();
                defect = defect.max((a - b).norm());
                let m = (a + b) * 0.5;
                gram[(i, j)] = m;
                gram[(j, i)] = m.conj();
            }
        }
        let limit = HERMITIAN_DEFECT_LIMIT * scale;
        if defect > limit {
            return Err(Error::NonHermitian { defect, limit });
        }
        Ok(Self {
            grid: grid.clone(),
            gram,
            hermitian_defect: defect,
        })
    }

    /// `gram_ij = kfun(pᵢ, pⱼ)` followed by symmetrization.
    pub fn assemble(grid: &Grid, kfun: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let p = grid.points();
        let gram = DMatrix::from_fn(grid.len(), grid.len(), |i, j| kfun(p[i], p[j]));
        Self::from_gram(grid, gram)
    }

    pub fn assemble_real(grid: &Grid, kfun: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::assemble(grid, |p, q| Complex::new(kfun(p, q), 0.0))
    }

    /// The discrete delta kernel `δᵢⱼ / wⱼ`, whose operator is the identity.
    pub fn discrete_delta(grid: &Grid) -> Self {
        let n = grid.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(1.0 / grid.weights()[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        Self {
            grid: grid.clone(),
            gram,
            hermitian_defect: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.hermitian_defect
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.gram.iter().all(|z| z.im == 0.0)
    }

    /// `K(pᵢ, pⱼ)`.
    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.gram[(i, j)]
    }

    /// The kernel section `K(·, p_j)` as a function on the grid.
    pub fn section(&self, j: usize) -> Result<DiscreteFunction> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok(DiscreteFunction::from_vector(
            &self.grid,
            self.gram.column(j).into_owned(),
        ))
    }

    /// The discrete operator `gram · W`.
    pub fn operator_matrix(&self) -> DMatrix<C64> {
        let mut b = self.gram.clone();
        for (j, &w) in self.grid.weights().iter().enumerate() {
            b.column_mut(j).scale_mut(w);
        }
        b
    }

    /// `W^{1/2} · gram · W^{1/2}`, Hermitian.
    pub fn weighted_form(&self) -> DMatrix<C64> {
        let s = self.grid.sqrt_weights();
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.gram[(i, j)] * (s[i] * s[j]))
    }

    pub fn spectral(&self, cutoff_rel: f64) -> SpectralData {
        SpectralData::new(self, cutoff_rel)
    }

    /// `(Kf)(pᵢ) = Σⱼ K(pᵢ, pⱼ) wⱼ f(pⱼ)`.
    pub fn apply(&self, f: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid.check(f)?;
        Ok(DiscreteFunction::from_vector(
            &self.grid,
            self.apply_vec(&f.to_vector()),
        ))
    }

    pub(crate) fn apply_vec(&self, f: &DVector<C64>) -> DVector<C64> {
        let wf = DVector::from_iterator(
            f.len(),
            f.iter().zip(self.grid.weights()).map(|(v, &w)| v * w),
        );
        &self.gram * wf
    }
}

/// Free-function form of [`KernelMatrix::assemble`].
pub fn assemble_kernel(kfun: impl Fn(f64, f64) -> C64, grid: &Grid) -> Result<KernelMatrix> {
    KernelMatrix::assemble(grid, kfun)
}

/// Free-function form of [`KernelMatrix::apply`].
pub fn apply_operator(kernel: &KernelMatrix, f: &DiscreteFunction) -> Result<DiscreteFunction> {
    kernel.apply(f)
}

/// Kernels available by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinKernel {
    /// `min(p, q)`, the Brownian-motion covariance.
    Brownian,
    /// `sin(b(p − q)) / (π(p − q))`, the Paley–Wiener kernel of band `b`.
    Sinc { band: f64 },
    /// `exp(−(p − q)² / (2 width²))`
    Gaussian { width: f64 },
    /// `exp(−|p − q| / length)`
    Exponential { length: f64 },
    /// Constant value everywhere; rank one.
    Constant { value: f64 },
    /// `δᵢⱼ / wⱼ`, the identity operator.
    DiscreteDelta,
}

impl BuiltinKernel {
    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            BuiltinKernel::Sinc { band } => !(band > 0.0 && band.is_finite()),
            BuiltinKernel::Gaussian { width } => !(width > 0.0 && width.is_finite()),
            BuiltinKernel::Exponential { length } => !(length > 0.0 && length.is_finite()),
            BuiltinKernel::Constant { value } => !value.is_finite(),
            BuiltinKernel::Brownian | BuiltinKernel::DiscreteDelta => false,
        };
        if bad {
            return Err(Error::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }

    /// Pointwise value; `None` for the discrete delta, which has no
    /// pointwise form.
    pub fn eval(&self, p: f64, q: f64) -> Option<f64> {
        Some(match *self {
            BuiltinKernel::Brownian => p.min(q),
            BuiltinKernel::Sinc { band } => sinc_kernel(band, p - q),
            BuiltinKernel::Gaussian { width } => (-(p - q).powi(2) / (2.0 * width * width)).exp(),
            BuiltinKernel::Exponential { length } => (-(p - q).abs() / length).exp(),
            BuiltinKernel::Constant { value } => value,
            BuiltinKernel::DiscreteDelta => return None,
        })
    }

    pub fn assemble(&self, grid: &Grid) -> Result<KernelMatrix> {
        self.validate()?;
        match self {
            BuiltinKernel::DiscreteDelta => Ok(KernelMatrix::discrete_delta(grid)),
            k => KernelMatrix::assemble_real(grid, |p, q| k.eval(p, q).unwrap_or(0.0)),
        }
    }
}

/// `sin(b·x) / (π·x)`, continuous at `x = 0` with value `b/π`.
pub fn sinc_kernel(band: f64, x: f64) -> f64 {
    let bx = band * x;
    if bx.abs() < 1e-8 {
        // sin(y)/y = 1 − y²/6 + O(y⁴)
        band / std::f64::consts::PI * (1.0 - bx * bx / 6.0)
    } else {
        bx.sin() / (std::f64::consts::PI * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
}

/// Passes iff the smallest eigenvalue of `W^{1/2}·gram·W^{1/2}` is at least
/// `−tol_psd`.
pub fn validate_psd(kernel: &KernelMatrix, tol_psd: f64) -> PsdReport {
    let ev = kernel.weighted_form().symmetric_eigenvalues();
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PsdReport {
        pass: min >= -tol_psd,
        min_eigenvalue: min,
        max_eigenvalue: max,
        tolerance: tol_psd,
    }
}

/// Eigendecomposition of the weighted Hermitian form, eigenvalues sorted
/// descending, with the rank cutoff that defines the numerical range.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    cutoff: f64,
    numerical_rank: usize,
    sqrt_weights: DVector<f64>,
    grid_id: GridId,
}

impl SpectralData {
    pub fn new(kernel: &KernelMatrix, cutoff_rel: f64) -> Self {
        let (eigenvalues, eigenvectors) = hermitian_eigen(kernel.weighted_form());
        let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let cutoff = cutoff_rel * lambda_max;
        let numerical_rank = eigenvalues.iter().take_while(|&&l| l > cutoff).count();
        Self {
            eigenvalues,
            eigenvectors,
            cutoff,
            numerical_rank,
            sqrt_weights: kernel.grid().sqrt_weights(),
            grid_id: kernel.grid().id(),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn numerical_rank(&self) -> usize {
        self.numerical_rank
    }

    /// `λ_max / λ_min` over the whole spectrum; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// `λ_max / λ_r` over the retained eigenvalues only.
    pub fn effective_condition_number(&self) -> f64 {
        if self.numerical_rank == 0 {
            return f64::INFINITY;
        }
        self.eigenvalues[0] / self.eigenvalues[self.numerical_rank - 1]
    }

    /// Max deviation of `Vᴴ V` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.eigenvectors.ncols();
        let g = self.eigenvectors.adjoint() * &self.eigenvectors;
        (g - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `‖V Λ Vᴴ − S‖_F / ‖S‖_F` against the kernel's weighted form.
    pub fn reconstruction_error(&self, kernel: &KernelMatrix) -> f64 {
        let s = kernel.weighted_form();
        let mut vl = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            vl.column_mut(j).scale_mut(l);
        }
        let r = vl * self.eigenvectors.adjoint();
        let denom = s.norm();
        if denom == 0.0 {
            r.norm()
        } else {
            (r - s).norm() / denom
        }
    }

    /// Coordinates `Vᴴ W^{1/2} f` of a function in the eigenbasis.
    pub(crate) fn coordinates(&self, f: &DVector<C64>) -> DVector<C64> {
        let u = DVector::from_iterator(
            f.len(),
            f.iter().zip(self.sqrt_weights.iter()).map(|(v, &s)| v * s),
        );
        self.eigenvectors.adjoint() * u
    }

    /// Fraction of the weighted norm of `f` lying outside the numerical
    /// range, computed from its eigen-coordinates.
    pub(crate) fn range_residual_of(&self, coords: &DVector<C64>) -> f64 {
        let total: f64 = coords.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = coords
            .iter()
            .skip(self.numerical_rank)
            .map(|z| z.norm_sqr())
            .sum();
        (tail / total).sqrt()
    }

    /// Pseudo-inverse solve `x = W^{-1/2} V Λ⁺ Vᴴ W^{1/2} f`, no range check.
    pub(crate) fn pseudo_solve(&self, f: &DVector<C64>) -> DVector<C64> {
        let a = self.coordinates(f);
        let r = self.numerical_rank;
        let scaled = DVector::from_iterator(r, (0..r).map(|k| a[k] / self.eigenvalues[k]));
        let y = self.eigenvectors.columns(0, r) * scaled;
        DVector::from_iterator(
            y.len(),
            y.iter().zip(self.sqrt_weights.iter()).map(|(v, &s)| v / s),
        )
    }

    /// Solves `gram · W · x = f` on the numerical range.
    pub fn solve(&self, kernel: &KernelMatrix, f: &DiscreteFunction) -> Result<KernelSolution> {
        kernel.grid().check(f)?;
        if kernel.grid().id() != self.grid_id {
            return Err(Error::GridMismatch {
                expected: self.grid_id,
                expected_len: self.sqrt_weights.len(),
                found: kernel.grid().id(),
                found_len: kernel.len(),
            });
        }
        let fv = f.to_vector();
        let x = self.pseudo_solve(&fv);
        let residual = kernel.apply_vec(&x) - &fv;
        let w = kernel.grid().weights();
        let wnorm = |v: &DVector<C64>| {
            v.iter()
                .zip(w)
                .map(|(z, &wi)| wi * z.norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let fnorm = wnorm(&fv);
        let range_residual = if fnorm == 0.0 {
            0.0
        } else {
            wnorm(&residual) / fnorm
        };
        Ok(KernelSolution {
            solution: DiscreteFunction::from_vector(kernel.grid(), x),
            range_residual,
            numerical_rank: self.numerical_rank,
            effective_condition_number: self.effective_condition_number(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct KernelSolution {
    pub solution: DiscreteFunction,
    /// `‖gram·W·x − f‖ / ‖f‖` in the weighted norm.
    pub range_residual: f64,
    pub numerical_rank: usize,
    pub effective_condition_number: f64,
}

/// Spectral pseudo-inverse solve of `gram · W · x = f`.
///
/// Fails with [`Error::RangeViolation`] when the part of `f` the operator
/// cannot reach exceeds `range_tol` relative to `‖f‖`.
pub fn solve_kernel_system(
    kernel: &KernelMatrix,
    f: &DiscreteFunction,
    cutoff_rel: f64,
    range_tol: f64,
) -> Result<KernelSolution> {
    if !(cutoff_rel > 0.0 && cutoff_rel < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff_rel must lie in (0, 1), got {cutoff_rel}"
        )));
    }
    let sol = kernel.spectral(cutoff_rel).solve(kernel, f)?;
    if sol.range_residual > range_tol {
        return Err(Error::RangeViolation {
            residual: sol.range_residual,
            tolerance: range_tol,
        });
    }
    Ok(sol)
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
pub(crate) fn hermitian_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rule;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        Complex::new(re, 0.0)
    }

    #[test]
    fn constant_kernel_is_all_ones() {
        let g = Grid::uniform(0.0, 1.0, 3, Rule::Trapezoid).unwrap();
        let k = assemble_kernel(|_, _| c(1.0), &g).unwrap();
        assert!(k.gram().iter().all(|z| *z == c(1.0)));
    }

    #[test]
    fn brownian_values() {
        let g =
            Grid::from_parts(vec![0.25, 0.5, 0.75], vec![1.0 / 3.0; 3], Rule::Midpoint).unwrap();
        let k = BuiltinKernel::Brownian.assemble(&g).unwrap();
        let expect = [[0.25, 0.25, 0.25], [0.25, 0.5, 0.5], [0.25, 0.5, 0.75]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.value(i, j), c(expect[i][j]));
            }
        }
    }

    #[test]
    fn symmetric_function_has_no_defect() {
        let g = Grid::uniform(-1.0, 2.0, 17, Rule::Trapezoid).unwrap();
        let k = KernelMatrix::assemble_real(&g, |p, q| (-(p - q).powi(2)).exp()).unwrap();
        assert_eq!(k.hermitian_defect(), 0.0);
    }

    #[test]
    fn non_self_adjoint_kernel_is_rejected() {
        let g = Grid::uniform(0.0, 1.0, 5, Rule::Trapezoid).unwrap();
        let err = KernelMatrix::assemble_real(&g, |p, q| p - 2.0 * q).unwrap_err();
        assert!(matches!(err, Error::NonHermitian { .. }));
        let err = KernelMatrix::assemble_real(&g, |p, _| 1.0 / (p - 0.5)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized() {
        let g = Grid::uniform(0.0, 1.0, 5, Rule::Trapezoid).unwrap();
        let k = KernelMatrix::assemble_real(&g, |p, q| p.min(q) + 1e-12 * p).unwrap();
        assert!(k.hermitian_defect() > 0.0);
        assert_eq!(k.gram(), &k.gram().adjoint());
    }

    #[test]
    fn psd_examples() {
        let g = Grid::uniform(0.0, 1.0, 9, Rule::Trapezoid).unwrap();
        let delta = KernelMatrix::discrete_delta(&g);
        let r = validate_psd(&delta, 1e-12);
        assert!(r.pass && r.min_eigenvalue > 0.0);

        let g3 = Grid::uniform(0.0, 1.0, 3, Rule::Midpoint).unwrap();
        let neg = BuiltinKernel::Constant { value: -1.0 }
            .assemble(&g3)
            .unwrap();
        let r = validate_psd(&neg, 1e-12);
        assert!(!r.pass);
        let mean_w = g3.total_weight() / 3.0;
        assert_abs_diff_eq!(r.min_eigenvalue, -3.0 * mean_w, epsilon = 1e-12);
    }

    #[test]
    fn brownian_is_psd() {
        // eigenvalues of the Brownian operator on [0,1] are 1/((k-1/2)²π²) > 0
        let g = Grid::uniform(0.0, 1.0, 50, Rule::Trapezoid).unwrap();
        let k = BuiltinKernel::Brownian.assemble(&g).unwrap();
        let r = validate_psd(&k, 1e-12);
        assert!(r.pass, "{r:?}");
        let top = 1.0 / (0.25 * std::f64::consts::PI.powi(2));
        assert_abs_diff_eq!(r.max_eigenvalue, top, epsilon = 1e-2);
    }

    #[test]
    fn apply_examples() {
        let g = Grid::uniform(0.0, 1.0, 201, Rule::Trapezoid).unwrap();
        let f = DiscreteFunction::from_real_fn(&g, |p| (3.0 * p).sin()).unwrap();
        let id = KernelMatrix::discrete_delta(&g);
        let kf = id.apply(&f).unwrap();
        for (a, b) in kf.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
        }

        let one = DiscreteFunction::from_real_fn(&g, |_| 1.0).unwrap();
        let k1 = BuiltinKernel::Constant { value: 1.0 }.assemble(&g).unwrap();
        for v in k1.apply(&one).unwrap().values() {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
        }

        // ∫₀¹ min(p,q) dq = p − p²/2
        let kb = BuiltinKernel::Brownian.assemble(&g).unwrap();
        let out = kb.apply(&one).unwrap();
        for (v, p) in out.values().iter().zip(g.points()) {
            assert_abs_diff_eq!(v.re, p - p * p / 2.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn solve_identity_operator() {
        let g = Grid::uniform(0.0, 1.0, 20, Rule::Midpoint).unwrap();
        let f = DiscreteFunction::from_real_fn(&g, |p| p.cos()).unwrap();
        let k = KernelMatrix::discrete_delta(&g);
        let sol = solve_kernel_system(&k, &f, DEFAULT_CUTOFF_REL, 1e-6).unwrap();
        for (a, b) in sol.solution.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-13);
        }
        assert_eq!(sol.numerical_rank, 20);
    }

    #[test]
    fn solve_rank_one() {
        let g = Grid::uniform(0.0, 1.0, 41, Rule::Trapezoid).unwrap();
        let k = BuiltinKernel::Constant { value: 1.0 }.assemble(&g).unwrap();
        let f = DiscreteFunction::from_real_fn(&g, |_| 2.5).unwrap();
        let sol = solve_kernel_system(&k, &f, DEFAULT_CUTOFF_REL, 1e-6).unwrap();
        assert_eq!(sol.numerical_rank, 1);
        assert!(sol.range_residual < 1e-12);
        // minimal weighted-norm solution of (∫ x) · 1 = 2.5 is x ≡ 2.5
        for v in sol.solution.values() {
            assert_abs_diff_eq!(v.re, 2.5, epsilon = 1e-12);
        }

        let centered = DiscreteFunction::from_real_fn(&g, |p| p - 0.5).unwrap();
        match solve_kernel_system(&k, &centered, DEFAULT_CUTOFF_REL, 1e-6) {
            Err(Error::RangeViolation { residual, .. }) => assert!(residual > 0.99),
            other => panic!("expected range violation, got {other:?}"),
        }
    }

    #[test]
    fn spectral_data_is_consistent() {
        let g = Grid::uniform(0.0, 1.0, 60, Rule::Midpoint).unwrap();
        let k = BuiltinKernel::Exponential { length: 0.3 }
            .assemble(&g)
            .unwrap();
        let s = k.spectral(DEFAULT_CUTOFF_REL);
        assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(s.orthonormality_defect() < 1e-12);
        assert!(s.reconstruction_error(&k) < 1e-10);
        assert_eq!(s.numerical_rank(), 60);
        assert!(s.condition_number().is_finite());
    }

    #[test]
    fn round_trip_on_range() {
        let g = Grid::uniform(0.0, 1.0, 80, Rule::Midpoint).unwrap();
        let k = BuiltinKernel::Brownian.assemble(&g).unwrap();
        let s = k.spectral(DEFAULT_CUTOFF_REL);
        assert!(s.condition_number() < 1e8);
        let x0 = DiscreteFunction::from_real_fn(&g, |p| (7.0 * p).sin() + p * p).unwrap();
        let f = k.apply(&x0).unwrap();
        let back = k.apply(&s.solve(&k, &f).unwrap().solution).unwrap();
        let err = g.norm(&back.sub(&f).unwrap()).unwrap() / g.norm(&f).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn section_index_checked() {
        let g = Grid::uniform(0.0, 1.0, 4, Rule::Midpoint).unwrap();
        let k = BuiltinKernel::Brownian.assemble(&g).unwrap();
        assert!(matches!(k.section(4), Err(Error::IndexOutOfRange { .. })));
    }
}
