//! The transform `(LF)(p) = ∫_T conj(h(t,p)) F(t) dm(t)` from `H₀ = L²(T, dm)`
//! into functions on `E`, its `L²` adjoint `(L*g)(t) = ∫_E h(t,p) g(p) dp`,
//! and the kernel it induces, `K(p,q) = ∫_T conj(h(t,p)) h(t,q) dm(t)`.
//!
//! With `H` the `M × N` matrix `h(t_k, p_i)`, `m` the weights on `T` and `w`
//! the weights on `E`:
//!
//! * `L  = Hᴴ · diag(m)` (`N × M`)
//! * `L* = H · diag(w)` (`M × N`)
//! * `gram = Hᴴ · diag(m) · H`, so the discrete kernel operator `gram · W`
//!   equals `L · L*`.
//!
//! Two adjoints are kept apart: the `L²` adjoint `L*` above, and the RKHS
//! adjoint `L* K⁻¹`, which is the left inverse of `L` viewed as a map into
//! `H_K`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Grid};
use crate::kernel::{KernelMatrix, SpectralData};
use crate::random::TrialRng;
use crate::rkhs::{RkhsSpace, DEFAULT_RANGE_TOL};
use crate::C64;

#[derive(Debug, Clone)]
pub struct FeatureMap {
    grid_t: Grid,
    grid_e: Grid,
    h: DMatrix<C64>,
}

impl FeatureMap {
    /// `h` is `M × N` with `h[(k, i)] = h(t_k, p_i)`.
    pub fn new(grid_t: &Grid, grid_e: &Grid, h: DMatrix<C64>) -> Result<Self> {
        if h.nrows() != grid_t.len() {
            return Err(Error::LengthMismatch {
                expected: grid_t.len(),
                found: h.nrows(),
            });
        }
        if h.ncols() != grid_e.len() {
            return Err(Error::LengthMismatch {
                expected: grid_e.len(),
                found: h.ncols(),
            });
        }
        if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            grid_t: grid_t.clone(),
            grid_e: grid_e.clone(),
            h,
        })
    }

    pub fn from_fn(grid_t: &Grid, grid_e: &Grid, h: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let t = grid_t.points();
        let p = grid_e.points();
        Self::new(
            grid_t,
            grid_e,
            DMatrix::from_fn(t.len(), p.len(), |k, i| h(t[k], p[i])),
        )
    }

    pub fn grid_t(&self) -> &Grid {
        &self.grid_t
    }

    pub fn grid_e(&self) -> &Grid {
        &self.grid_e
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.h
    }

    /// True when `h` is real, so conjugation is a no-op.
    pub fn is_real(&self) -> bool {
        self.h.iter().all(|z| z.im == 0.0)
    }

    /// Multiplies `h` by a real constant.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid_t: self.grid_t.clone(),
            grid_e: self.grid_e.clone(),
            h: self.h.scale(c),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformOperator {
    feature: FeatureMap,
    l_mat: DMatrix<C64>,
    ladj_mat: DMatrix<C64>,
    induced: KernelMatrix,
}

pub fn build_transform(feature: FeatureMap) -> Result<TransformOperator> {
    TransformOperator::new(feature)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub numerical_rank: usize,
    pub deficiency: usize,
    pub tol_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSeries {
    pub left_inverse: Vec<f64>,
    pub isometry: Vec<f64>,
    pub norm: Vec<f64>,
}

/// Residuals of the transform identities over seeded random trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub trials: usize,
    pub cutoff_rel: f64,
    /// `‖gram·W − L·L*‖_F / ‖gram·W‖_F`
    pub factorization_residual: f64,
    /// `max ‖L* K⁻¹ L F − F‖₀ / ‖F‖₀`
    pub left_inverse_residual: f64,
    /// `max |[LF, LG] − (F, G)₀| / (‖F‖₀ ‖G‖₀)`
    pub isometry_defect: f64,
    /// `max |‖LF‖_{H_K} − ‖F‖₀| / ‖F‖₀`
    pub norm_defect: f64,
    pub injectivity: InjectivityReport,
    pub numerical_rank: usize,
    pub condition_number: f64,
    pub effective_condition_number: f64,
    pub flags: Vec<String>,
    pub series: TrialSeries,
}

#[derive(Debug, Clone)]
pub struct Inversion {
    /// Recovered `F` on the `T` grid.
    pub solution: DiscreteFunction,
    /// `‖L F − f‖ / ‖f‖`
    pub range_residual: f64,
}

impl TransformOperator {
    pub fn new(feature: FeatureMap) -> Result<Self> {
        let h = &feature.h;
        let mut l_mat = h.adjoint();
        for (k, &m) in feature.grid_t.weights().iter().enumerate() {
            l_mat.column_mut(k).scale_mut(m);
        }
        let mut ladj_mat = h.clone();
        for (i, &w) in feature.grid_e.weights().iter().enumerate() {
            ladj_mat.column_mut(i).scale_mut(w);
        }
        let gram = accurate_product(&l_mat, h);
        let induced = KernelMatrix::from_gram(&feature.grid_e, gram)?;
        Ok(Self {
            feature,
            l_mat,
            ladj_mat,
            induced,
        })
    }

    pub fn feature(&self) -> &FeatureMap {
        &self.feature
    }

    pub fn grid_t(&self) -> &Grid {
        &self.feature.grid_t
    }

    pub fn grid_e(&self) -> &Grid {
        &self.feature.grid_e
    }

    /// `N × M`
    pub fn l_mat(&self) -> &DMatrix<C64> {
        &self.l_mat
    }

    /// `M × N`
    pub fn ladj_mat(&self) -> &DMatrix<C64> {
        &self.ladj_mat
    }

    pub fn induced(&self) -> &KernelMatrix {
        &self.induced
    }

    pub fn is_real(&self) -> bool {
        self.feature.is_real()
    }

    /// `f = L F`
    pub fn apply_forward(&self, f: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid_t().check(f)?;
        Ok(DiscreteFunction::from_vector(
            self.grid_e(),
            &self.l_mat * f.to_vector(),
        ))
    }

    /// `L* g`, the adjoint with respect to the two weighted `L²` products.
    pub fn apply_adjoint(&self, g: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.grid_e().check(g)?;
        Ok(DiscreteFunction::from_vector(
            self.grid_t(),
            &self.ladj_mat * g.to_vector(),
        ))
    }

    /// `L* K⁻¹ g` with `K⁻¹` the spectral pseudo-inverse; no range check.
    pub fn apply_rkhs_adjoint(
        &self,
        g: &DiscreteFunction,
        cutoff_rel: f64,
    ) -> Result<DiscreteFunction> {
        self.grid_e().check(g)?;
        let spectral = self.induced.spectral(cutoff_rel);
        Ok(self.rkhs_adjoint_with(&spectral, &g.to_vector()))
    }

    fn rkhs_adjoint_with(&self, spectral: &SpectralData, g: &DVector<C64>) -> DiscreteFunction {
        let x = spectral.pseudo_solve(g);
        DiscreteFunction::from_vector(self.grid_t(), &self.ladj_mat * x)
    }

    /// Rank of `diag(m)^{1/2} · H · diag(w)^{1/2}` at relative threshold
    /// `tol_rank`; `L` is injective iff that rank is `M`.
    pub fn check_injectivity(&self, tol_rank: f64) -> InjectivityReport {
        let sm = self.grid_t().sqrt_weights();
        let sw = self.grid_e().sqrt_weights();
        let h = &self.feature.h;
        let a = DMatrix::from_fn(h.nrows(), h.ncols(), |k, i| h[(k, i)] * (sm[k] * sw[i]));
        let sv = a.singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let numerical_rank = sv.iter().filter(|&&s| s > tol_rank * smax).count();
        let m = self.grid_t().len();
        InjectivityReport {
            injective: numerical_rank == m,
            numerical_rank,
            deficiency: m - numerical_rank,
            tol_rank,
        }
    }

    /// `‖gram·W − L·L*‖_F / ‖gram·W‖_F`
    pub fn factorization_residual(&self) -> f64 {
        let b = self.induced.operator_matrix();
        let denom = b.norm();
        let diff = (&b - accurate_product(&self.l_mat, &self.ladj_mat)).norm();
        if denom == 0.0 {
            diff
        } else {
            diff / denom
        }
    }

    /// Runs the factorization, left-inverse, isometry and norm checks over
    /// `trials` seeded random inputs.
    pub fn verify_identities(
        &self,
        cutoff_rel: f64,
        trials: usize,
        seed: u64,
    ) -> Result<IdentityReport> {
        if trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let space = RkhsSpace::new(self.induced.clone(), cutoff_rel, DEFAULT_RANGE_TOL)?;
        let spectral = space.spectral();
        let injectivity = self.check_injectivity(cutoff_rel.sqrt());
        let mut flags = Vec::new();
        if !injectivity.injective {
            flags.push(format!(
                "not injective: rank {} of {}",
                injectivity.numerical_rank,
                self.grid_t().len()
            ));
        }

        let grid_t = self.grid_t();
        let real = self.is_real();
        let mut rng = TrialRng::new(seed);
        let mut series = TrialSeries {
            left_inverse: Vec::with_capacity(trials),
            isometry: Vec::with_capacity(trials),
            norm: Vec::with_capacity(trials),
        };
        for _ in 0..trials {
            let f_t = rng.function(grid_t, real);
            let g_t = rng.function(grid_t, real);
            let nf = grid_t.norm(&f_t)?;
            let ng = grid_t.norm(&g_t)?;
            let lf = self.apply_forward(&f_t)?;
            let lg = self.apply_forward(&g_t)?;

            let back = self.rkhs_adjoint_with(spectral, &lf.to_vector());
            series
                .left_inverse
                .push(grid_t.norm(&back.sub(&f_t)?)? / nf);

            let ef = space.element_unchecked(&lf)?;
            let eg = space.element_unchecked(&lg)?;
            let hk = space.inner(&ef, &eg);
            let h0 = crate::grid::inner_product_l2(&f_t, &g_t, grid_t)?;
            series.isometry.push((hk - h0).norm() / (nf * ng));
            series.norm.push((ef.norm() - nf).abs() / nf);
        }
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        Ok(IdentityReport {
            seed,
            trials,
            cutoff_rel,
            factorization_residual: self.factorization_residual(),
            left_inverse_residual: max(&series.left_inverse),
            isometry_defect: max(&series.isometry),
            norm_defect: max(&series.norm),
            injectivity,
            numerical_rank: spectral.numerical_rank(),
            condition_number: spectral.condition_number(),
            effective_condition_number: spectral.effective_condition_number(),
            flags,
            series,
        })
    }

    /// Recovers `F` from `f = LF` as `F = L* K⁻¹ f`.
    pub fn invert(
        &self,
        f: &DiscreteFunction,
        cutoff_rel: f64,
        range_tol: f64,
    ) -> Result<Inversion> {
        self.grid_e().check(f)?;
        let inj = self.check_injectivity(cutoff_rel.sqrt());
        if !inj.injective {
            return Err(Error::NotInjective {
                rank: inj.numerical_rank,
                required: self.grid_t().len(),
            });
        }
        let spectral = self.induced.spectral(cutoff_rel);
        let solution = self.rkhs_adjoint_with(&spectral, &f.to_vector());
        let grid_e = self.grid_e();
        let fnorm = grid_e.norm(f)?;
        let range_residual = if fnorm == 0.0 {
            0.0
        } else {
            grid_e.norm(&self.apply_forward(&solution)?.sub(f)?)? / fnorm
        };
        if range_residual > range_tol {
            return Err(Error::RangeViolation {
                residual: range_residual,
                tolerance: range_tol,
            });
        }
        Ok(Inversion {
            solution,
            range_residual,
        })
    }
}

/// Running sum with Neumaier compensation.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `a · b` with compensated summation over the inner index. The induced
/// gram and the `L · L*` product then agree to a few ulps per entry even
/// when the inner sums cancel heavily, as they do for oscillatory features.
fn accurate_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let at = a.transpose();
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        let (mut re, mut im) = (Compensated::default(), Compensated::default());
        for (x, y) in at.column(i).iter().zip(b.column(j).iter()) {
            re.add(x.re * y.re);
            re.add(-(x.im * y.im));
            im.add(x.re * y.im);
            im.add(x.im * y.re);
        }
        Complex::new(re.value(), im.value())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product_l2, Rule};
    use crate::kernel::validate_psd;
    use nalgebra::Complex;

    fn c(re: f64) -> C64 {
        Complex::new(re, 0.0)
    }

    fn rank_one(n: usize) -> TransformOperator {
        let t = Grid::uniform(0.0, 1.0, 1, Rule::Midpoint).unwrap();
        let e = Grid::uniform(0.0, 1.0, n, Rule::Trapezoid).unwrap();
        build_transform(FeatureMap::from_fn(&t, &e, |_, _| c(1.0)).unwrap()).unwrap()
    }

    fn random_op(m: usize, n: usize, seed: u64) -> TransformOperator {
        let t = Grid::uniform(-1.0, 1.0, m, Rule::Midpoint).unwrap();
        let e = Grid::uniform(0.0, 3.0, n, Rule::Trapezoid).unwrap();
        let mut rng = TrialRng::new(seed);
        let h = DMatrix::from_fn(m, n, |_, _| Complex::new(rng.normal(), rng.normal()));
        build_transform(FeatureMap::new(&t, &e, h).unwrap()).unwrap()
    }

    #[test]
    fn rank_one_feature() {
        let op = rank_one(11);
        assert!(op
            .induced()
            .gram()
            .iter()
            .all(|z| (z - c(1.0)).norm() < 1e-15));
        let one_t = DiscreteFunction::from_real_fn(op.grid_t(), |_| 1.0).unwrap();
        for v in op.apply_forward(&one_t).unwrap().values() {
            assert!((v - c(1.0)).norm() < 1e-15);
        }
        let one_e = DiscreteFunction::from_real_fn(op.grid_e(), |_| 1.0).unwrap();
        for v in op.apply_adjoint(&one_e).unwrap().values() {
            assert!((v - c(1.0)).norm() < 1e-14);
        }
        let zero = DiscreteFunction::zeros(op.grid_t());
        assert!(op
            .apply_forward(&zero)
            .unwrap()
            .values()
            .iter()
            .all(|v| v.norm() == 0.0));
        let zero = DiscreteFunction::zeros(op.grid_e());
        assert!(op
            .apply_adjoint(&zero)
            .unwrap()
            .values()
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn shapes() {
        let op = random_op(7, 13, 1);
        assert_eq!(op.l_mat().shape(), (13, 7));
        assert_eq!(op.ladj_mat().shape(), (7, 13));
        assert_eq!(op.induced().gram().shape(), (13, 13));
    }

    #[test]
    fn adjointness_on_random_pairs() {
        let op = random_op(20, 50, 3);
        let mut rng = TrialRng::new(11);
        for _ in 0..100 {
            let f = rng.function(op.grid_t(), false);
            let g = rng.function(op.grid_e(), false);
            let lhs = inner_product_l2(&op.apply_forward(&f).unwrap(), &g, op.grid_e()).unwrap();
            let rhs = inner_product_l2(&f, &op.apply_adjoint(&g).unwrap(), op.grid_t()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(rhs.norm()));
        }
    }

    #[test]
    fn induced_kernel_is_gram_and_psd() {
        let op = random_op(15, 30, 5);
        let h = op.feature().matrix();
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            15,
            op.grid_t().weights().iter().map(|&w| c(w)),
        ));
        let direct = h.adjoint() * m * h;
        let rel = (op.induced().gram() - &direct).norm() / direct.norm();
        assert!(rel <= 1e-12, "{rel}");
        let psd = validate_psd(
            op.induced(),
            1e-10 * op.induced().spectral(1e-12).eigenvalues()[0],
        );
        assert!(psd.pass, "{psd:?}");
    }

    #[test]
    fn injectivity_verdicts() {
        let op = random_op(20, 50, 8);
        let r = op.check_injectivity(1e-6);
        assert!(r.injective && r.deficiency == 0);

        let t = Grid::uniform(0.0, 1.0, 3, Rule::Midpoint).unwrap();
        let e = Grid::uniform(0.0, 1.0, 9, Rule::Midpoint).unwrap();
        let h = DMatrix::from_fn(3, 9, |k, i| {
            c(if k == 2 {
                (i as f64).sin()
            } else {
                (i as f64).cos()
            })
        });
        let op = build_transform(FeatureMap::new(&t, &e, h).unwrap()).unwrap();
        let r = op.check_injectivity(1e-6);
        assert!(!r.injective);
        assert!(r.deficiency >= 1);
    }

    #[test]
    fn orthonormal_rows_are_injective() {
        let t = Grid::uniform(0.0, 1.0, 4, Rule::Midpoint).unwrap();
        let e = Grid::uniform(0.0, 1.0, 8, Rule::Midpoint).unwrap();
        let n = 8.0;
        // cosine rows, orthonormal in the weighted product on E
        let h = DMatrix::from_fn(4, 8, |k, i| {
            let s = if k == 0 { 1.0 } else { 2f64.sqrt() };
            c(s * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
        });
        let op = build_transform(FeatureMap::new(&t, &e, h).unwrap()).unwrap();
        let r = op.check_injectivity(1e-8);
        assert!(r.injective);
        assert_eq!(r.numerical_rank, 4);
    }

    #[test]
    fn identities_on_random_complex_map() {
        let op = random_op(12, 30, 21);
        let rep = op.verify_identities(1e-12, 50, 9).unwrap();
        assert!(
            rep.factorization_residual <= 1e-14,
            "{}",
            rep.factorization_residual
        );
        assert!(rep.flags.is_empty());
        assert!(rep.effective_condition_number < 1e8);
        assert!(
            rep.left_inverse_residual <= 1e-8,
            "{}",
            rep.left_inverse_residual
        );
        assert!(rep.isometry_defect <= 1e-8, "{}", rep.isometry_defect);
        assert!(rep.norm_defect <= 1e-8, "{}", rep.norm_defect);
        assert_eq!(rep.series.isometry.len(), 50);
        assert_eq!(rep, op.verify_identities(1e-12, 50, 9).unwrap());
    }

    #[test]
    fn invert_round_trip_and_zero() {
        let op = random_op(12, 30, 4);
        let mut rng = TrialRng::new(2);
        let f0 = rng.function(op.grid_t(), false);
        let f = op.apply_forward(&f0).unwrap();
        let inv = op.invert(&f, 1e-12, 1e-6).unwrap();
        let err = op.grid_t().norm(&inv.solution.sub(&f0).unwrap()).unwrap()
            / op.grid_t().norm(&f0).unwrap();
        assert!(err <= 1e-6, "{err}");
        assert!(inv.range_residual <= 1e-8);

        let zero = DiscreteFunction::zeros(op.grid_e());
        let inv = op.invert(&zero, 1e-12, 1e-6).unwrap();
        assert_eq!(inv.range_residual, 0.0);
        assert!(inv.solution.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn invert_rejects_out_of_range_and_non_injective() {
        let op = rank_one(21);
        let f = DiscreteFunction::from_real_fn(op.grid_e(), |p| p).unwrap();
        match op.invert(&f, 1e-12, 1e-6) {
            Err(Error::RangeViolation { residual, .. }) => assert!(residual >= 0.1, "{residual}"),
            other => panic!("expected range violation, got {other:?}"),
        }

        let t = Grid::uniform(0.0, 1.0, 2, Rule::Midpoint).unwrap();
        let e = Grid::uniform(0.0, 1.0, 5, Rule::Midpoint).unwrap();
        let op = build_transform(FeatureMap::from_fn(&t, &e, |_, p| c(p)).unwrap()).unwrap();
        let f = DiscreteFunction::zeros(&e);
        assert!(matches!(
            op.invert(&f, 1e-12, 1e-6),
            Err(Error::NotInjective { .. })
        ));
    }
}
