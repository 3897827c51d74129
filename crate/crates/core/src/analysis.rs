//! When is `H_K` just a weighted `L²` space?
//!
//! If `[f, g] = ∫ f conj(g) w dp` then the inverse kernel is `w(p)δ(p−q)`
//! and `K(p,q) = v(p)δ(p−q)` with `v = 1/w`. On a grid, `δ(p−q)` is
//! `δᵢⱼ / wⱼ`, so the condition is that the operator `gram · W` is the
//! diagonal matrix `diag(v)`. In that case, and only then, the `L²(dμ)`
//! adjoint of `L` already inverts it; otherwise inversion needs `K⁻¹`.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Grid};
use crate::kernel::KernelMatrix;
use crate::random::TrialRng;
use crate::transform::TransformOperator;

pub const DEFAULT_TOL_DIAG: f64 = 1e-8;

/// Relative floor for `v`: entries must exceed this times `max(v)`.
pub const WEIGHT_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedL2Verdict {
    pub is_weighted_l2: bool,
    /// `w = 1/v`, present when the verdict is yes.
    pub weight_w: Option<DiscreteFunction>,
    /// Diagonal of `gram · W`, present when the verdict is yes.
    pub weight_v: Option<DiscreteFunction>,
    /// `‖offdiag(gram·W)‖_F / ‖gram·W‖_F`
    pub offdiag_ratio: f64,
    pub tol_diag: f64,
}

pub fn check_weighted_l2(kernel: &KernelMatrix, tol_diag: f64) -> WeightedL2Verdict {
    let b = kernel.operator_matrix();
    let n = b.nrows();
    let mut diag_sq = 0.0;
    let mut off_sq = 0.0;
    for j in 0..n {
        for i in 0..n {
            let z = b[(i, j)].norm_sqr();
            if i == j {
                diag_sq += z;
            } else {
                off_sq += z;
            }
        }
    }
    let total = diag_sq + off_sq;
    let offdiag_ratio = if total == 0.0 {
        0.0
    } else {
        (off_sq / total).sqrt()
    };

    let v: Vec<f64> = (0..n).map(|i| b[(i, i)].re).collect();
    let vmax = v.iter().copied().fold(0.0, f64::max);
    let floor = WEIGHT_FLOOR_REL * vmax;
    let positive = vmax > 0.0 && v.iter().all(|&x| x >= floor && x > 0.0);
    let is_weighted_l2 = offdiag_ratio <= tol_diag && positive;

    let (weight_v, weight_w) = if is_weighted_l2 {
        let grid = kernel.grid();
        let w: Vec<f64> = v.iter().map(|x| 1.0 / x).collect();
        (
            Some(DiscreteFunction::from_real(grid, &v).expect("finite")),
            Some(DiscreteFunction::from_real(grid, &w).expect("finite")),
        )
    } else {
        (None, None)
    };
    WeightedL2Verdict {
        is_weighted_l2,
        weight_w,
        weight_v,
        offdiag_ratio,
        tol_diag,
    }
}

/// `Σᵢ wᵢ · weight(pᵢ) · fᵢ · conj(gᵢ)`, the product of `L²(E, weight dp)`.
pub fn weighted_inner_product(
    f: &DiscreteFunction,
    g: &DiscreteFunction,
    weight: &DiscreteFunction,
    grid: &Grid,
) -> Result<crate::C64> {
    let wf = DiscreteFunction::new(
        grid,
        f.values()
            .iter()
            .zip(weight.values())
            .map(|(a, w)| a * w.re)
            .collect(),
    )?;
    crate::grid::inner_product_l2(&wf, g, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryInversionReport {
    pub verdict_from_kernel: WeightedL2Verdict,
    /// Recovery error of `F ≈ L* f` with the plain `L²(E, dp)` adjoint.
    pub l2_adjoint_error: f64,
    /// Recovery error of `F ≈ L*_μ f`, the adjoint in `L²(E, w dp)` with
    /// the weight recovered by the verdict; equals `l2_adjoint_error` when
    /// the kernel is not weighted-`L²`.
    pub measure_adjoint_error: f64,
    /// Recovery error of `F ≈ L* K⁻¹ f`.
    pub rkhs_adjoint_error: f64,
    pub seed: u64,
    pub trials: usize,
}

/// Compares inversion by the plain adjoint with inversion by the RKHS
/// adjoint over `trials` seeded random `F`.
pub fn check_unitary_inversion(
    op: &TransformOperator,
    cutoff_rel: f64,
    tol_diag: f64,
    trials: usize,
    seed: u64,
) -> Result<UnitaryInversionReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let inj = op.check_injectivity(cutoff_rel.sqrt());
    if !inj.injective {
        return Err(Error::NotInjective {
            rank: inj.numerical_rank,
            required: op.grid_t().len(),
        });
    }
    let verdict = check_weighted_l2(op.induced(), tol_diag);
    let spectral = op.induced().spectral(cutoff_rel);
    let grid_t = op.grid_t();
    let mut rng = TrialRng::new(seed);
    let (mut l2_err, mut mu_err, mut rkhs_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let f_t = rng.function(grid_t, op.is_real());
        let nf = grid_t.norm(&f_t)?;
        let f = op.apply_forward(&f_t)?;
        let rel = |approx: &DiscreteFunction| -> Result<f64> {
            Ok(grid_t.norm(&approx.sub(&f_t)?)? / nf)
        };

        let plain = op.apply_adjoint(&f)?;
        let e_plain = rel(&plain)?;
        l2_err = l2_err.max(e_plain);

        mu_err = mu_err.max(match &verdict.weight_w {
            Some(w) => rel(&measure_adjoint(op, &f, w)?)?,
            None => e_plain,
        });

        let x = spectral.solve(op.induced(), &f)?.solution;
        rkhs_err = rkhs_err.max(rel(&op.apply_adjoint(&x)?)?);
    }
    Ok(UnitaryInversionReport {
        verdict_from_kernel: verdict,
        l2_adjoint_error: l2_err,
        measure_adjoint_error: mu_err,
        rkhs_adjoint_error: rkhs_err,
        seed,
        trials,
    })
}

/// `L*_μ f = L*(w ⊙ f)`.
pub fn measure_adjoint(
    op: &TransformOperator,
    f: &DiscreteFunction,
    weight: &DiscreteFunction,
) -> Result<DiscreteFunction> {
    let wf = DiscreteFunction::new(
        op.grid_e(),
        f.values()
            .iter()
            .zip(weight.values())
            .map(|(a, w)| a * Complex::new(w.re, 0.0))
            .collect(),
    )?;
    op.apply_adjoint(&wf)
}
