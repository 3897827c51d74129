//! The three commands, independent of argument parsing.

use std::path::Path;
use std::time::Instant;

use rkhslab::analysis::{check_unitary_inversion, check_weighted_l2};
use rkhslab::features::{closed_form_error, make_feature_map};
use rkhslab::grid::{DiscreteFunction, Grid};
use rkhslab::io::{
    read_function_file, read_matrix_file, write_function_file, write_matrix_file, MatrixMode,
};
use rkhslab::kernel::{KernelMatrix, PsdReport};
use rkhslab::random::TrialRng;
use rkhslab::rkhs::RkhsSpace;
use rkhslab::transform::{FeatureMap, TransformOperator};
use rkhslab::Error;
use thiserror::Error as ThisError;

use crate::config::{ConfigError, RunConfig, Source};
use crate::report::*;

/// Reproducing tolerance for well-conditioned kernels.
pub const REPRODUCING_TOL: f64 = 1e-8;
/// Relaxed reproducing tolerance once the effective condition number
/// passes [`ILL_CONDITIONED`].
pub const REPRODUCING_TOL_RELAXED: f64 = 1e-6;
pub const ILL_CONDITIONED: f64 = 1e8;
pub const POINT_EVAL_SLACK: f64 = 1e-10;
pub const SECTION_EQUALITY_TOL: f64 = 1e-10;
pub const SECTION_NORM_TOL: f64 = 1e-8;
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const FACTORIZATION_TOL: f64 = 1e-14;
pub const IDENTITY_TOL: f64 = 1e-8;
pub const ADJOINT_TOL: f64 = 1e-6;

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Bad grids, families, input files or incompatible shapes.
    #[error("setup failed: {0}")]
    Setup(Error),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// What a config describes: a bare kernel or a transform with its induced
/// kernel.
#[derive(Debug, Clone)]
pub enum Subject {
    Kernel(KernelMatrix),
    Transform(Box<TransformOperator>),
}

impl Subject {
    pub fn kernel(&self) -> &KernelMatrix {
        match self {
            Subject::Kernel(k) => k,
            Subject::Transform(op) => op.induced(),
        }
    }
}

/// Errors that come from the numbers rather than the setup.
fn is_numerical(e: &Error) -> bool {
    matches!(e, Error::NonHermitian { .. } | Error::NonFinite(_))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Builds the subject. Numerical failures come back in the inner result so
/// that they can be reported rather than treated as setup errors.
pub fn build(cfg: &RunConfig) -> Result<Result<Subject, Error>, RunError> {
    let source = cfg.source()?;
    let grid_e = cfg.grids.e.build().map_err(RunError::Setup)?;
    let split = |e: Error| {
        if is_numerical(&e) {
            Ok(Err(e))
        } else {
            Err(RunError::Setup(e))
        }
    };
    let built = match source {
        Source::Kernel(k) => k.assemble(&grid_e).map(Subject::Kernel),
        Source::KernelCsv(src) => read_matrix_file(&src.path, src.mode)
            .and_then(|gram| KernelMatrix::from_gram(&grid_e, gram))
            .map(Subject::Kernel),
        Source::Features(family) => {
            let grid_t = match &cfg.grids.t {
                Some(t) => t.build(),
                None => family.default_time_grid(&grid_e, None),
            }
            .map_err(RunError::Setup)?;
            make_feature_map(&family, &grid_t, &grid_e)
                .and_then(TransformOperator::new)
                .map(|op| Subject::Transform(Box::new(op)))
        }
        Source::FeaturesCsv(src) => {
            let t = cfg
                .grids
                .t
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("features_csv requires grids.t".into()))?;
            let grid_t = t.build().map_err(RunError::Setup)?;
            read_matrix_file(&src.path, src.mode)
                .and_then(|h| FeatureMap::new(&grid_t, &grid_e, h))
                .and_then(TransformOperator::new)
                .map(|op| Subject::Transform(Box::new(op)))
        }
    };
    match built {
        Ok(s) => Ok(Ok(s)),
        Err(e) => split(e),
    }
}

/// Writes the kernel and feature exports requested under `output`.
pub fn export(cfg: &RunConfig, subject: &Subject) -> Result<(), RunError> {
    let mode = |real: bool| {
        if real {
            MatrixMode::Real
        } else {
            MatrixMode::Complex
        }
    };
    if let Some(path) = &cfg.output.kernel_csv {
        let k = subject.kernel();
        write_matrix_file(path, k.gram(), mode(k.is_real())).map_err(|source| {
            RunError::Output {
                path: path.display().to_string(),
                source,
            }
        })?;
    }
    if let (Some(path), Subject::Transform(op)) = (&cfg.output.features_csv, subject) {
        write_matrix_file(path, op.feature().matrix(), mode(op.is_real())).map_err(|source| {
            RunError::Output {
                path: path.display().to_string(),
                source,
            }
        })?;
    }
    Ok(())
}

/// PSD check with `tol_psd` taken relative to the largest `|λ|`.
pub fn psd_report(kernel: &KernelMatrix, tol_psd: f64) -> PsdReport {
    let raw = rkhslab::kernel::validate_psd(kernel, 0.0);
    let scale = raw.max_eigenvalue.abs().max(raw.min_eigenvalue.abs());
    let tolerance = tol_psd * scale;
    PsdReport {
        pass: raw.min_eigenvalue >= -tolerance,
        tolerance,
        ..raw
    }
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, RunError> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let mut report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        seed: cfg.seed,
        config: cfg.clone(),
        passed: false,
        error: None,
        kernel: None,
        weighted_l2: None,
        rkhs: None,
        transform: None,
        criteria: Vec::new(),
        timings: Timings::default(),
    };

    let t = Instant::now();
    let subject = match build(cfg)? {
        Ok(s) => s,
        Err(e) => {
            report.error = Some(e.to_string());
            timings.total_ms = ms(start);
            report.timings = timings;
            return Ok(report);
        }
    };
    export(cfg, &subject)?;
    timings.build_ms = ms(t);

    if let Err(e) = verify_subject(cfg, &subject, &mut report, &mut timings) {
        report.error = Some(e.to_string());
    }
    report.passed = report.error.is_none() && report.criteria.iter().all(|c| c.passed);
    timings.total_ms = ms(start);
    report.timings = timings;
    Ok(report)
}

fn verify_subject(
    cfg: &RunConfig,
    subject: &Subject,
    report: &mut VerifyReport,
    timings: &mut Timings,
) -> Result<(), Error> {
    let tol = cfg.tolerances;
    let kernel = subject.kernel();

    let t = Instant::now();
    let psd = psd_report(kernel, tol.tol_psd);
    let space = RkhsSpace::new(kernel.clone(), tol.cutoff_rel, tol.range_tol)?;
    let spectral = space.spectral();
    let eff_cond = spectral.effective_condition_number();
    report.kernel = Some(KernelSummary {
        n: kernel.len(),
        real: kernel.is_real(),
        hermitian_defect: kernel.hermitian_defect(),
        psd,
        numerical_rank: spectral.numerical_rank(),
        cutoff: spectral.cutoff(),
        condition_number: finite(spectral.condition_number()),
        effective_condition_number: finite(eff_cond),
        spectral_reconstruction_error: space.spectral_consistency(),
    });
    report.criteria.push(Criterion::at_least(
        "kernel_psd",
        psd.min_eigenvalue,
        -psd.tolerance,
    ));
    report.criteria.push(Criterion::at_most(
        "spectral_consistency",
        space.spectral_consistency(),
        SPECTRAL_TOL,
    ));
    let verdict = check_weighted_l2(kernel, tol.tol_diag);
    report.weighted_l2 = Some(VerdictSummary::from(&verdict));
    timings.kernel_ms = ms(t);

    let t = Instant::now();
    let rep_tol = if eff_cond > ILL_CONDITIONED {
        REPRODUCING_TOL_RELAXED
    } else {
        REPRODUCING_TOL
    };
    let rkhs_names = [
        ("reproducing_property", rep_tol),
        ("point_evaluation_bound", 1.0 + POINT_EVAL_SLACK),
        ("point_evaluation_equality", SECTION_EQUALITY_TOL),
        ("section_norm", SECTION_NORM_TOL),
    ];
    if psd.pass {
        let summary = rkhs_suite(&space, cfg.trials, cfg.seed, rep_tol)?;
        let mut rep = Criterion::at_most(
            "reproducing_property",
            summary.reproducing_max_residual,
            rep_tol,
        );
        if rep_tol != REPRODUCING_TOL {
            rep = rep.with_note(format!(
                "tolerance relaxed: effective condition number {eff_cond:.3e} exceeds {ILL_CONDITIONED:.0e}"
            ));
        }
        report.criteria.push(rep);
        report.criteria.push(Criterion::at_most(
            "point_evaluation_bound",
            summary.point_eval_max_ratio,
            1.0 + POINT_EVAL_SLACK,
        ));
        report.criteria.push(Criterion::at_most(
            "point_evaluation_equality",
            summary.section_equality_max,
            SECTION_EQUALITY_TOL,
        ));
        report.criteria.push(Criterion::at_most(
            "section_norm",
            summary.section_norm_max,
            SECTION_NORM_TOL,
        ));
        report.rkhs = Some(summary);
    } else {
        for (name, tol) in rkhs_names {
            report.criteria.push(Criterion::skipped(
                name,
                None,
                tol,
                Relation::AtMost,
                "kernel is not positive semidefinite",
            ));
        }
    }
    timings.rkhs_ms = ms(t);

    if let Subject::Transform(op) = subject {
        let t = Instant::now();
        transform_suite(cfg, op, &verdict, report)?;
        timings.transform_ms = ms(t);
    }
    Ok(())
}

/// Reproducing and point-evaluation checks over seeded range elements
/// `f = K g` and over every kernel section.
fn rkhs_suite(
    space: &RkhsSpace,
    trials: usize,
    seed: u64,
    rep_tol: f64,
) -> Result<RkhsSummary, Error> {
    let kernel = space.kernel();
    let n = kernel.len();
    let mut rng = TrialRng::new(seed);
    let mut rep_max = 0.0f64;
    let mut ratio_max = 0.0f64;
    let mut violations = 0;
    for _ in 0..trials {
        let g = rng.function(space.grid(), kernel.is_real());
        let f = kernel.apply(&g)?;
        let e = space.element_unchecked(&f)?;
        rep_max = space
            .reproducing_residuals(&e)
            .into_iter()
            .fold(rep_max, f64::max);
        for q in 0..n {
            let b = space.point_eval_bound_of(&e, q);
            if !b.holds {
                violations += 1;
            }
            if b.rhs > 0.0 {
                ratio_max = ratio_max.max(b.lhs / b.rhs);
            } else if b.lhs > 0.0 {
                ratio_max = f64::INFINITY;
            }
        }
    }
    let mut eq_max = 0.0f64;
    let mut norm_max = 0.0f64;
    for q in 0..n {
        let kqq = kernel.value(q, q).re;
        if kqq <= 0.0 {
            continue;
        }
        let s = space.section(q)?;
        rep_max = space
            .reproducing_residuals(&s)
            .into_iter()
            .fold(rep_max, f64::max);
        let b = space.point_eval_bound_of(&s, q);
        eq_max = eq_max.max((b.lhs - b.rhs).abs() / b.rhs);
        norm_max = norm_max.max((s.norm().powi(2) - kqq).abs() / kqq);
    }
    Ok(RkhsSummary {
        trials,
        reproducing_tolerance: rep_tol,
        reproducing_max_residual: rep_max,
        point_eval_max_ratio: ratio_max,
        point_eval_violations: violations,
        section_equality_max: eq_max,
        section_norm_max: norm_max,
    })
}

fn transform_suite(
    cfg: &RunConfig,
    op: &TransformOperator,
    verdict: &rkhslab::analysis::WeightedL2Verdict,
    report: &mut VerifyReport,
) -> Result<(), Error> {
    let tol = cfg.tolerances;
    let ids = op.verify_identities(tol.cutoff_rel, cfg.trials, cfg.seed)?;
    report.criteria.push(Criterion::at_most(
        "factorization",
        ids.factorization_residual,
        FACTORIZATION_TOL,
    ));

    let injective = ids.injectivity.injective;
    let well_conditioned = ids.effective_condition_number <= ILL_CONDITIONED;
    for (name, value) in [
        ("isometry", ids.isometry_defect),
        ("left_inverse", ids.left_inverse_residual),
        ("norm_preservation", ids.norm_defect),
    ] {
        report.criteria.push(if !injective {
            Criterion::skipped(
                name,
                Some(value),
                IDENTITY_TOL,
                Relation::AtMost,
                "transform is not injective",
            )
        } else if !well_conditioned {
            Criterion::skipped(
                name,
                Some(value),
                IDENTITY_TOL,
                Relation::AtMost,
                "effective condition number exceeds 1e8",
            )
        } else {
            Criterion::at_most(name, value, IDENTITY_TOL)
        });
    }

    let unitary = if injective {
        let u = check_unitary_inversion(op, tol.cutoff_rel, tol.tol_diag, cfg.trials, cfg.seed)?;
        let full_rank = ids.numerical_rank == op.grid_e().len();
        report.criteria.push(Criterion::at_most(
            "rkhs_adjoint_inversion",
            u.rkhs_adjoint_error,
            ADJOINT_TOL,
        ));
        report.criteria.push(if full_rank {
            Criterion::matches_verdict(
                "weighted_l2_equivalence",
                u.measure_adjoint_error,
                ADJOINT_TOL,
                verdict.is_weighted_l2,
            )
        } else {
            Criterion::skipped(
                "weighted_l2_equivalence",
                Some(u.measure_adjoint_error),
                ADJOINT_TOL,
                Relation::MatchesVerdict,
                "induced kernel is rank deficient",
            )
        });
        Some(UnitarySummary {
            l2_adjoint_error: u.l2_adjoint_error,
            measure_adjoint_error: u.measure_adjoint_error,
            rkhs_adjoint_error: u.rkhs_adjoint_error,
            kernel_full_rank: full_rank,
        })
    } else {
        for (name, rel) in [
            ("rkhs_adjoint_inversion", Relation::AtMost),
            ("weighted_l2_equivalence", Relation::MatchesVerdict),
        ] {
            report.criteria.push(Criterion::skipped(
                name,
                None,
                ADJOINT_TOL,
                rel,
                "transform is not injective",
            ));
        }
        None
    };

    let closed = match &cfg.features {
        Some(family) => closed_form_error(family, op.induced().gram(), op.grid_e()),
        None => None,
    };
    report.transform = Some(TransformSummary {
        m: op.grid_t().len(),
        n: op.grid_e().len(),
        identities: ids,
        unitary,
        closed_form_error: closed,
    });
    Ok(())
}

/// Result of `invert`: the report plus the process exit code.
#[derive(Debug, Clone)]
pub struct InvertOutcome {
    pub report: InvertReport,
    pub solution: Option<(Grid, DiscreteFunction)>,
    pub exit_code: i32,
}

pub fn invert(cfg: &RunConfig, data: &Path) -> Result<InvertOutcome, RunError> {
    let start = Instant::now();
    let subject = build(cfg)?.map_err(RunError::Setup)?;
    let op = match subject {
        Subject::Transform(op) => *op,
        Subject::Kernel(_) => {
            return Err(ConfigError::Invalid(
                "invert needs a feature source (features or features_csv)".into(),
            )
            .into())
        }
    };
    let f = read_function_file(data, op.grid_e()).map_err(RunError::Setup)?;
    let tol = cfg.tolerances;
    let injectivity = op.check_injectivity(tol.cutoff_rel.sqrt());
    let mut report = InvertReport {
        schema_version: SCHEMA_VERSION,
        command: "invert",
        seed: cfg.seed,
        config: cfg.clone(),
        status: InvertStatus::Ok,
        injectivity,
        range_residual: None,
        range_tol: tol.range_tol,
        message: None,
        timings: Timings::default(),
    };
    let (solution, exit_code) = match op.invert(&f, tol.cutoff_rel, tol.range_tol) {
        Ok(inv) => {
            report.range_residual = Some(inv.range_residual);
            (Some((op.grid_t().clone(), inv.solution)), 0)
        }
        Err(e @ Error::NotInjective { .. }) => {
            report.status = InvertStatus::NotInjective;
            report.message = Some(e.to_string());
            (None, 3)
        }
        Err(e @ Error::RangeViolation { residual, .. }) => {
            report.status = InvertStatus::RangeViolation;
            report.range_residual = Some(residual);
            report.message = Some(e.to_string());
            (None, 3)
        }
        Err(e) => return Err(RunError::Setup(e)),
    };
    report.timings.total_ms = ms(start);
    Ok(InvertOutcome {
        report,
        solution,
        exit_code,
    })
}

pub fn write_solution(path: &Path, grid: &Grid, f: &DiscreteFunction) -> Result<(), RunError> {
    write_function_file(path, grid, f).map_err(|source| RunError::Output {
        path: path.display().to_string(),
        source,
    })
}

/// `analyze`: PSD validation and the weighted-`L²` verdict. The exit code is
/// 1 when the kernel is not PSD or cannot be formed.
pub fn analyze(cfg: &RunConfig) -> Result<(AnalyzeReport, i32), RunError> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let subject = build(cfg)?;
    timings.build_ms = ms(start);
    let subject = match subject {
        Ok(s) => s,
        Err(e) => {
            let nan = f64::NAN;
            timings.total_ms = ms(start);
            let report = AnalyzeReport {
                schema_version: SCHEMA_VERSION,
                command: "analyze",
                seed: cfg.seed,
                config: cfg.clone(),
                psd: PsdReport {
                    pass: false,
                    min_eigenvalue: nan,
                    max_eigenvalue: nan,
                    tolerance: nan,
                },
                weighted_l2: None,
                error: Some(e.to_string()),
                timings,
            };
            return Ok((report, 1));
        }
    };
    export(cfg, &subject)?;
    let t = Instant::now();
    let kernel = subject.kernel();
    let psd = psd_report(kernel, cfg.tolerances.tol_psd);
    let weighted_l2 = psd
        .pass
        .then(|| VerdictSummary::from(&check_weighted_l2(kernel, cfg.tolerances.tol_diag)));
    timings.kernel_ms = ms(t);
    timings.total_ms = ms(start);
    let code = if psd.pass { 0 } else { 1 };
    Ok((
        AnalyzeReport {
            schema_version: SCHEMA_VERSION,
            command: "analyze",
            seed: cfg.seed,
            config: cfg.clone(),
            psd,
            weighted_l2,
            error: (!psd.pass).then(|| "kernel is not positive semidefinite".to_string()),
            timings,
        },
        code,
    ))
}
