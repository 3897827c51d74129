//! JSON report types.
//!
//! Every report carries `schema_version`, the echoed config with the
//! effective seed, and a `timings` block. Timings are the only fields that
//! differ between two runs of the same config.

use rkhslab::analysis::WeightedL2Verdict;
use rkhslab::kernel::PsdReport;
use rkhslab::transform::{IdentityReport, InjectivityReport};
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// `value ≤ tolerance` must agree with the weighted-`L²` verdict.
    MatchesVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub relation: Relation,
    pub applicable: bool,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Criterion {
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance,
            relation: Relation::AtMost,
            applicable: true,
            passed: value <= tolerance,
            note: None,
        }
    }

    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance,
            relation: Relation::AtLeast,
            applicable: true,
            passed: value >= tolerance,
            note: None,
        }
    }

    pub fn matches_verdict(name: &str, value: f64, tolerance: f64, verdict: bool) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance,
            relation: Relation::MatchesVerdict,
            applicable: true,
            passed: (value <= tolerance) == verdict,
            note: None,
        }
    }

    /// A check that does not apply; it never fails the run. `value` is kept
    /// for information when it was computed.
    pub fn skipped(
        name: &str,
        value: Option<f64>,
        tolerance: f64,
        relation: Relation,
        note: &str,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            relation,
            applicable: false,
            passed: true,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Non-finite values become `None` so the JSON stays numeric.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub n: usize,
    pub real: bool,
    pub hermitian_defect: f64,
    pub psd: PsdReport,
    pub numerical_rank: usize,
    pub cutoff: f64,
    pub condition_number: Option<f64>,
    pub effective_condition_number: Option<f64>,
    pub spectral_reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub is_weighted_l2: bool,
    pub offdiag_ratio: f64,
    pub tol_diag: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_w: Option<Vec<f64>>,
}

impl From<&WeightedL2Verdict> for VerdictSummary {
    fn from(v: &WeightedL2Verdict) -> Self {
        let re = |f: &rkhslab::grid::DiscreteFunction| f.values().iter().map(|z| z.re).collect();
        Self {
            is_weighted_l2: v.is_weighted_l2,
            offdiag_ratio: v.offdiag_ratio,
            tol_diag: v.tol_diag,
            weight_v: v.weight_v.as_ref().map(re),
            weight_w: v.weight_w.as_ref().map(re),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RkhsSummary {
    pub trials: usize,
    pub reproducing_tolerance: f64,
    pub reproducing_max_residual: f64,
    pub point_eval_max_ratio: f64,
    pub point_eval_violations: usize,
    pub section_equality_max: f64,
    pub section_norm_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitarySummary {
    pub l2_adjoint_error: f64,
    pub measure_adjoint_error: f64,
    pub rkhs_adjoint_error: f64,
    /// Whether the induced kernel has full numerical rank, which the
    /// weighted-`L²` equivalence presumes.
    pub kernel_full_rank: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformSummary {
    pub m: usize,
    pub n: usize,
    pub identities: IdentityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary: Option<UnitarySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub build_ms: f64,
    pub kernel_ms: f64,
    pub rkhs_ms: f64,
    pub transform_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_l2: Option<VerdictSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rkhs: Option<RkhsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSummary>,
    pub criteria: Vec<Criterion>,
    pub timings: Timings,
}

impl VerifyReport {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvertStatus {
    Ok,
    NotInjective,
    RangeViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvertReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub status: InvertStatus,
    pub injectivity: InjectivityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_residual: Option<f64>,
    pub range_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub psd: PsdReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_l2: Option<VerdictSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: Timings,
}
