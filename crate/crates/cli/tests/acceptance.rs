//! Acceptance gate. Runs each criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rkhslab::analysis::{check_unitary_inversion, check_weighted_l2};
use rkhslab::features::{closed_form_error, make_feature_map, FeatureFamily};
use rkhslab::grid::{Grid, Rule};
use rkhslab::kernel::{BuiltinKernel, KernelMatrix};
use rkhslab::random::TrialRng;
use rkhslab::rkhs::{RkhsSpace, DEFAULT_RANGE_TOL};
use rkhslab::transform::{build_transform, FeatureMap, TransformOperator};
use rkhslab::{Error, C64};

const CUTOFF: f64 = 1e-12;
const SEED: u64 = 20240917;

type Outcome = Result<String, String>;

fn grid(a: f64, b: f64, n: usize, rule: Rule) -> Grid {
    Grid::uniform(a, b, n, rule).unwrap()
}

fn transform(family: FeatureFamily, grid_t: &Grid, grid_e: &Grid) -> TransformOperator {
    build_transform(make_feature_map(&family, grid_t, grid_e).unwrap()).unwrap()
}

fn default_transform(family: FeatureFamily, grid_e: &Grid) -> TransformOperator {
    let t = family.default_time_grid(grid_e, None).unwrap();
    transform(family, &t, grid_e)
}

fn indicator(n: usize) -> TransformOperator {
    default_transform(FeatureFamily::Indicator, &grid(0.0, 1.0, n, Rule::Midpoint))
}

/// Non-diagonal, injective complex fixture: 48 frequencies on `[−π, π]`
/// against 64 points with spacing 0.7.
fn fourier() -> TransformOperator {
    let e = grid(0.0, 0.7 * 63.0, 64, Rule::Trapezoid);
    let t = grid(-PI, PI, 48, Rule::Midpoint);
    transform(FeatureFamily::Fourier { band: PI }, &t, &e)
}

/// Square complex fixture: integer spacing makes the sampled exponentials
/// orthogonal.
fn fourier_square() -> TransformOperator {
    let e = grid(0.0, 64.0, 64, Rule::Midpoint);
    default_transform(FeatureFamily::Fourier { band: PI }, &e)
}

fn orthonormal(modes: usize, weight_slope: f64) -> TransformOperator {
    let e = grid(0.0, 1.0, modes, Rule::Midpoint);
    default_transform(
        FeatureFamily::OrthonormalDiagonal {
            modes,
            weight_slope,
        },
        &e,
    )
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Largest reproducing residual over all indices for `trials` range-valid
/// `f = K g` and for every section.
fn reproducing_max(space: &RkhsSpace, trials: usize, seed: u64) -> Result<f64, Error> {
    let k = space.kernel();
    let mut rng = TrialRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = k.apply(&rng.function(space.grid(), k.is_real()))?;
        let e = space.element(&f)?;
        worst = space
            .reproducing_residuals(&e)
            .into_iter()
            .fold(worst, f64::max);
    }
    for q in 0..k.len() {
        worst = worst.max(space.check_reproducing(&k.section(q)?, q)?);
    }
    Ok(worst)
}

fn ac1_reproducing() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let fixtures = [
        (
            "brownian [0,1] midpoint",
            BuiltinKernel::Brownian,
            grid(0.0, 1.0, 200, Rule::Midpoint),
        ),
        (
            "sinc b=pi [0,20]",
            BuiltinKernel::Sinc { band: PI },
            grid(0.0, 20.0, 200, Rule::Midpoint),
        ),
    ];
    for (name, kernel, g) in fixtures {
        let space =
            RkhsSpace::new(kernel.assemble(&g).unwrap(), CUTOFF, DEFAULT_RANGE_TOL).unwrap();
        let worst = reproducing_max(&space, 100, SEED).map_err(|e| e.to_string())?;
        let eff = space.spectral().effective_condition_number();
        let tol = 1e-8;
        ok &= worst <= tol;
        lines.push(format!(
            "{name}: max {worst:.2e} <= {tol:.0e} (rank {}, eff cond {eff:.2e})",
            space.spectral().numerical_rank()
        ));
    }
    check(ok, lines.join("; "))
}

fn ac2_factorization() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [10, 50, 100, 200, 400] {
        let e = grid(0.0, 1.0, n, Rule::Midpoint);
        let wide = grid(0.0, n as f64, n, Rule::Trapezoid);
        let ops = [
            default_transform(FeatureFamily::Indicator, &e),
            default_transform(FeatureFamily::Fourier { band: PI }, &wide),
            default_transform(FeatureFamily::Gaussian { sigma: 0.05 }, &e),
            default_transform(
                FeatureFamily::OrthonormalDiagonal {
                    modes: n,
                    weight_slope: 0.0,
                },
                &e,
            ),
            default_transform(
                FeatureFamily::OrthonormalDiagonal {
                    modes: n,
                    weight_slope: 1.5,
                },
                &e,
            ),
        ];
        for op in &ops {
            worst = worst.max(op.factorization_residual());
            cases += 1;
        }
    }
    check(
        worst <= 1e-14,
        format!("max residual {worst:.2e} <= 1e-14 over {cases} transforms, n up to 400"),
    )
}

fn identity_fixtures() -> Vec<(&'static str, TransformOperator)> {
    vec![
        ("indicator n=200", indicator(200)),
        ("fourier 48x64", fourier()),
        ("fourier 64x64", fourier_square()),
        ("orthonormal n=64", orthonormal(64, 0.0)),
    ]
}

fn ac3_ac4_identities() -> (Outcome, Outcome) {
    let (mut iso_ok, mut inv_ok) = (true, true);
    let (mut iso, mut inv) = (Vec::new(), Vec::new());
    for (name, op) in identity_fixtures() {
        let r = op.verify_identities(CUTOFF, 100, SEED).unwrap();
        let applicable = r.injectivity.injective && r.effective_condition_number <= 1e8;
        if !applicable {
            iso_ok = false;
            inv_ok = false;
        }
        iso_ok &= r.isometry_defect <= 1e-8 && r.series.isometry.len() >= 100;
        inv_ok &= r.left_inverse_residual <= 1e-8;
        iso.push(format!(
            "{name}: {:.2e} (cond {:.1e})",
            r.isometry_defect, r.effective_condition_number
        ));
        inv.push(format!("{name}: {:.2e}", r.left_inverse_residual));
    }
    (
        check(
            iso_ok,
            format!("defect <= 1e-8 over 100 pairs; {}", iso.join("; ")),
        ),
        check(inv_ok, format!("round trip <= 1e-8; {}", inv.join("; "))),
    )
}

fn ac5_inversion() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, op) in [
        ("indicator n=200", indicator(200)),
        ("fourier 48x64", fourier()),
    ] {
        let mut rng = TrialRng::new(SEED);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let f_t = rng.function(op.grid_t(), op.is_real());
            let f = op.apply_forward(&f_t).unwrap();
            let back = op.invert(&f, CUTOFF, DEFAULT_RANGE_TOL).unwrap().solution;
            let t = op.grid_t();
            worst = worst.max(t.norm(&back.sub(&f_t).unwrap()).unwrap() / t.norm(&f_t).unwrap());
        }
        ok &= worst <= 1e-6;
        lines.push(format!("{name}: {worst:.2e}"));
    }

    let e = grid(0.0, 1.0, 50, Rule::Midpoint);
    let t = grid(0.0, 1.0, 1, Rule::Midpoint);
    let ones = FeatureMap::from_fn(&t, &e, |_, _| C64::new(1.0, 0.0)).unwrap();
    let op = build_transform(ones).unwrap();
    let f = rkhslab::grid::DiscreteFunction::from_real_fn(&e, |p| p).unwrap();
    match op.invert(&f, CUTOFF, DEFAULT_RANGE_TOL) {
        Err(Error::RangeViolation { residual, .. }) => {
            ok &= residual >= 0.1;
            lines.push(format!(
                "rank-one fixture: range violation, residual {residual:.3}"
            ));
        }
        other => {
            ok = false;
            lines.push(format!(
                "rank-one fixture: expected range violation, got {other:?}"
            ));
        }
    }
    check(ok, format!("relative error <= 1e-6; {}", lines.join("; ")))
}

fn ac6_weighted_l2() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for slope in [0.0, 1.5] {
        let op = orthonormal(64, slope);
        let v = check_weighted_l2(op.induced(), 1e-10);
        let (Some(w), Some(vv)) = (&v.weight_w, &v.weight_v) else {
            return Err(format!(
                "orthonormal slope {slope}: verdict no, offdiag {:.2e}",
                v.offdiag_ratio
            ));
        };
        let recip = w
            .values()
            .iter()
            .zip(vv.values())
            .map(|(a, b)| (a.re - 1.0 / b.re).abs())
            .fold(0.0, f64::max);
        let family = FeatureFamily::OrthonormalDiagonal {
            modes: 64,
            weight_slope: slope,
        };
        let built = family.construction_weights(op.grid_e()).unwrap();
        let vs_built = vv
            .values()
            .iter()
            .zip(&built)
            .map(|(a, b)| (a.re - b).abs() / b)
            .fold(0.0, f64::max);
        ok &= v.is_weighted_l2 && v.offdiag_ratio <= 1e-10 && recip <= 1e-10 && vs_built <= 1e-8;
        lines.push(format!(
            "orthonormal slope {slope}: yes, offdiag {:.1e}, |w - 1/v| {recip:.1e}, v vs construction {vs_built:.1e}",
            v.offdiag_ratio
        ));
    }
    for (name, op) in [
        ("indicator n=200", indicator(200)),
        ("fourier 48x64", fourier()),
    ] {
        let v = check_weighted_l2(op.induced(), 1e-8);
        ok &= !v.is_weighted_l2 && v.offdiag_ratio >= 1e-2;
        lines.push(format!(
            "{name}: {}, offdiag {:.3}",
            if v.is_weighted_l2 { "yes" } else { "no" },
            v.offdiag_ratio
        ));
    }
    check(ok, lines.join("; "))
}

fn ac7_unitarity() -> Outcome {
    let orth = check_unitary_inversion(&orthonormal(64, 0.0), CUTOFF, 1e-8, 100, SEED).unwrap();
    let ind = check_unitary_inversion(&indicator(200), CUTOFF, 1e-8, 100, SEED).unwrap();
    check(
        orth.l2_adjoint_error <= 1e-8
            && ind.l2_adjoint_error >= 0.1
            && ind.rkhs_adjoint_error <= 1e-6,
        format!(
            "orthonormal plain {:.2e} <= 1e-8; indicator plain {:.3} >= 0.1, rkhs {:.2e} <= 1e-6",
            orth.l2_adjoint_error, ind.l2_adjoint_error, ind.rkhs_adjoint_error
        ),
    )
}

fn series(errs: &[f64]) -> String {
    let parts: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
    parts.join(" -> ")
}

fn decreasing(errs: &[f64]) -> bool {
    errs.windows(2).all(|w| w[1] < w[0])
}

fn ac8_closed_forms() -> Outcome {
    let sizes = [100, 200, 400];
    let mut ok = true;
    let mut lines = Vec::new();

    let brownian: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let op = indicator(n);
            closed_form_error(&FeatureFamily::Indicator, op.induced().gram(), op.grid_e()).unwrap()
        })
        .collect();
    ok &= brownian[1] <= 5e-3 && decreasing(&brownian);
    lines.push(format!("min: {} (n=200 <= 5e-3)", series(&brownian)));

    let families = [
        (
            "sinc",
            FeatureFamily::Fourier { band: PI },
            grid(0.0, 4.0, 41, Rule::Midpoint),
        ),
        (
            "gaussian",
            FeatureFamily::Gaussian { sigma: 0.01 },
            grid(0.0, 1.0, 21, Rule::Midpoint),
        ),
    ];
    for (name, family, e) in families {
        let errs: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let t = family.default_time_grid(&e, Some(n)).unwrap();
                let op = transform(family, &t, &e);
                closed_form_error(&family, op.induced().gram(), &e).unwrap()
            })
            .collect();
        ok &= decreasing(&errs);
        lines.push(format!("{name}: {}", series(&errs)));
    }
    check(
        ok,
        format!("errors at n = 100, 200, 400 decrease; {}", lines.join("; ")),
    )
}

fn ac9_point_evaluation() -> Outcome {
    let e = grid(0.0, 1.0, 200, Rule::Midpoint);
    let kernels: Vec<(&str, KernelMatrix)> = vec![
        ("brownian", BuiltinKernel::Brownian.assemble(&e).unwrap()),
        (
            "sinc",
            BuiltinKernel::Sinc { band: PI }
                .assemble(&grid(0.0, 20.0, 200, Rule::Midpoint))
                .unwrap(),
        ),
        (
            "gaussian",
            BuiltinKernel::Gaussian { width: 0.1 }.assemble(&e).unwrap(),
        ),
        (
            "exponential",
            BuiltinKernel::Exponential { length: 0.2 }
                .assemble(&e)
                .unwrap(),
        ),
        ("fourier 48x64", fourier().induced().clone()),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, k) in kernels {
        let space = RkhsSpace::new(k, CUTOFF, DEFAULT_RANGE_TOL).unwrap();
        let kern = space.kernel();
        let mut rng = TrialRng::new(SEED);
        let mut violations = 0;
        for _ in 0..1000 {
            let f = kern
                .apply(&rng.function(space.grid(), kern.is_real()))
                .unwrap();
            let el = space.element(&f).unwrap();
            violations += (0..kern.len())
                .filter(|&q| !space.point_eval_bound_of(&el, q).holds)
                .count();
        }
        let mut eq = 0.0f64;
        for q in 0..kern.len() {
            let b = space.point_eval_bound_of(&space.section(q).unwrap(), q);
            eq = eq.max((b.lhs - b.rhs).abs() / b.rhs);
        }
        ok &= violations == 0 && eq <= 1e-10;
        lines.push(format!(
            "{name}: {violations} violations, equality {eq:.1e}"
        ));
    }
    check(ok, format!("1000 f per kernel; {}", lines.join("; ")))
}

fn run_verify(bin: &str, config: &Path, out: &Path) -> std::io::Result<(Option<i32>, String)> {
    let status = Command::new(bin)
        .args(["verify", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("RKHSLAB_SEED")
        .status()?;
    Ok((status.code(), std::fs::read_to_string(out)?))
}

/// The report with its trailing `timings` block cut off.
fn without_timings(report: &str) -> Option<&str> {
    let at = report.rfind("\"timings\"")?;
    let tail = &report[at..];
    // timings must be the last member
    (tail.matches('}').count() == 2).then_some(&report[..at])
}

fn ac10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"grids": {"e": {"lower": 0, "upper": 1, "n": 100, "rule": "midpoint"}},
            "features": {"family": "indicator"}, "trials": 50, "seed": 11}"#,
    )
    .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_rkhslab");
    let (c1, r1) =
        run_verify(bin, &config, &dir.path().join("a.json")).map_err(|e| e.to_string())?;
    let (c2, r2) =
        run_verify(bin, &config, &dir.path().join("b.json")).map_err(|e| e.to_string())?;
    let (Some(a), Some(b)) = (without_timings(&r1), without_timings(&r2)) else {
        return Err("timings block missing or not last".into());
    };
    check(
        c1 == Some(0) && c2 == Some(0) && a == b,
        format!(
            "exit codes {c1:?}/{c2:?}, {} bytes compared, identical: {}",
            a.len(),
            a == b
        ),
    )
}

fn main() {
    let start = Instant::now();
    let (ac3, ac4) = ac3_ac4_identities();
    let results: Vec<(&str, Outcome)> = vec![
        ("AC1 reproducing property", ac1_reproducing()),
        ("AC2 factorization K = LL*", ac2_factorization()),
        ("AC3 isometry", ac3),
        ("AC4 left inverse L*K^-1 L = I", ac4),
        ("AC5 inversion and range violation", ac5_inversion()),
        ("AC6 weighted-L2 verdict", ac6_weighted_l2()),
        ("AC7 unitary inversion", ac7_unitarity()),
        ("AC8 closed-form convergence", ac8_closed_forms()),
        ("AC9 point-evaluation bound", ac9_point_evaluation()),
        ("AC10 determinism", ac10_determinism()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!(
        "acceptance: {} passed, {failed} failed, {secs:.1} s",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
