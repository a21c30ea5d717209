//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 5-7 need the UCI bank-marketing file, read from
//! `$BANK_MARKETING_CSV` or `data/bank-additional-full.csv` at the workspace
//! root. Without it they print FAIL with the reason and do not affect the
//! exit status; every other FAIL does.

mod support;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bayesbin::data::DesignMatrix;
use bayesbin::oracle::{check_diagnostic_calibration, check_gradients, check_psis_vs_exact, check_sampler_vs_grid};
use bayesbin::predict::posterior_predict;
use bayesbin::{LinkKind, PosteriorDraws, Scale};
use ndarray::{Array2, Array3};
use serde_json::Value;
use support::*;

const GRADIENT_REL_ERR: f64 = 1e-6;
const GRID_TOLERANCE_RATIO: f64 = 1.0;
const LOO_ABS_DIFF: f64 = 0.5;
const LOO_MAX_HIGH_K: usize = 1;
const CALIBRATED_SETS: usize = 48;
const RHAT_BAND: f64 = 0.01;
const SE_MULTIPLE: f64 = 2.0;
const SIGN_AGREEMENT: usize = 7;
const PRED_P: f64 = 0.257;
const PRED_DRAWS: usize = 4000;
const MC_SIGMAS: f64 = 4.0;
const THREAD_COUNTS: [&str; 3] = ["1", "2", "4"];

struct Outcome {
    passed: bool,
    detail: String,
    /// Failure caused by missing input, not by the implementation.
    unavailable: bool,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
            unavailable: false,
        }
    }

    fn unavailable(detail: impl Into<String>) -> Self {
        Self {
            passed: false,
            detail: detail.into(),
            unavailable: true,
        }
    }
}

fn gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    for link in [LinkKind::Logit, LinkKind::Probit] {
        worst = worst.max(check_gradients(link, 1).unwrap().measured);
    }
    Outcome::new(worst < GRADIENT_REL_ERR, format!("max relative error {worst:.2e} (< {GRADIENT_REL_ERR:e})"))
}

fn sampler_vs_grid() -> Outcome {
    let c = check_sampler_vs_grid(1).unwrap();
    Outcome::new(
        c.measured < GRID_TOLERANCE_RATIO,
        format!("worst error / max(0.05, 4 MCSE) = {:.3}; {}", c.measured, c.detail),
    )
}

fn psis_vs_exact() -> Outcome {
    let c = check_psis_vs_exact(1).unwrap();
    let high_k: usize = c.detail.split(", ").nth(2).and_then(|s| s.split(' ').next()).unwrap().parse().unwrap();
    Outcome::new(
        c.measured < LOO_ABS_DIFF && high_k <= LOO_MAX_HIGH_K,
        format!("|psis - exact| = {:.3} (< {LOO_ABS_DIFF}); {}", c.measured, c.detail),
    )
}

fn calibration() -> Outcome {
    let c = check_diagnostic_calibration(1).unwrap();
    let all_shifted = c.detail.ends_with("50/50 shifted sets flagged");
    Outcome::new(
        c.measured as usize >= CALIBRATED_SETS && all_shifted,
        format!("{} (need >= {CALIBRATED_SETS}/50 and 50/50)", c.detail),
    )
}

fn dataset() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("BANK_MARKETING_CSV") {
        return Some(PathBuf::from(p));
    }
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/bank-additional-full.csv");
    p.exists().then_some(p)
}

struct RealFits {
    _dir: tempfile::TempDir,
    data: PathBuf,
    logit: PathBuf,
    probit: PathBuf,
}

fn real_fits() -> Result<RealFits, String> {
    let data = dataset().ok_or("dataset unavailable: set BANK_MARKETING_CSV or add data/bank-additional-full.csv")?;
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for link in ["logit", "probit"] {
        let run = dir.path().join(link);
        let o = bayesbin(&["fit", "--data", data.to_str().unwrap(), "--link", link, "--out", run.to_str().unwrap(), "--format", "json"]);
        if !o.status.success() {
            return Err(format!("{link} fit failed: {}", stderr(&o).trim()));
        }
        runs.push(run);
    }
    let probit = runs.pop().unwrap();
    let logit = runs.pop().unwrap();
    Ok(RealFits {
        _dir: dir,
        data,
        logit,
        probit,
    })
}

fn summary(run: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap()
}

fn convergence(fits: &Result<RealFits, String>) -> Outcome {
    let fits = match fits {
        Ok(f) => f,
        Err(e) => return Outcome::unavailable(e.clone()),
    };
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for run in [&fits.logit, &fits.probit] {
        for p in summary(run)["parameters"].as_array().unwrap() {
            count += 1;
            worst = worst.max(p["rhat"].as_f64().map_or(f64::INFINITY, |r| (r - 1.0).abs()));
        }
    }
    Outcome::new(
        worst <= RHAT_BAND && count == 42,
        format!("max |Rhat - 1| = {worst:.4} over {count} parameters (<= {RHAT_BAND})"),
    )
}

fn comparison_direction(fits: &Result<RealFits, String>) -> Outcome {
    let fits = match fits {
        Ok(f) => f,
        Err(e) => return Outcome::unavailable(e.clone()),
    };
    let o = bayesbin(&[
        "compare",
        fits.logit.join("chains.csv").to_str().unwrap(),
        fits.probit.join("chains.csv").to_str().unwrap(),
        "--data",
        fits.data.to_str().unwrap(),
        "--format",
        "json",
    ]);
    if !o.status.success() {
        return Outcome::new(false, format!("compare failed: {}", stderr(&o).trim()));
    }
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["comparison"]["rows"].as_array().unwrap();
    let get = |r: &Value, k: &str| r[k].as_f64().unwrap();
    let reference_ok = rows[0]["model"] == "logit_model" && get(&rows[0], "elpd_diff") == 0.0 && get(&rows[0], "se_diff") == 0.0;
    let (diff, se) = (get(&rows[1], "elpd_diff"), get(&rows[1], "se_diff"));
    Outcome::new(
        reference_ok && diff < -SE_MULTIPLE * se,
        format!("reference {}, probit elpd_diff {diff:.1} se_diff {se:.1}", rows[0]["model"]),
    )
}

fn coefficient_signs(fits: &Result<RealFits, String>) -> Outcome {
    let fits = match fits {
        Ok(f) => f,
        Err(e) => return Outcome::unavailable(e.clone()),
    };
    let expected = [
        ("default", -1.0),
        ("contact", -1.0),
        ("month", -1.0),
        ("nr.employed", -1.0),
        ("age", 1.0),
        ("marital", 1.0),
        ("education", 1.0),
        ("duration", 1.0),
    ];
    let params = summary(&fits.logit)["parameters"].as_array().unwrap().clone();
    let mut agree = 0;
    let mut detail = Vec::new();
    for (name, sign) in expected {
        let p = params.iter().find(|p| p["name"] == name).unwrap();
        let mean = p["estimate"].as_f64().unwrap();
        let excludes_zero = p["ci_lower"].as_f64().unwrap() > 0.0 || p["ci_upper"].as_f64().unwrap() < 0.0;
        if mean * sign > 0.0 {
            agree += 1;
        } else {
            detail.push(format!("{name} {mean:+.3}{}", if excludes_zero { " (CI excludes 0)" } else { "" }));
        }
    }
    Outcome::new(
        agree >= SIGN_AGREEMENT,
        format!("{agree}/8 signs agree (need {SIGN_AGREEMENT}); flipped: [{}]", detail.join(", ")),
    )
}

fn prediction_contract() -> Outcome {
    // known p on every draw: outcome predictions are Bernoulli(p) samples
    let eta = (PRED_P / (1.0 - PRED_P)).ln();
    let chains = 4;
    let mut values = Array3::zeros((chains, PRED_DRAWS / chains, 2));
    values.slice_mut(ndarray::s![.., .., 0]).fill(eta);
    let draws = PosteriorDraws {
        draws: values,
        param_names: vec!["Intercept".into(), "x".into()],
        divergence_count: vec![0; chains],
        divergent_iterations: vec![vec![]; chains],
        step_size: vec![1.0; chains],
        accept_rate: vec![0.8; chains],
        max_depth_hits: vec![0; chains],
        n_leapfrog: vec![0; chains],
        seed: 0,
    };
    let rows = DesignMatrix::from_values(Array2::from_shape_fn((20, 1), |(i, _)| i as f64 - 10.0), vec!["x".into()]).unwrap();
    let preds = posterior_predict(&draws, LinkKind::Logit, &rows.meta, &rows, Scale::Outcome, 1).unwrap();
    let s = PRED_DRAWS as f64;
    let sd = (PRED_P * (1.0 - PRED_P)).sqrt();
    let mean_tol = MC_SIGMAS * sd / s.sqrt();
    // delta method for the sd of a Bernoulli sample
    let sd_tol = MC_SIGMAS * (1.0 - 2.0 * PRED_P).abs() / (2.0 * sd) * sd / s.sqrt();
    let mut bound_ok = true;
    let mut pattern_ok = true;
    let mut worst = (0.0f64, 0.0f64);
    for r in &preds {
        bound_ok &= r.est_error.powi(2) <= r.estimate * (1.0 - r.estimate) + 1.0 / s;
        let own = (r.estimate * (1.0 - r.estimate)).sqrt();
        pattern_ok &= (r.estimate - PRED_P).abs() < mean_tol
            && (r.est_error - own).abs() < sd_tol
            && (r.est_error - sd).abs() < sd_tol + mean_tol
            && r.q2_5 == 0.0
            && r.q97_5 == 1.0;
        worst = (worst.0.max((r.estimate - PRED_P).abs()), worst.1.max((r.est_error - sd).abs()));
    }

    // bound on rows predicted from a real fit
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path(), "bank.csv", 300, 21);
    let run = dir.path().join("run");
    let fitted = fit(&data, &run, &[]);
    let new = write_csv(dir.path(), "new.csv", 25, 22);
    let o = bayesbin(&["predict", run.join("chains.csv").to_str().unwrap(), "--data", new.to_str().unwrap(), "--format", "json"]);
    let fitted_ok = fitted.status.success() && o.status.success();
    // QUICK settings: 2 chains of 150 draws
    let fitted_s = 300.0;
    if fitted_ok {
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        for r in v.as_array().unwrap() {
            let (e, se) = (r["estimate"].as_f64().unwrap(), r["est_error"].as_f64().unwrap());
            bound_ok &= se * se <= e * (1.0 - e) + 1.0 / fitted_s;
        }
    }
    Outcome::new(
        bound_ok && pattern_ok && fitted_ok,
        format!(
            "bound holds: {bound_ok}; p = {PRED_P}: |estimate - p| <= {:.4} (tol {mean_tol:.4}), |est_error - {sd:.3}| <= {:.4}, quantiles 0/1: {pattern_ok}",
            worst.0, worst.1
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path(), "bank.csv", 200, 31);
    let new = write_csv(dir.path(), "new.csv", 10, 32);
    let run = dir.path().join("run");
    let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
    let runs: Vec<&str> = THREAD_COUNTS.iter().copied().chain(["4"]).collect();
    for threads in &runs {
        let mut args = vec!["fit", "--data", data.to_str().unwrap(), "--out", run.to_str().unwrap(), "--holdout", "7"];
        args.extend_from_slice(&QUICK);
        let env = [("RAYON_NUM_THREADS", *threads)];
        let o = bayesbin_env(&args, &env);
        if !o.status.success() {
            return Outcome::new(false, format!("fit failed: {}", stderr(&o).trim()));
        }
        let chains = run.join("chains.csv");
        let p = bayesbin_env(&["predict", chains.to_str().unwrap(), "--data", new.to_str().unwrap(), "--format", "json"], &env);
        let mut outputs = vec![o.stdout, p.stdout];
        for f in ["chains.csv", "summary.txt", "summary.json", "design.json", "balance.json", "holdout.csv", "config.json"] {
            outputs.push(std::fs::read(run.join(f)).unwrap());
        }
        seen.push(outputs);
    }
    let identical = seen.windows(2).all(|w| w[0] == w[1]);
    Outcome::new(identical, format!("{} runs with threads {:?}: outputs identical = {identical}", runs.len(), runs))
}

fn main() -> ExitCode {
    let mut blocking = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status} criterion {n} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.passed && !o.unavailable {
            blocking += 1;
        }
    };
    report(1, "gradient correctness", &mut gradients);
    report(2, "sampler vs quadrature", &mut sampler_vs_grid);
    report(3, "PSIS-LOO vs exact LOO", &mut psis_vs_exact);
    report(4, "diagnostic calibration", &mut calibration);
    let fits = real_fits();
    report(5, "real-data convergence", &mut || convergence(&fits));
    report(6, "real-data comparison direction", &mut || comparison_direction(&fits));
    report(7, "real-data coefficient signs", &mut || coefficient_signs(&fits));
    report(8, "prediction contract", &mut prediction_contract);
    report(9, "end-to-end determinism", &mut determinism);
    if blocking == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
