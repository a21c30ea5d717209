//! Text tables. JSON output serializes the same structs at full precision.

use std::fmt::Write;

use bayesbin::oracle::CheckResult;
use bayesbin::{ChainHeader, LooComparison, LooResult, ParamSummary, PosteriorDraws, PredictionRow};

/// Rhat above this value triggers the warning banner.
pub const RHAT_WARN: f64 = 1.01;

fn opt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "NA".into(),
    }
}

/// Warning lines for a fit, empty when nothing is flagged.
pub fn warnings(draws: &PosteriorDraws, summary: &[ParamSummary]) -> Vec<String> {
    let mut out = Vec::new();
    let divergent: usize = draws.divergence_count.iter().sum();
    if divergent > 0 {
        out.push(format!(
            "WARNING: {divergent} divergent transitions after warmup ({:.2}% of draws)",
            100.0 * draws.divergence_rate()
        ));
    }
    let high: Vec<&str> = summary
        .iter()
        .filter(|s| s.rhat.is_none_or(|r| r > RHAT_WARN))
        .map(|s| s.name.as_str())
        .collect();
    if !high.is_empty() {
        out.push(format!("WARNING: Rhat > {RHAT_WARN} or undefined for: {}", high.join(", ")));
    }
    out
}

/// Coefficient table with run details, as written to summary.txt.
pub fn summary_text(header: &ChainHeader, draws: &PosteriorDraws, summary: &[ParamSummary]) -> String {
    let mut s = String::new();
    for w in warnings(draws, summary) {
        writeln!(s, "{w}").unwrap();
    }
    let c = &header.config;
    writeln!(s, " Family: bernoulli").unwrap();
    writeln!(s, "  Links: {}", header.link).unwrap();
    writeln!(s, "  Model: {}", header.model_name).unwrap();
    writeln!(s, "   Data: {} observations", header.n_obs).unwrap();
    writeln!(
        s,
        "  Draws: {} chains, each with warmup = {}, draws = {}; total post-warmup draws = {}",
        header.n_chains,
        c.warmup,
        header.n_draws,
        header.n_chains * header.n_draws
    )
    .unwrap();
    writeln!(
        s,
        " Priors: Intercept ~ normal({}, {}), slopes ~ normal({}, {})",
        header.prior.intercept_mean, header.prior.intercept_sd, header.prior.slope_mean, header.prior.slope_sd
    )
    .unwrap();
    writeln!(s).unwrap();

    let width = summary.iter().map(|p| p.name.len()).max().unwrap_or(0).max(8);
    writeln!(
        s,
        "{:<width$} {:>9} {:>9} {:>9} {:>9} {:>5} {:>8} {:>8}",
        "", "Estimate", "Est.Error", "l-95% CI", "u-95% CI", "Rhat", "ESS Bulk", "ESS Tail"
    )
    .unwrap();
    for p in summary {
        writeln!(
            s,
            "{:<width$} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>5} {:>8} {:>8}",
            p.name,
            p.estimate,
            p.est_error,
            p.ci_lower,
            p.ci_upper,
            opt(p.rhat, 2),
            opt(p.ess_bulk, 0),
            opt(p.ess_tail, 0)
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    let divergent: usize = draws.divergence_count.iter().sum();
    writeln!(s, "Divergent transitions: {divergent} of {}", draws.n_total()).unwrap();
    let depth: usize = draws.max_depth_hits.iter().sum();
    writeln!(s, "Max tree depth hits: {depth} of {}", draws.n_total()).unwrap();
    let steps: Vec<String> = draws.step_size.iter().map(|v| format!("{v:.4}")).collect();
    writeln!(s, "Step sizes: {}", steps.join(", ")).unwrap();
    s
}

/// Model comparison, best model first.
pub fn comparison_text(cmp: &LooComparison, results: &[(String, LooResult)]) -> String {
    let width = cmp.rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut s = String::new();
    writeln!(s, "{:<width$} {:>9} {:>9}", "", "elpd_diff", "se_diff").unwrap();
    for r in &cmp.rows {
        writeln!(s, "{:<width$} {:>9.1} {:>9.1}", r.model, r.elpd_diff, r.se_diff).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "{:<width$} {:>10} {:>8} {:>8}", "", "elpd_loo", "se", "k > 0.7").unwrap();
    for r in &cmp.rows {
        let loo = &results.iter().find(|(n, _)| *n == r.model).expect("named result").1;
        writeln!(s, "{:<width$} {:>10.1} {:>8.1} {:>8}", r.model, loo.elpd_loo, loo.se_elpd, loo.n_high_k).unwrap();
    }
    s
}

/// Prediction rows; the scale is stated so outcome and probability tables
/// are never confused.
pub fn predictions_text(rows: &[PredictionRow], scale: bayesbin::Scale) -> String {
    let mut s = String::new();
    writeln!(s, "Scale: {scale}").unwrap();
    writeln!(s, "{:<8} {:>9} {:>9} {:>7} {:>7}", "", "Estimate", "Est.Error", "Q2.5", "Q97.5").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<8} {:>9.3} {:>9.3} {:>7.3} {:>7.3}",
            format!("[{},]", r.index),
            r.estimate,
            r.est_error,
            r.q2_5,
            r.q97_5
        )
        .unwrap();
    }
    s
}

pub fn verify_text(checks: &[CheckResult]) -> String {
    let mut s = String::new();
    for c in checks {
        writeln!(
            s,
            "{} {:<24} measured {:<12.4e} tolerance {:<10.3e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.detail
        )
        .unwrap();
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(s, "{} of {} checks passed", checks.len() - failed, checks.len()).unwrap();
    s
}
