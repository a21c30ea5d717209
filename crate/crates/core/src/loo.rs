//! Pointwise log-likelihood, Pareto-smoothed importance sampling and
//! leave-one-out model comparison.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng::mix64;
use crate::sampler::{self, PosteriorDraws, SamplerConfig};
use crate::special::log_sum_exp;

/// Pareto-k above which a LOO term is flagged as unreliable.
pub const PARETO_K_WARN: f64 = 0.7;

/// Fewer draws than this skip tail fitting.
pub const MIN_DRAWS_FOR_SMOOTHING: usize = 25;

/// Largest data set `exact_loo` will refit.
pub const EXACT_LOO_MAX_N: usize = 500;

/// Per-draw, per-observation log predictive density (draws × observations).
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    pub values: Array2<f64>,
    pub fingerprint: u64,
}

impl LogLikMatrix {
    pub fn n_draws(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.values.ncols()
    }
}

/// Order-independent identity of an observation set.
///
/// Hashes each observation's source row and target, sums the hashes so row
/// order is irrelevant, and folds in the row and column counts.
pub fn dataset_fingerprint(design: &DesignMatrix, target: &[f64]) -> u64 {
    let rows = design
        .provenance
        .iter()
        .zip(target)
        .fold(0u64, |acc, (&p, &y)| acc.wrapping_add(mix64(mix64(p as u64) ^ (y as u64))));
    mix64(rows ^ mix64(target.len() as u64) ^ mix64((design.ncols() as u64) << 32))
}

/// Log-likelihood of every observation under every pooled draw.
pub fn pointwise_loglik(draws: &PosteriorDraws, model: &ModelSpec<'_>) -> Result<LogLikMatrix> {
    if draws.n_params() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "draws have {} parameters, model has {}",
            draws.n_params(),
            model.dim()
        )));
    }
    let rows: Vec<ArrayView1<f64>> = draws.pooled().collect();
    let n = model.n_obs();
    let per_draw: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|beta| -> Result<Vec<f64>> {
            let eta = model.linear_predictor(&beta.to_vec())?;
            Ok(eta
                .iter()
                .zip(model.target)
                .map(|(&e, &y)| model.link.log_prob(e, y == 1.0))
                .collect())
        })
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_vec((rows.len(), n), per_draw.into_iter().flatten().collect())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok(LogLikMatrix {
        values,
        fingerprint: dataset_fingerprint(model.design, model.target),
    })
}

/// Tail length for `s` draws.
pub fn pareto_tail_len(s: usize) -> usize {
    let by_fraction = (0.2 * s as f64).ceil() as usize;
    let by_root = (3.0 * (s as f64).sqrt()).ceil() as usize;
    by_fraction.min(by_root)
}

/// Generalized Pareto fit (Zhang and Stephens, with a weakly informative
/// prior on k) to ascending, positive exceedances. Returns `(k, sigma)`.
fn gpd_fit(x: &[f64]) -> (f64, f64) {
    const PRIOR: f64 = 3.0;
    const MIN_GRID_POINTS: usize = 30;
    let n = x.len();
    let m = MIN_GRID_POINTS + (n as f64).sqrt().floor() as usize;
    let x_star = x[((n as f64) / 4.0 + 0.5).floor() as usize - 1];
    let x_max = x[n - 1];

    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / PRIOR / x_star)
        .collect();
    let profile: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let a = -t;
            let k = x.iter().map(|&v| (a * v).ln_1p()).sum::<f64>() / n as f64;
            let l = n as f64 * ((a / k).ln() - k - 1.0);
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        })
        .collect();
    let norm = log_sum_exp(&profile);
    let theta_hat: f64 = theta.iter().zip(&profile).map(|(t, l)| t * (l - norm).exp()).sum();

    let k = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / n as f64;
    let sigma = -k / theta_hat;
    // shrink toward 0.5 with ten pseudo-observations
    let a = 10.0;
    let k = k * n as f64 / (n as f64 + a) + a * 0.5 / (n as f64 + a);
    (if k.is_nan() { f64::INFINITY } else { k }, sigma)
}

/// Generalized Pareto quantile.
fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NAN;
    }
    sigma * (-k * (-p).ln_1p()).exp_m1() / k
}

/// Pareto-smooth one vector of raw log importance weights.
///
/// The largest `pareto_tail_len(S)` weights are replaced by expected order
/// statistics of a generalized Pareto fitted to their exceedances over the
/// next-largest weight, and every weight is truncated at the raw maximum.
/// Returns the smoothed weights and the fitted tail shape `k`, which is NaN
/// when the tail could not be fitted (too few draws or a flat tail), in
/// which case the weights pass through unchanged.
pub fn psis_smooth(raw_log_weights: &[f64]) -> (Vec<f64>, f64) {
    let s = raw_log_weights.len();
    if s < MIN_DRAWS_FOR_SMOOTHING || raw_log_weights.iter().any(|w| !w.is_finite()) {
        return (raw_log_weights.to_vec(), f64::NAN);
    }
    let max = raw_log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = raw_log_weights.iter().map(|w| w - max).collect();

    let tail_len = pareto_tail_len(s);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let tail_ids = &order[s - tail_len..];
    let tail: Vec<f64> = tail_ids.iter().map(|&i| lw[i]).collect();
    if (tail[tail_len - 1] - tail[0]).abs() < f64::EPSILON / 100.0 {
        return (raw_log_weights.to_vec(), f64::NAN);
    }
    let cutoff = lw[order[s - tail_len - 1]];
    let exp_cutoff = cutoff.exp();
    let exceed: Vec<f64> = tail.iter().map(|v| v.exp() - exp_cutoff).collect();
    let (k, sigma) = gpd_fit(&exceed);

    if k.is_finite() {
        for (j, &i) in tail_ids.iter().enumerate() {
            let p = (j as f64 + 0.5) / tail_len as f64;
            lw[i] = (gpd_quantile(p, k, sigma) + exp_cutoff).ln();
        }
    }
    let mut out = raw_log_weights.to_vec();
    for &i in tail_ids {
        out[i] = lw[i].min(0.0) + max;
    }
    (out, if k.is_finite() { k } else { f64::NAN })
}

/// PSIS-LOO estimate for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub elpd_loo: f64,
    pub se_elpd: f64,
    /// In-sample log pointwise predictive density, an upper bound on `elpd_loo`.
    pub lpd: f64,
    pub pointwise_elpd: Vec<f64>,
    /// NaN (serialized as null) when the tail could not be fitted.
    #[serde(with = "nan_as_null")]
    pub pareto_k: Vec<f64>,
    pub n_high_k: usize,
    pub fingerprint: u64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| if x.is_nan() { None } else { Some(*x) })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// `√(N · sample variance)`, zero for fewer than two values.
fn sum_se(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (n * var).sqrt()
}

impl LooResult {
    /// Assemble aggregates from pointwise terms.
    pub fn from_pointwise(pointwise_elpd: Vec<f64>, pareto_k: Vec<f64>, lpd: f64, fingerprint: u64) -> Self {
        Self {
            elpd_loo: pointwise_elpd.iter().sum(),
            se_elpd: sum_se(&pointwise_elpd),
            lpd,
            n_high_k: pareto_k.iter().filter(|&&k| k > PARETO_K_WARN).count(),
            pointwise_elpd,
            pareto_k,
            fingerprint,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.pointwise_elpd.len()
    }
}

/// PSIS-LOO from a log-likelihood matrix.
pub fn psis_loo(loglik: &LogLikMatrix) -> Result<LooResult> {
    let s = loglik.n_draws();
    if s == 0 {
        return Err(Error::TooFewDraws(0));
    }
    if loglik.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    let terms: Vec<(f64, f64, f64)> = (0..loglik.n_obs())
        .into_par_iter()
        .map(|i| {
            let ll: Vec<f64> = loglik.values.column(i).to_vec();
            let raw: Vec<f64> = ll.iter().map(|v| -v).collect();
            let (lw, k) = psis_smooth(&raw);
            let norm = log_sum_exp(&lw);
            let weighted: Vec<f64> = lw.iter().zip(&ll).map(|(w, l)| w - norm + l).collect();
            let lpd_i = log_sum_exp(&ll) - (s as f64).ln();
            (log_sum_exp(&weighted), k, lpd_i)
        })
        .collect();
    let pointwise = terms.iter().map(|t| t.0).collect();
    let k = terms.iter().map(|t| t.1).collect();
    let lpd = terms.iter().map(|t| t.2).sum();
    Ok(LooResult::from_pointwise(pointwise, k, lpd, loglik.fingerprint))
}

/// One row of a model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub elpd_loo: f64,
    pub elpd_diff: f64,
    pub se_diff: f64,
}

/// Models ordered best first; the first row is the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooComparison {
    pub rows: Vec<ComparisonRow>,
}

/// Rank models by `elpd_loo` and difference each against the best.
pub fn compare(results: &[(String, LooResult)]) -> Result<LooComparison> {
    let Some((_, first)) = results.first() else {
        return Err(Error::EmptyInput);
    };
    for (_, r) in results {
        if r.fingerprint != first.fingerprint || r.n_obs() != first.n_obs() {
            return Err(Error::DatasetMismatch(first.fingerprint, r.fingerprint));
        }
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        results[b]
            .1
            .elpd_loo
            .total_cmp(&results[a].1.elpd_loo)
            .then_with(|| results[a].0.cmp(&results[b].0))
    });
    let best = &results[order[0]].1;
    let rows = order
        .iter()
        .map(|&m| {
            let (name, r) = &results[m];
            let diffs: Vec<f64> = r
                .pointwise_elpd
                .iter()
                .zip(&best.pointwise_elpd)
                .map(|(a, b)| a - b)
                .collect();
            ComparisonRow {
                model: name.clone(),
                elpd_loo: r.elpd_loo,
                elpd_diff: diffs.iter().sum(),
                se_diff: sum_se(&diffs),
            }
        })
        .collect();
    Ok(LooComparison { rows })
}

/// Brute-force LOO: refit without each observation and score it.
///
/// Each refit uses `config` unchanged, so the result is deterministic.
pub fn exact_loo_pointwise(model: &ModelSpec<'_>, config: &SamplerConfig) -> Result<Vec<f64>> {
    let n = model.n_obs();
    if n > EXACT_LOO_MAX_N {
        return Err(Error::TooLarge(n));
    }
    (0..n)
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let design = DesignMatrix {
                values: model.design.values.select(ndarray::Axis(0), &keep),
                meta: model.design.meta.clone(),
                provenance: keep.iter().map(|&r| model.design.provenance[r]).collect(),
            };
            let target: Vec<f64> = keep.iter().map(|&r| model.target[r]).collect();
            let reduced = ModelSpec::new(model.link, model.prior, &design, &target)?;
            let draws = sampler::sample(&reduced, config)?;

            let x = model.design.values.row(i);
            let y = model.target[i] == 1.0;
            let ll: Vec<f64> = draws
                .pooled()
                .map(|beta| {
                    let eta = beta[0] + beta.slice(ndarray::s![1..]).dot(&x);
                    model.link.log_prob(eta, y)
                })
                .collect();
            Ok(log_sum_exp(&ll) - (ll.len() as f64).ln())
        })
        .collect()
}

/// Sum of [`exact_loo_pointwise`].
pub fn exact_loo(model: &ModelSpec<'_>, config: &SamplerConfig) -> Result<f64> {
    Ok(exact_loo_pointwise(model, config)?.iter().sum())
}
