//! Posterior summaries and convergence diagnostics.
//!
//! Rhat and the effective sample sizes follow the rank-normalized split-chain
//! convention: each chain is split in half, draws are replaced by normal
//! scores of their pooled ranks, and ESS comes from Geyer's initial monotone
//! sequence over the multi-chain autocorrelation estimate.

use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::special::normal_quantile;

/// Reported ESS never exceeds this multiple of the pooled draw count.
pub const ESS_CAP_FACTOR: f64 = 2.0;

/// Empirical quantile, linear interpolation between order statistics at `(n - 1) p`.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("quantile level {p} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// How autocovariances are computed. Both give the same numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AutocovMethod {
    #[default]
    Direct,
    Fft,
}

fn check_chains(chains: &[Vec<f64>]) -> Result<()> {
    let Some(first) = chains.first() else {
        return Err(Error::TooFewDraws(0));
    };
    if first.len() < 4 {
        return Err(Error::TooFewDraws(first.len()));
    }
    if chains.iter().any(|c| c.len() != first.len()) {
        return Err(Error::DimensionMismatch("chains have different lengths".into()));
    }
    let v0 = first[0];
    if chains.iter().flatten().all(|&v| v == v0) || chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate);
    }
    Ok(())
}

/// Halve every chain; with an odd length the middle draw is dropped.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [c[..half].to_vec(), c[c.len() - half..].to_vec()]
        })
        .collect()
}

/// Replace every draw by the normal score of its pooled average rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = pooled.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // 1-based average rank for the tie block i..=j
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let denom = s as f64 + 0.25;
    let mut out = Vec::with_capacity(chains.len());
    let mut offset = 0;
    for c in chains {
        out.push(
            ranks[offset..offset + c.len()]
                .iter()
                .map(|r| normal_quantile((r - 0.375) / denom))
                .collect(),
        );
        offset += c.len();
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let b = if chains.len() > 1 { n * sample_variance(&means) } else { 0.0 };
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Rank-normalized split Rhat of one parameter.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_chains(chains)?;
    Ok(rhat_basic(&rank_normalize(&split_chains(chains))))
}

/// Biased (divide-by-n) autocovariance at lags `0..n`.
fn autocovariance(x: &[f64], method: AutocovMethod, planner: &mut Option<FftCache>) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    match method {
        AutocovMethod::Direct => (0..n)
            .map(|lag| {
                centered[..n - lag]
                    .iter()
                    .zip(&centered[lag..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / n as f64
            })
            .collect(),
        AutocovMethod::Fft => {
            let len = (2 * n).next_power_of_two();
            let cache = planner.get_or_insert_with(|| FftCache::new(len));
            if cache.len != len {
                *cache = FftCache::new(len);
            }
            let mut buf: Vec<Complex<f64>> = centered
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                .take(len)
                .collect();
            cache.forward.process(&mut buf);
            for c in buf.iter_mut() {
                *c = Complex::new(c.norm_sqr(), 0.0);
            }
            cache.inverse.process(&mut buf);
            buf[..n].iter().map(|c| c.re / (len as f64 * n as f64)).collect()
        }
    }
}

struct FftCache {
    len: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl FftCache {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

/// Multi-chain ESS of the chains as given (no splitting or transform).
fn ess_basic(chains: &[Vec<f64>], method: AutocovMethod) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let mut cache = None;
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c, method, &mut cache)).collect();
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_acov = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;

    let mean_var = mean_acov(0) * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_variance(&chain_means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho_at = |t: usize| 1.0 - (mean_var - mean_acov(t)) / var_plus;

    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    rho[1] = rho_at(1);
    let mut rho_even = 1.0;
    let mut rho_odd = rho[1];
    let mut t = 0;
    while t + 5 < n && (rho_even + rho_odd) > 0.0 {
        t += 2;
        rho_even = rho_at(t);
        rho_odd = rho_at(t + 1);
        if rho_even + rho_odd >= 0.0 {
            rho[t] = rho_even;
            rho[t + 1] = rho_odd;
        }
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t] = rho_even;
    }
    // initial monotone sequence
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        if rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1] {
            rho[t] = (rho[t - 2] + rho[t - 1]) / 2.0;
            rho[t + 1] = rho[t];
        }
    }
    let s = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t];
    let tau = tau.max(1.0 / s.log10());
    (s / tau).min(ESS_CAP_FACTOR * s)
}

/// Bulk ESS: rank-normalized split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64> {
    ess_bulk_with(chains, AutocovMethod::Direct)
}

pub fn ess_bulk_with(chains: &[Vec<f64>], method: AutocovMethod) -> Result<f64> {
    check_chains(chains)?;
    Ok(ess_basic(&rank_normalize(&split_chains(chains)), method))
}

/// Tail ESS: the smaller ESS of the 5% and 95% quantile indicators.
pub fn ess_tail(chains: &[Vec<f64>]) -> Result<f64> {
    ess_tail_with(chains, AutocovMethod::Direct)
}

pub fn ess_tail_with(chains: &[Vec<f64>], method: AutocovMethod) -> Result<f64> {
    check_chains(chains)?;
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let split = split_chains(chains);
    let mut out = f64::INFINITY;
    for p in [0.05, 0.95] {
        let q = quantile_sorted(&pooled, p);
        let indicator: Vec<Vec<f64>> = split
            .iter()
            .map(|c| c.iter().map(|&v| if v <= q { 1.0 } else { 0.0 }).collect())
            .collect();
        let flat = indicator.iter().flatten();
        let first = indicator[0][0];
        if flat.clone().all(|&v| v == first) {
            return Err(Error::Degenerate);
        }
        out = out.min(ess_basic(&indicator, method));
    }
    Ok(out)
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub estimate: f64,
    pub est_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// `None` when the draws are degenerate.
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub ess_tail: Option<f64>,
}

fn degenerate_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) | Err(Error::Degenerate) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Summaries of a single parameter's chains.
pub fn summarize_param(name: &str, chains: &[Vec<f64>]) -> Result<ParamSummary> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::EmptyInput);
    }
    let estimate = mean(&pooled);
    let est_error = if pooled.len() > 1 { sample_variance(&pooled).sqrt() } else { 0.0 };
    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    Ok(ParamSummary {
        name: name.to_string(),
        estimate,
        est_error,
        ci_lower: quantile_sorted(&sorted, 0.025),
        ci_upper: quantile_sorted(&sorted, 0.975),
        rhat: degenerate_as_none(split_rhat(chains))?,
        ess_bulk: degenerate_as_none(ess_bulk(chains))?,
        ess_tail: degenerate_as_none(ess_tail(chains))?,
    })
}

/// One summary per parameter, in `param_names` order.
pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<ParamSummary>> {
    use rayon::prelude::*;
    (0..draws.n_params())
        .into_par_iter()
        .map(|p| summarize_param(&draws.param_names[p], &draws.param_chains(p)))
        .collect()
}
