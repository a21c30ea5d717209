//! Brute-force reference computations and the verification suite.
//!
//! The grid posterior and the finite-difference gradient use their own naive
//! loops and do not call the model code they are used to check.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::diagnostics::{ess_bulk, ess_tail, split_rhat, summarize_param};
use crate::error::{Error, Result};
use crate::loo::{exact_loo, pointwise_loglik, psis_loo};
use crate::model::{LinkKind, ModelSpec, PriorSpec};
use crate::rng::substream;
use crate::sampler::{sample, SamplerConfig};

/// Upper limit on the number of grid points.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Largest parameter count (intercept included) the grid oracle accepts.
pub const MAX_GRID_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lower: f64,
    pub upper: f64,
    pub n_points: usize,
}

impl GridAxis {
    fn point(&self, j: usize) -> f64 {
        self.lower + j as f64 * (self.upper - self.lower) / (self.n_points - 1) as f64
    }

    fn widened(&self, factor: f64) -> Self {
        let center = 0.5 * (self.lower + self.upper);
        let half = 0.5 * (self.upper - self.lower) * factor;
        Self {
            lower: center - half,
            upper: center + half,
            n_points: self.n_points,
        }
    }
}

/// Tensor-product grid, one axis per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// Same symmetric axis for every parameter.
    pub fn centered(center: &[f64], half_width: f64, n_points: usize) -> Self {
        Self {
            axes: center
                .iter()
                .map(|&c| GridAxis {
                    lower: c - half_width,
                    upper: c + half_width,
                    n_points,
                })
                .collect(),
        }
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(|a| a.n_points).product()
    }

    fn validate(&self) -> Result<()> {
        for a in &self.axes {
            if a.n_points < 3 || !(a.upper > a.lower) || !a.lower.is_finite() || !a.upper.is_finite() {
                return Err(Error::InvalidConfig(format!("bad grid axis {a:?}")));
            }
        }
        if self.axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.n_points)).is_none_or(|n| n > MAX_GRID_POINTS) {
            return Err(Error::InvalidConfig(format!("grid exceeds {MAX_GRID_POINTS} points")));
        }
        Ok(())
    }
}

/// Posterior moments from quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMoments {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Largest moment change when the grid bounds were widened by 50%.
    pub widening_drift: f64,
}

/// Allowed moment drift under widening.
pub const GRID_DRIFT_TOLERANCE: f64 = 1e-3;

fn naive_log_posterior(model: &ModelSpec<'_>, beta: &[f64]) -> f64 {
    let x = &model.design.values;
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut eta = beta[0];
        for j in 0..x.ncols() {
            eta += beta[j + 1] * x[[i, j]];
        }
        let p = match model.link {
            LinkKind::Logit => 1.0 / (1.0 + (-eta).exp()),
            LinkKind::Probit => 0.5 * libm::erfc(-eta / std::f64::consts::SQRT_2),
        };
        total += if model.target[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    let pr = &model.prior;
    for (j, b) in beta.iter().enumerate() {
        let (m, s) = if j == 0 {
            (pr.intercept_mean, pr.intercept_sd)
        } else {
            (pr.slope_mean, pr.slope_sd)
        };
        total += -0.5 * ((b - m) / s).powi(2) - s.ln();
    }
    total
}

/// Scaled running sums: `exp(max) * (s0, s1, s2)` are Σw, Σwθ, Σwθ².
#[derive(Clone)]
struct Block {
    max: f64,
    s0: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Block {
    fn empty(d: usize) -> Self {
        Self {
            max: f64::NEG_INFINITY,
            s0: 0.0,
            s1: vec![0.0; d],
            s2: vec![0.0; d],
        }
    }

    fn rescale(&mut self, max: f64) {
        if self.max == f64::NEG_INFINITY {
            self.max = max;
            return;
        }
        let f = (self.max - max).exp();
        self.s0 *= f;
        self.s1.iter_mut().for_each(|v| *v *= f);
        self.s2.iter_mut().for_each(|v| *v *= f);
        self.max = max;
    }

    fn add(&mut self, lp: f64, theta: &[f64]) {
        if lp == f64::NEG_INFINITY {
            return;
        }
        if lp > self.max {
            self.rescale(lp);
        }
        let w = (lp - self.max).exp();
        self.s0 += w;
        for (j, t) in theta.iter().enumerate() {
            self.s1[j] += w * t;
            self.s2[j] += w * t * t;
        }
    }

    fn merge(mut self, mut other: Block) -> Block {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        self.rescale(max);
        other.rescale(max);
        self.s0 += other.s0;
        for j in 0..self.s1.len() {
            self.s1[j] += other.s1[j];
            self.s2[j] += other.s2[j];
        }
        self
    }
}

fn raw_moments(model: &ModelSpec<'_>, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = grid.axes.len();
    let total = grid.total_points();
    let first = grid.axes[0].n_points;
    let per_slice = total / first;
    // one block per first-axis value, merged in index order
    let blocks: Vec<Block> = (0..first)
        .into_par_iter()
        .map(|j0| {
            let mut block = Block::empty(d);
            let mut theta = vec![0.0; d];
            for t in 0..per_slice {
                theta[0] = grid.axes[0].point(j0);
                let mut rest = t;
                for a in (1..d).rev() {
                    let n = grid.axes[a].n_points;
                    theta[a] = grid.axes[a].point(rest % n);
                    rest /= n;
                }
                block.add(naive_log_posterior(model, &theta), &theta);
            }
            block
        })
        .collect();
    let sum = blocks.into_iter().fold(Block::empty(d), Block::merge);
    if !(sum.s0 > 0.0) || !sum.max.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    let mean: Vec<f64> = sum.s1.iter().map(|v| v / sum.s0).collect();
    let sd = sum
        .s2
        .iter()
        .zip(&mean)
        .map(|(v, m)| (v / sum.s0 - m * m).max(0.0).sqrt())
        .collect();
    Ok((mean, sd))
}

/// Posterior mean and sd of every parameter by tensor-grid quadrature.
///
/// The moments are recomputed on a grid with 50% wider bounds (same point
/// count); a change above `GRID_DRIFT_TOLERANCE` is an error.
pub fn grid_posterior_moments(model: &ModelSpec<'_>, grid: &GridSpec) -> Result<GridMoments> {
    if model.dim() > MAX_GRID_DIM {
        return Err(Error::DimensionTooHigh(model.dim()));
    }
    if grid.axes.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} axes, model has {} parameters",
            grid.axes.len(),
            model.dim()
        )));
    }
    grid.validate()?;
    let (mean, sd) = raw_moments(model, grid)?;
    let wide = GridSpec {
        axes: grid.axes.iter().map(|a| a.widened(1.5)).collect(),
    };
    let (mean_w, sd_w) = raw_moments(model, &wide)?;
    let drift = mean
        .iter()
        .zip(&mean_w)
        .chain(sd.iter().zip(&sd_w))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift >= GRID_DRIFT_TOLERANCE {
        return Err(Error::GridTooCoarse(drift));
    }
    Ok(GridMoments {
        mean,
        sd,
        widening_drift: drift,
    })
}

/// Central-difference gradient of `f` at `beta`.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, beta: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut x = beta.to_vec();
    let mut grad = Vec::with_capacity(beta.len());
    for j in 0..beta.len() {
        x[j] = beta[j] + h;
        let up = f(&x);
        x[j] = beta[j] - h;
        let down = f(&x);
        x[j] = beta[j];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Synthetic data set: standard-normal predictors and outcomes drawn from
/// the given link and coefficients.
pub fn synthetic_data(link: LinkKind, beta: &[f64], n: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
    let mut rng = substream(seed, 0x5359_4e54);
    let k = beta.len() - 1;
    let x = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|i| {
            let eta = beta[0] + (0..k).map(|j| beta[j + 1] * x[[i, j]]).sum::<f64>();
            if rng.random::<f64>() < link.probability(eta) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let names = (1..=k).map(|j| format!("x{j}")).collect();
    (DesignMatrix::from_values(x, names).expect("consistent names"), y)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, measured: f64, tolerance: f64, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured,
            tolerance,
            detail,
        }
    }
}

pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Analytic vs central-difference gradients at 100 random points, each on
/// a fresh random instance with n ≤ 50 rows and k ≤ 5 predictors.
///
/// The error at a point is `‖g - g_fd‖ / max(‖g_fd‖, 1)`; the check reports
/// the largest.
pub fn check_gradients(link: LinkKind, seed: u64) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for point in 0..100u64 {
        let mut rng = substream(seed, 0x4752_4144_0000 + point);
        let n = rng.random_range(1..=50);
        let k = rng.random_range(1..=5);
        let x = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let prior = PriorSpec {
            intercept_mean: rng.random_range(-2.0..2.0),
            intercept_sd: rng.random_range(0.5..5.0),
            slope_mean: rng.random_range(-1.0..1.0),
            slope_sd: rng.random_range(0.3..3.0),
        };
        let beta: Vec<f64> = (0..=k).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let design = DesignMatrix::from_values(x, (0..k).map(|j| format!("x{j}")).collect())?;
        let model = ModelSpec::new(link, prior, &design, &y)?;
        let mut analytic = vec![0.0; k + 1];
        model.log_posterior_and_gradient(&beta, &mut analytic)?;
        let numeric = finite_diff_gradient(|b| model.log_posterior_and_gradient(b, &mut vec![0.0; k + 1]).unwrap_or(f64::NAN), &beta, GRADIENT_STEP)?;
        let err = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(err / scale);
    }
    Ok(CheckResult::new(
        &format!("gradient_{}", link.name()),
        worst,
        GRADIENT_TOLERANCE,
        worst < GRADIENT_TOLERANCE,
        "max relative error over 100 random points".into(),
    ))
}

/// Default synthetic problem for sampler and LOO checks.
const CHECK_BETA: [f64; 2] = [-0.5, 1.2];
const CHECK_PRIOR: PriorSpec = PriorSpec {
    intercept_mean: 0.0,
    intercept_sd: 2.5,
    slope_mean: 0.0,
    slope_sd: 2.5,
};

/// Sampler moments vs grid quadrature on a 2-parameter logit with 50 rows.
/// Tolerance per moment is `max(0.05, 4 MCSE)`; the measured value is the
/// largest error as a fraction of its tolerance.
pub fn check_sampler_vs_grid(seed: u64) -> Result<CheckResult> {
    let (design, y) = synthetic_data(LinkKind::Logit, &CHECK_BETA, 50, seed);
    let model = ModelSpec::new(LinkKind::Logit, CHECK_PRIOR, &design, &y)?;
    let grid = grid_posterior_moments(&model, &GridSpec::centered(&[0.0, 0.0], 6.0, 401))?;
    let config = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    let draws = sample(&model, &config)?;
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for p in 0..2 {
        let chains = draws.param_chains(p);
        let s = summarize_param(&draws.param_names[p], &chains)?;
        let ess = s.ess_bulk.unwrap_or(1.0);
        let tol_mean = (4.0 * s.est_error / ess.sqrt()).max(0.05);
        let tol_sd = (4.0 * s.est_error / (2.0 * ess).sqrt()).max(0.05);
        let e_mean = (s.estimate - grid.mean[p]).abs();
        let e_sd = (s.est_error - grid.sd[p]).abs();
        worst = worst.max(e_mean / tol_mean).max(e_sd / tol_sd);
        detail.push(format!(
            "{}: mean {:.4} vs {:.4}, sd {:.4} vs {:.4}",
            s.name, s.estimate, grid.mean[p], s.est_error, grid.sd[p]
        ));
    }
    Ok(CheckResult::new("sampler_vs_grid", worst, 1.0, worst < 1.0, detail.join("; ")))
}

/// PSIS-LOO vs brute-force LOO on a 100-row 2-parameter logit.
/// Fails if they differ by 0.5 or more or two or more Pareto-k exceed 0.7.
pub fn check_psis_vs_exact(seed: u64) -> Result<CheckResult> {
    let (design, y) = synthetic_data(LinkKind::Logit, &CHECK_BETA, 100, seed);
    let model = ModelSpec::new(LinkKind::Logit, CHECK_PRIOR, &design, &y)?;
    let config = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    let draws = sample(&model, &config)?;
    let loo = psis_loo(&pointwise_loglik(&draws, &model)?)?;
    let exact = exact_loo(&model, &config)?;
    let diff = (loo.elpd_loo - exact).abs();
    Ok(CheckResult::new(
        "psis_vs_exact_loo",
        diff,
        0.5,
        diff < 0.5 && loo.n_high_k < 2,
        format!("psis {:.3}, exact {:.3}, {} k > 0.7", loo.elpd_loo, exact, loo.n_high_k),
    ))
}

/// Rhat and ESS on iid normal chain sets, and Rhat on location-shifted sets.
pub fn check_diagnostic_calibration(seed: u64) -> Result<CheckResult> {
    const SETS: u64 = 50;
    let iid = |set: u64, shift: f64| -> Vec<Vec<f64>> {
        let mut rng = substream(seed, 0x4449_4147_0000 + set);
        (0..4)
            .map(|c| {
                let offset = if c >= 2 { shift } else { 0.0 };
                (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal) + offset).collect()
            })
            .collect()
    };
    let mut good = 0;
    let mut shifted_ok = 0;
    for set in 0..SETS {
        let chains = iid(set, 0.0);
        let r = split_rhat(&chains)?;
        let b = ess_bulk(&chains)?;
        let t = ess_tail(&chains)?;
        let near = |e: f64| (e / 4000.0 - 1.0).abs() <= 0.15;
        if (0.99..=1.01).contains(&r) && near(b) && near(t) {
            good += 1;
        }
        if split_rhat(&iid(set, 5.0))? > 1.1 {
            shifted_ok += 1;
        }
    }
    Ok(CheckResult::new(
        "diagnostic_calibration",
        good as f64,
        48.0,
        good >= 48 && shifted_ok == SETS,
        format!("{good}/50 iid sets calibrated, {shifted_ok}/50 shifted sets flagged"),
    ))
}

/// Grid self-checks: prior-only moments, and flipping every outcome under a
/// zero-centered prior negates the posterior mean.
pub fn check_grid(seed: u64) -> Result<CheckResult> {
    let prior = PriorSpec {
        intercept_mean: 0.7,
        intercept_sd: 1.3,
        slope_mean: -0.4,
        slope_sd: 0.6,
    };
    let empty = DesignMatrix::from_values(Array2::zeros((0, 1)), vec!["x".into()])?;
    let none: [f64; 0] = [];
    let model = ModelSpec::new(LinkKind::Logit, prior, &empty, &none)?;
    let m = grid_posterior_moments(&model, &GridSpec::centered(&[0.0, 0.0], 8.0, 401))?;
    let prior_err = [m.mean[0] - 0.7, m.mean[1] + 0.4, m.sd[0] - 1.3, m.sd[1] - 0.6]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));

    let (design, y) = synthetic_data(LinkKind::Logit, &CHECK_BETA, 40, seed);
    let sym_prior = PriorSpec {
        intercept_mean: 0.0,
        ..CHECK_PRIOR
    };
    let flipped_y: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let grid = GridSpec::centered(&[0.0, 0.0], 6.0, 301);
    let a = grid_posterior_moments(&ModelSpec::new(LinkKind::Logit, sym_prior, &design, &y)?, &grid)?;
    let b = grid_posterior_moments(&ModelSpec::new(LinkKind::Logit, sym_prior, &design, &flipped_y)?, &grid)?;
    let sym_err = a.mean.iter().zip(&b.mean).fold(0.0f64, |acc, (p, q)| acc.max((p + q).abs()));
    let worst = prior_err.max(sym_err);
    Ok(CheckResult::new(
        "grid_self_checks",
        worst,
        1e-3,
        worst < 1e-3,
        format!("prior moments error {prior_err:.2e}, symmetry error {sym_err:.2e}"),
    ))
}

/// Every check, in a fixed order.
pub fn verify_suite(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_gradients(LinkKind::Logit, seed)?,
        check_gradients(LinkKind::Probit, seed)?,
        check_grid(seed)?,
        check_diagnostic_calibration(seed)?,
        check_sampler_vs_grid(seed)?,
        check_psis_vs_exact(seed)?,
    ])
}
