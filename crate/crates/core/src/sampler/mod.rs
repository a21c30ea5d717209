//! Multi-chain NUTS sampling of a log-density.
//!
//! Each chain owns its generator, derived from `(seed, chain index)`, and
//! chains are assembled in index order, so output does not depend on how
//! many worker threads run them.

mod adapt;
mod nuts;

pub use adapt::{StepSizeAdapter, WindowedMetricAdapter};

use ndarray::Array3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, ModelSpec};
use crate::rng::{self, domain};
use nuts::Nuts;

/// A differentiable log-density over `dim()` unconstrained parameters.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log-density at `x` with its gradient written to `grad`.
    /// Points outside the support may return a non-finite value.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }
}

impl LogDensity for ModelSpec<'_> {
    fn dim(&self) -> usize {
        ModelSpec::dim(self)
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_and_gradient(x, grad).unwrap_or(f64::NAN)
    }

    fn param_names(&self) -> Vec<String> {
        ModelSpec::param_names(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 1000,
            n_draws: 1000,
            seed: 1,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.n_chains < 1 {
            Some("n_chains must be at least 1")
        } else if self.n_draws < 1 {
            Some("n_draws must be at least 1")
        } else if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            Some("target_accept must lie in (0, 1)")
        } else if !(1..=15).contains(&self.max_tree_depth) {
            Some("max_tree_depth must lie in [1, 15]")
        } else if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            Some("init_radius must be finite and non-negative")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::InvalidConfig(p.into())),
            None => Ok(()),
        }
    }
}

/// Post-warmup draws of every chain, with per-chain sampler statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// Shape `(n_chains, n_draws, n_params)`.
    pub draws: Array3<f64>,
    pub param_names: Vec<String>,
    pub divergence_count: Vec<usize>,
    /// Post-warmup iteration indices of divergent transitions, per chain.
    pub divergent_iterations: Vec<Vec<usize>>,
    pub step_size: Vec<f64>,
    pub accept_rate: Vec<f64>,
    /// Post-warmup transitions that stopped at `max_tree_depth`, per chain.
    pub max_depth_hits: Vec<usize>,
    /// Post-warmup leapfrog steps, per chain.
    pub n_leapfrog: Vec<usize>,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.draws.shape()[0]
    }

    pub fn n_draws(&self) -> usize {
        self.draws.shape()[1]
    }

    pub fn n_params(&self) -> usize {
        self.draws.shape()[2]
    }

    /// Total pooled draws.
    pub fn n_total(&self) -> usize {
        self.n_chains() * self.n_draws()
    }

    /// Per-chain sequences for parameter `param`.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains())
            .map(|c| self.draws.slice(ndarray::s![c, .., param]).to_vec())
            .collect()
    }

    /// Pooled parameter vectors, chain-major.
    pub fn pooled(&self) -> impl Iterator<Item = ndarray::ArrayView1<'_, f64>> + '_ {
        (0..self.n_chains()).flat_map(move |c| (0..self.n_draws()).map(move |d| self.draws.slice(ndarray::s![c, d, ..])))
    }

    pub fn divergence_rate(&self) -> f64 {
        self.divergence_count.iter().sum::<usize>() as f64 / self.n_total() as f64
    }

    /// More than 1% of post-warmup transitions diverged.
    pub fn divergences_flagged(&self) -> bool {
        self.divergence_rate() > 0.01
    }
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub divergent_iterations: Vec<usize>,
    pub step_size: f64,
    pub accept_rate: f64,
    pub max_depth_hits: usize,
    pub n_leapfrog: usize,
}

const INIT_ATTEMPTS: usize = 100;

/// Uniform starting point in `[-init_radius, init_radius]^dim` with a finite log-density.
pub fn initialize_chain<T: LogDensity + ?Sized>(target: &T, chain_index: usize, config: &SamplerConfig) -> Result<Coefficients> {
    let mut rng = rng::substream(config.seed, domain::CHAIN + 2 * chain_index as u64 + 1);
    let dim = target.dim();
    let mut grad = vec![0.0; dim];
    for _ in 0..INIT_ATTEMPTS {
        let x: Vec<f64> = if config.init_radius > 0.0 {
            (0..dim).map(|_| rng.random_range(-config.init_radius..=config.init_radius)).collect()
        } else {
            vec![0.0; dim]
        };
        let lp = target.log_density_and_gradient(&x, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(Coefficients::from_slice(&x));
        }
    }
    Err(Error::NonFiniteGradient { chain: chain_index })
}

/// Run a single chain: warmup with adaptation, then `n_draws` frozen-tuning draws.
pub fn sample_chain<T: LogDensity + ?Sized>(target: &T, chain_index: usize, config: &SamplerConfig) -> Result<ChainOutput> {
    config.validate()?;
    let start = initialize_chain(target, chain_index, config)?.to_vec();
    let rng = rng::substream(config.seed, domain::CHAIN + 2 * chain_index as u64);
    let mut nuts = Nuts::new(target, rng, config.max_tree_depth);
    let mut z = nuts.point_at(start);

    let fail = || Error::AdaptationFailure { chain: chain_index };
    if !nuts.init_step_size(&z) {
        return Err(fail());
    }
    let mut step_adapter = StepSizeAdapter::new(config.target_accept, nuts.step);
    let mut metric_adapter = WindowedMetricAdapter::new(target.dim(), config.n_warmup);

    for _ in 0..config.n_warmup {
        let t = nuts.transition(&mut z);
        nuts.step = step_adapter.learn(t.accept_stat);
        if metric_adapter.learn(&mut nuts.inv_metric, &z.q) {
            if !nuts.init_step_size(&z) {
                return Err(fail());
            }
            step_adapter.restart(nuts.step);
        }
        if !(nuts.step > 0.0 && nuts.step.is_finite()) {
            return Err(fail());
        }
    }
    if config.n_warmup > 0 {
        nuts.step = step_adapter.final_step();
        if !(nuts.step > 0.0 && nuts.step.is_finite()) {
            return Err(fail());
        }
    }

    let mut draws = Vec::with_capacity(config.n_draws);
    let mut divergent_iterations = Vec::new();
    let mut accept_sum = 0.0;
    let (mut max_depth_hits, mut n_leapfrog) = (0, 0);
    for it in 0..config.n_draws {
        let t = nuts.transition(&mut z);
        n_leapfrog += t.n_leapfrog;
        if t.depth >= config.max_tree_depth {
            max_depth_hits += 1;
        }
        if t.divergent {
            divergent_iterations.push(it);
        }
        accept_sum += t.accept_stat;
        if z.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { chain: chain_index });
        }
        draws.push(z.q.clone());
    }
    Ok(ChainOutput {
        draws,
        divergent_iterations,
        step_size: nuts.step,
        accept_rate: accept_sum / config.n_draws as f64,
        max_depth_hits,
        n_leapfrog,
    })
}

/// Run `config.n_chains` independent chains in parallel.
pub fn sample<T: LogDensity + ?Sized>(target: &T, config: &SamplerConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    let chains: Vec<ChainOutput> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| sample_chain(target, c, config))
        .collect::<Result<_>>()?;
    let dim = target.dim();
    let mut draws = Array3::zeros((config.n_chains, config.n_draws, dim));
    for (c, chain) in chains.iter().enumerate() {
        for (d, q) in chain.draws.iter().enumerate() {
            for (p, &v) in q.iter().enumerate() {
                draws[[c, d, p]] = v;
            }
        }
    }
    Ok(PosteriorDraws {
        draws,
        param_names: target.param_names(),
        divergence_count: chains.iter().map(|c| c.divergent_iterations.len()).collect(),
        divergent_iterations: chains.iter().map(|c| c.divergent_iterations.clone()).collect(),
        step_size: chains.iter().map(|c| c.step_size).collect(),
        accept_rate: chains.iter().map(|c| c.accept_rate).collect(),
        max_depth_hits: chains.iter().map(|c| c.max_depth_hits).collect(),
        n_leapfrog: chains.iter().map(|c| c.n_leapfrog).collect(),
        seed: config.seed,
    })
}
