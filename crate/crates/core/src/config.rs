//! Run configuration shared by every front-end.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{BalanceOrder, PipelineOptions};
use crate::error::{Error, Result};
use crate::model::{default_priors, LinkKind, PriorSpec};
use crate::predict::Scale;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn text(self) -> bool {
        matches!(self, Self::Text | Self::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

/// Replacements for individual prior hyperparameters; unset fields keep the
/// link's default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOverrides {
    pub intercept_mean: Option<f64>,
    pub intercept_sd: Option<f64>,
    pub slope_mean: Option<f64>,
    pub slope_sd: Option<f64>,
}

/// Everything a fit depends on. Only `data` needs to be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    /// Field separator; detected from the header line when unset.
    pub delimiter: Option<char>,
    /// Rows drawn before balancing; `None` keeps the whole table.
    pub subsample: Option<usize>,
    pub balance: BalanceOrder,
    pub holdout: usize,
    pub link: LinkKind,
    /// Label used in comparison tables; defaults to `<link>_model`.
    pub model_name: Option<String>,
    pub prior: PriorOverrides,
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_radius: f64,
    pub standardize: bool,
    pub scale: Scale,
    pub format: OutputFormat,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipeline = PipelineOptions::default();
        let sampler = SamplerConfig::default();
        Self {
            data: PathBuf::new(),
            delimiter: None,
            subsample: pipeline.subsample,
            balance: pipeline.balance,
            holdout: pipeline.holdout,
            link: LinkKind::Logit,
            model_name: None,
            prior: PriorOverrides::default(),
            chains: sampler.n_chains,
            warmup: sampler.n_warmup,
            draws: sampler.n_draws,
            seed: sampler.seed,
            target_accept: sampler.target_accept,
            max_tree_depth: sampler.max_tree_depth,
            init_radius: sampler.init_radius,
            standardize: true,
            scale: Scale::Outcome,
            format: OutputFormat::Both,
            out: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn pipeline(&self) -> PipelineOptions {
        PipelineOptions {
            subsample: self.subsample,
            balance: self.balance,
            holdout: self.holdout,
            seed: self.seed,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            n_warmup: self.warmup,
            n_draws: self.draws,
            seed: self.seed,
            target_accept: self.target_accept,
            max_tree_depth: self.max_tree_depth,
            init_radius: self.init_radius,
        }
    }

    pub fn prior_spec(&self) -> PriorSpec {
        let d = default_priors(self.link);
        let o = &self.prior;
        PriorSpec {
            intercept_mean: o.intercept_mean.unwrap_or(d.intercept_mean),
            intercept_sd: o.intercept_sd.unwrap_or(d.intercept_sd),
            slope_mean: o.slope_mean.unwrap_or(d.slope_mean),
            slope_sd: o.slope_sd.unwrap_or(d.slope_sd),
        }
    }

    pub fn model_name(&self) -> String {
        self.model_name.clone().unwrap_or_else(|| format!("{}_model", self.link.name()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("no data file given".into()));
        }
        if let Some(d) = self.delimiter {
            if !d.is_ascii() || d == '"' || d == '\n' {
                return Err(Error::InvalidConfig(format!("unusable delimiter {d:?}")));
            }
        }
        self.prior_spec().validate()?;
        self.sampler().validate()
    }
}

/// Pick `;`, `,` or tab, whichever is most frequent in the header line.
pub fn detect_delimiter(header_line: &str) -> u8 {
    (*b";,\t")
        .into_iter()
        .max_by_key(|&d| (header_line.bytes().filter(|&b| b == d).count(), d == b';'))
        .expect("non-empty candidate list")
}
