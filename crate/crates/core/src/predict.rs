//! Posterior-predictive summaries for new rows.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, DesignMetadata};
use crate::error::{Error, Result};
use crate::model::LinkKind;
use crate::rng::{domain, substream};
use crate::sampler::PosteriorDraws;

/// What a prediction row summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Simulated 0/1 outcomes.
    #[default]
    Outcome,
    /// Success probabilities.
    Probability,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Outcome => "outcome",
            Scale::Probability => "probability",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outcome" => Ok(Scale::Outcome),
            "probability" => Ok(Scale::Probability),
            other => Err(Error::InvalidConfig(format!("unknown scale '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub estimate: f64,
    pub est_error: f64,
    pub q2_5: f64,
    pub q97_5: f64,
    pub scale: Scale,
}

/// Mean, sd (denominator S) and inverse-ECDF 2.5%/97.5% quantiles.
///
/// Every statistic is unchanged when each draw is repeated the same number
/// of times.
fn summarize(mut values: Vec<f64>) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    values.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let rank = ((p * n).ceil() as usize).clamp(1, values.len());
        values[rank - 1]
    };
    (mean, var.sqrt(), q(0.025), q(0.975))
}

/// Predictive summaries for every row of `new_rows`.
///
/// `new_rows` must have been encoded with `training` metadata. On the
/// outcome scale row `i` draws its Bernoulli outcomes from its own random
/// substream, so results do not depend on how rows are scheduled.
pub fn posterior_predict(
    draws: &PosteriorDraws,
    link: LinkKind,
    training: &DesignMetadata,
    new_rows: &DesignMatrix,
    scale: Scale,
    seed: u64,
) -> Result<Vec<PredictionRow>> {
    if &new_rows.meta != training {
        return Err(Error::EncodingMismatch(
            "new rows were not encoded with the training metadata".into(),
        ));
    }
    if draws.n_params() != new_rows.ncols() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "draws have {} parameters, rows have {} predictors",
            draws.n_params(),
            new_rows.ncols()
        )));
    }
    if draws.n_total() == 0 {
        return Err(Error::TooFewDraws(0));
    }
    let betas: Vec<Vec<f64>> = draws.pooled().map(|b| b.to_vec()).collect();
    (0..new_rows.nrows())
        .into_par_iter()
        .map(|i| {
            let x = new_rows.values.row(i);
            let probs: Vec<f64> = betas
                .iter()
                .map(|b| {
                    let eta = b[0] + b[1..].iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>();
                    link.probability(eta)
                })
                .collect();
            let values = match scale {
                Scale::Probability => probs,
                Scale::Outcome => {
                    let mut rng = substream(seed, domain::PREDICT.wrapping_add(i as u64));
                    probs
                        .iter()
                        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                        .collect()
                }
            };
            let (estimate, est_error, q2_5, q97_5) = summarize(values);
            Ok(PredictionRow {
                index: i + 1,
                estimate,
                est_error,
                q2_5,
                q97_5,
                scale,
            })
        })
        .collect()
}
