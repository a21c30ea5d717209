//! Bayesian binary-response regression with logit and probit links.
//!
//! The pipeline runs parse → subsample/balance → encode ([`data`]), builds a
//! log-posterior ([`model`]), samples it with NUTS ([`sampler`]), and then
//! summarizes ([`diagnostics`]), compares ([`loo`]) and predicts
//! ([`predict`]). [`oracle`] holds brute-force reference computations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chainfile;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod loo;
pub mod model;
pub mod oracle;
pub mod predict;
pub mod rng;
pub mod sampler;
pub mod special;

pub use chainfile::{ChainFile, ChainHeader};
pub use config::{OutputFormat, PriorOverrides, RunConfig};
pub use data::{BalanceOrder, BalanceReport, DesignMatrix, DesignMetadata, PipelineOptions, RecordTable};
pub use diagnostics::ParamSummary;
pub use error::{Error, ErrorClass, Result};
pub use loo::{ComparisonRow, LogLikMatrix, LooComparison, LooResult};
pub use model::{Coefficients, LinkKind, ModelSpec, PriorSpec};
pub use predict::{PredictionRow, Scale};
pub use sampler::{PosteriorDraws, SamplerConfig};
