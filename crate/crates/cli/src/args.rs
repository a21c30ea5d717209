use std::path::PathBuf;

use bayesbin::{BalanceOrder, LinkKind, OutputFormat, RunConfig, Scale};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bayesbin", version, about = "Bayesian logit/probit regression for bank-marketing data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, balance, encode and sample; write a run directory.
    Fit(FitArgs),
    /// Recompute the coefficient table from a chain file.
    Diagnose(DiagnoseArgs),
    /// Rank two or more fits by PSIS-LOO.
    Compare(CompareArgs),
    /// Posterior-predictive summaries for new rows.
    Predict(PredictArgs),
    /// Run the reference checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BalanceArg {
    Before,
    After,
    Off,
}

impl From<BalanceArg> for BalanceOrder {
    fn from(b: BalanceArg) -> Self {
        match b {
            BalanceArg::Before => BalanceOrder::Before,
            BalanceArg::After => BalanceOrder::After,
            BalanceArg::Off => BalanceOrder::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Logit,
    Probit,
}

impl From<LinkArg> for LinkKind {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Logit => LinkKind::Logit,
            LinkArg::Probit => LinkKind::Probit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Outcome,
    Probability,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Outcome => Scale::Outcome,
            ScaleArg::Probability => Scale::Probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => OutputFormat::Text,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

/// `all` or a positive row count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsample(pub Option<usize>);

fn parse_subsample(s: &str) -> Result<Subsample, String> {
    if s == "all" {
        return Ok(Subsample(None));
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive count or 'all', got '{s}'")),
        Ok(n) => Ok(Subsample(Some(n))),
    }
}

fn parse_delimiter(s: &str) -> Result<char, String> {
    match s {
        "\\t" | "tab" => Ok('\t'),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii() => Ok(c),
                _ => Err(format!("delimiter must be a single ASCII character, got '{s}'")),
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// JSON run configuration; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Field separator (detected from the header when omitted).
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<char>,
    /// Rows to draw before balancing, or `all`.
    #[arg(long, value_parser = parse_subsample)]
    pub subsample: Option<Subsample>,
    #[arg(long, value_enum)]
    pub balance: Option<BalanceArg>,
    /// Rows held out of the fit and written to holdout.csv.
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, value_enum)]
    pub link: Option<LinkArg>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    /// Keep predictors on their raw scale.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FitArgs {
    /// Overlay the flags that were given on `base`.
    pub fn apply(&self, mut c: RunConfig) -> RunConfig {
        if let Some(v) = &self.data {
            c.data = v.clone();
        }
        if let Some(v) = self.delimiter {
            c.delimiter = Some(v);
        }
        if let Some(Subsample(v)) = self.subsample {
            c.subsample = v;
        }
        if let Some(v) = self.balance {
            c.balance = v.into();
        }
        if let Some(v) = self.holdout {
            c.holdout = v;
        }
        if let Some(v) = self.link {
            c.link = v.into();
        }
        if let Some(v) = self.chains {
            c.chains = v;
        }
        if let Some(v) = self.warmup {
            c.warmup = v;
        }
        if let Some(v) = self.draws {
            c.draws = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.target_accept {
            c.target_accept = v;
        }
        if self.no_standardize {
            c.standardize = false;
        }
        if let Some(v) = self.scale {
            c.scale = v.into();
        }
        if let Some(v) = self.format {
            c.format = v.into();
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub chains: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Chain files, at least two.
    #[arg(required = true, num_args = 2..)]
    pub chains: Vec<PathBuf>,
    /// The data file the fits were trained on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<char>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub chains: PathBuf,
    /// Rows to score, in the training schema (`y` optional).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<char>,
    #[arg(long, value_enum, default_value = "outcome")]
    pub scale: ScaleArg,
    /// Seed for outcome simulation; defaults to the fit's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}
