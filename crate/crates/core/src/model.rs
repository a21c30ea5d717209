//! Logit and probit likelihoods, normal priors and the log-posterior.
//!
//! Parameter vectors are laid out as `[intercept, slope_1, ..., slope_k]`,
//! slopes in design-column order. The intercept is never a design column.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::special::{inverse_mills_ratio, log_normal_cdf, normal_cdf, softplus, LN_SQRT_2PI};

/// Largest double below 1.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// `exp(η) / (1 + exp(η))`, evaluated on the branch that cannot overflow.
pub fn logit_link(eta: f64) -> f64 {
    let p = if eta < 0.0 {
        let e = eta.exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + (-eta).exp())
    };
    p.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

/// `Φ(η)`.
pub fn probit_link(eta: f64) -> f64 {
    normal_cdf(eta).clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logit,
    Probit,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Logit => "logit",
            LinkKind::Probit => "probit",
        }
    }

    /// Success probability for linear predictor `eta`.
    pub fn probability(self, eta: f64) -> f64 {
        match self {
            LinkKind::Logit => logit_link(eta),
            LinkKind::Probit => probit_link(eta),
        }
    }

    /// `ln p(y | η)` for `y` in {0, 1}.
    pub fn log_prob(self, eta: f64, y: bool) -> f64 {
        match (self, y) {
            (LinkKind::Logit, true) => -softplus(-eta),
            (LinkKind::Logit, false) => -softplus(eta),
            (LinkKind::Probit, true) => log_normal_cdf(eta),
            (LinkKind::Probit, false) => log_normal_cdf(-eta),
        }
    }

    /// `ln p(y | η)` and its derivative in `η`.
    pub fn log_prob_and_derivative(self, eta: f64, y: bool) -> (f64, f64) {
        match (self, y) {
            (LinkKind::Logit, _) => {
                let yf = if y { 1.0 } else { 0.0 };
                (self.log_prob(eta, y), yf - logit_link_unclamped(eta))
            }
            (LinkKind::Probit, true) => (log_normal_cdf(eta), inverse_mills_ratio(eta)),
            (LinkKind::Probit, false) => (log_normal_cdf(-eta), -inverse_mills_ratio(-eta)),
        }
    }
}

impl std::fmt::Display for LinkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(LinkKind::Logit),
            "probit" => Ok(LinkKind::Probit),
            other => Err(Error::InvalidConfig(format!("unknown link {other:?}"))),
        }
    }
}

// The gradient needs 1 - σ(η) exactly near saturation, so no clamping here.
fn logit_link_unclamped(eta: f64) -> f64 {
    if eta < 0.0 {
        let e = eta.exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + (-eta).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(k: usize) -> Self {
        Self {
            intercept: 0.0,
            slopes: vec![0.0; k],
        }
    }

    pub fn from_slice(params: &[f64]) -> Self {
        Self {
            intercept: params[0],
            slopes: params[1..].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.intercept).chain(self.slopes.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.slopes.iter().all(|v| v.is_finite())
    }
}

/// Independent normal priors: one for the intercept, one shared by all slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub intercept_mean: f64,
    pub intercept_sd: f64,
    pub slope_mean: f64,
    pub slope_sd: f64,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.intercept_sd > 0.0
            && self.slope_sd > 0.0
            && self.intercept_sd.is_finite()
            && self.slope_sd.is_finite()
            && self.intercept_mean.is_finite()
            && self.slope_mean.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid prior {self:?}")))
        }
    }
}

/// Priors used for each link unless overridden.
pub fn default_priors(link: LinkKind) -> PriorSpec {
    match link {
        LinkKind::Logit => PriorSpec {
            intercept_mean: 3.5,
            intercept_sd: 1.0,
            slope_mean: 0.0,
            slope_sd: 0.5,
        },
        LinkKind::Probit => PriorSpec {
            intercept_mean: 0.0,
            intercept_sd: 5.0,
            slope_mean: 0.0,
            slope_sd: 2.0,
        },
    }
}

#[inline]
fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// A link, a prior, and the data they are conditioned on.
#[derive(Debug, Clone, Copy)]
pub struct ModelSpec<'a> {
    pub link: LinkKind,
    pub prior: PriorSpec,
    pub design: &'a DesignMatrix,
    pub target: &'a [f64],
}

impl<'a> ModelSpec<'a> {
    pub fn new(link: LinkKind, prior: PriorSpec, design: &'a DesignMatrix, target: &'a [f64]) -> Result<Self> {
        prior.validate()?;
        if design.nrows() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, target has {}",
                design.nrows(),
                target.len()
            )));
        }
        if let Some(bad) = target.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::DimensionMismatch(format!("target value {bad} is not 0 or 1")));
        }
        Ok(Self {
            link,
            prior,
            design,
            target,
        })
    }

    /// Number of parameters, intercept included.
    pub fn dim(&self) -> usize {
        self.design.ncols() + 1
    }

    pub fn n_obs(&self) -> usize {
        self.target.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        std::iter::once("Intercept".to_string())
            .chain(self.design.meta.column_names.iter().cloned())
            .collect()
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Linear predictor for every row.
    pub fn linear_predictor(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.check(params)?;
        let slopes = ArrayView1::from(&params[1..]);
        let mut eta = self.design.values.dot(&slopes);
        eta.mapv_inplace(|v| v + params[0]);
        Ok(eta.to_vec())
    }

    pub fn log_likelihood(&self, params: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(params)?;
        Ok(eta
            .iter()
            .zip(self.target)
            .map(|(&e, &y)| self.link.log_prob(e, y == 1.0))
            .sum())
    }

    pub fn log_prior(&self, params: &[f64]) -> Result<f64> {
        self.check(params)?;
        Ok(log_prior_slice(params, &self.prior))
    }

    /// Unnormalized log-posterior; `grad` receives its gradient.
    pub fn log_posterior_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check(params)?;
        if grad.len() != params.len() {
            return Err(Error::DimensionMismatch("gradient buffer length".into()));
        }
        let eta = self.linear_predictor(params)?;
        let mut loglik = 0.0;
        let mut deriv = Vec::with_capacity(eta.len());
        for (&e, &y) in eta.iter().zip(self.target) {
            let (lp, d) = self.link.log_prob_and_derivative(e, y == 1.0);
            loglik += lp;
            deriv.push(d);
        }
        let deriv = ndarray::Array1::from(deriv);
        let slope_grad = self.design.values.t().dot(&deriv);

        let p = &self.prior;
        grad[0] = deriv.sum() - (params[0] - p.intercept_mean) / (p.intercept_sd * p.intercept_sd);
        for (j, g) in slope_grad.iter().enumerate() {
            grad[j + 1] = g - (params[j + 1] - p.slope_mean) / (p.slope_sd * p.slope_sd);
        }
        Ok(loglik + log_prior_slice(params, p))
    }
}

fn log_prior_slice(params: &[f64], prior: &PriorSpec) -> f64 {
    normal_log_density(params[0], prior.intercept_mean, prior.intercept_sd)
        + params[1..]
            .iter()
            .map(|&b| normal_log_density(b, prior.slope_mean, prior.slope_sd))
            .sum::<f64>()
}

pub fn log_likelihood(beta: &Coefficients, model: &ModelSpec<'_>) -> Result<f64> {
    model.log_likelihood(&beta.to_vec())
}

pub fn log_prior(beta: &Coefficients, prior: &PriorSpec) -> f64 {
    log_prior_slice(&beta.to_vec(), prior)
}

pub fn log_posterior_and_gradient(beta: &Coefficients, model: &ModelSpec<'_>) -> Result<(f64, Vec<f64>)> {
    let params = beta.to_vec();
    let mut grad = vec![0.0; params.len()];
    let value = model.log_posterior_and_gradient(&params, &mut grad)?;
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn design(n: usize, k: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((n, k), |_| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let names = (0..k).map(|j| format!("x{j}")).collect();
        (DesignMatrix::from_values(values, names).unwrap(), y)
    }

    // Naive term-by-term evaluation, no stable forms.
    #[allow(clippy::needless_range_loop)]
    fn naive_loglik(link: LinkKind, params: &[f64], d: &DesignMatrix, y: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..d.nrows() {
            let mut eta = params[0];
            for j in 0..d.ncols() {
                eta += params[j + 1] * d.values[[i, j]];
            }
            let p = match link {
                LinkKind::Logit => 1.0 / (1.0 + (-eta).exp()),
                LinkKind::Probit => normal_cdf(eta),
            };
            total += if y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
        }
        total
    }

    #[test]
    fn logit_link_examples() {
        assert_eq!(logit_link(0.0), 0.5);
        // 50-digit reference
        assert!((logit_link(2.34) - 0.912_136_085_170_698_8).abs() < 1e-15);
        assert!((logit_link(3.7) + logit_link(-3.7) - 1.0).abs() < 1e-12);
        assert!(logit_link(800.0) < 1.0 && logit_link(-800.0) > 0.0);
    }

    #[test]
    fn probit_link_examples() {
        assert_eq!(probit_link(0.0), 0.5);
        assert!((probit_link(1.959964) - 0.975).abs() < 1e-6);
        assert!((probit_link(-3.62) - 1.47e-4).abs() < 5e-7);
        assert!((probit_link(1.3) + probit_link(-1.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_prior_values() {
        let l = default_priors(LinkKind::Logit);
        assert_eq!((l.intercept_mean, l.intercept_sd, l.slope_mean, l.slope_sd), (3.5, 1.0, 0.0, 0.5));
        let p = default_priors(LinkKind::Probit);
        assert_eq!((p.intercept_mean, p.intercept_sd, p.slope_mean, p.slope_sd), (0.0, 5.0, 0.0, 2.0));
        assert!(l.validate().is_ok() && p.validate().is_ok());
    }

    #[test]
    fn zero_coefficients_give_half_probability() {
        let (d, y) = design(7, 3, 1);
        let m = ModelSpec::new(LinkKind::Logit, default_priors(LinkKind::Logit), &d, &y).unwrap();
        let ll = log_likelihood(&Coefficients::zeros(3), &m).unwrap();
        assert!((ll - 7.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_row_loglik() {
        let d = DesignMatrix::from_values(Array2::from_elem((1, 1), 1.0), vec!["x".into()]).unwrap();
        let y = [1.0];
        let m = ModelSpec::new(LinkKind::Logit, default_priors(LinkKind::Logit), &d, &y).unwrap();
        let ll = m.log_likelihood(&[0.0, 2.34]).unwrap();
        assert!((ll - -0.091_966_083_843_493_27).abs() < 1e-14);
    }

    #[test]
    fn loglik_matches_naive_sum() {
        for link in [LinkKind::Logit, LinkKind::Probit] {
            let (d, y) = design(5, 2, 11);
            let m = ModelSpec::new(link, default_priors(link), &d, &y).unwrap();
            let params = [0.3, -1.1, 0.7];
            let got = m.log_likelihood(&params).unwrap();
            assert!((got - naive_loglik(link, &params, &d, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_prior_examples() {
        let logit = default_priors(LinkKind::Logit);
        let lp = log_prior(&Coefficients { intercept: 3.5, slopes: vec![] }, &logit);
        assert!((lp + 0.5 * (2.0 * PI).ln()).abs() < 1e-14);

        let probit = default_priors(LinkKind::Probit);
        let lp = log_prior(&Coefficients { intercept: 0.0, slopes: vec![0.0] }, &probit);
        let want = -0.5 * (2.0 * PI * 25.0).ln() - 0.5 * (2.0 * PI * 4.0).ln();
        assert!((lp - want).abs() < 1e-14);

        let beta = Coefficients { intercept: 1.2, slopes: vec![-0.4, 0.9, 2.2] };
        let term = |x: f64, m: f64, s: f64| -0.5 * ((x - m) / s).powi(2) - (s * (2.0 * PI).sqrt()).ln();
        let want = term(1.2, 3.5, 1.0) + term(-0.4, 0.0, 0.5) + term(0.9, 0.0, 0.5) + term(2.2, 0.0, 0.5);
        assert!((log_prior(&beta, &logit) - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_prior_mean_without_data() {
        let d = DesignMatrix::from_values(Array2::zeros((0, 2)), vec!["a".into(), "b".into()]).unwrap();
        for link in [LinkKind::Logit, LinkKind::Probit] {
            let prior = default_priors(link);
            let m = ModelSpec::new(link, prior, &d, &[]).unwrap();
            let beta = Coefficients { intercept: prior.intercept_mean, slopes: vec![prior.slope_mean; 2] };
            let (_, g) = log_posterior_and_gradient(&beta, &m).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn posterior_is_likelihood_plus_prior() {
        let (d, y) = design(9, 2, 3);
        let m = ModelSpec::new(LinkKind::Probit, default_priors(LinkKind::Probit), &d, &y).unwrap();
        let beta = Coefficients { intercept: 0.2, slopes: vec![1.5, -0.3] };
        let (v, _) = log_posterior_and_gradient(&beta, &m).unwrap();
        let sum = log_likelihood(&beta, &m).unwrap() + log_prior(&beta, &m.prior);
        assert!((v - sum).abs() <= 1e-12 * sum.abs());
    }

    #[test]
    fn posterior_stays_finite_far_in_the_tails() {
        let (d, y) = design(20, 2, 5);
        for link in [LinkKind::Logit, LinkKind::Probit] {
            let m = ModelSpec::new(link, default_priors(link), &d, &y).unwrap();
            let mut g = [0.0; 3];
            for params in [[40.0, 30.0, -30.0], [-40.0, -25.0, 25.0], [0.0, 500.0, 0.0]] {
                let v = m.log_posterior_and_gradient(&params, &mut g).unwrap();
                assert!(v.is_finite() && g.iter().all(|x| x.is_finite()), "{link} {params:?}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (d, y) = design(4, 2, 1);
        assert!(ModelSpec::new(LinkKind::Logit, default_priors(LinkKind::Logit), &d, &y[..3]).is_err());
        let m = ModelSpec::new(LinkKind::Logit, default_priors(LinkKind::Logit), &d, &y).unwrap();
        assert!(matches!(m.log_likelihood(&[0.0]), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn links_are_monotone_and_symmetric(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            for link in [LinkKind::Logit, LinkKind::Probit] {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(link.probability(lo) <= link.probability(hi));
                prop_assert!((link.probability(a) + link.probability(-a) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn strict_monotonicity_on_moderate_inputs(a in -8.0f64..8.0, d in 1e-3f64..1.0) {
            prop_assert!(logit_link(a) < logit_link(a + d));
            // Φ rounds to 1.0 in f64 above about 5
            if a + d < 5.0 {
                prop_assert!(probit_link(a) < probit_link(a + d));
            }
        }
    }
}
