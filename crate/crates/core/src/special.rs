//! Standard normal distribution functions and log-space helpers.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Below this argument the log-CDF switches to the asymptotic series.
const LOG_CDF_ASYMPTOTIC: f64 = -30.0;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal log-density.
pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `ln Φ(x)`, finite for every finite `x`.
///
/// Uses `ln1p(-Φ(-x))` on the upper half, the direct logarithm down to
/// x = -30 and the Mills-ratio asymptotic series beyond that.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 0.0 {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x > LOG_CDF_ASYMPTOTIC {
        (0.5 * erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        log_cdf_tail(x)
    }
}

// ln Φ(x) = -x²/2 - ln(-x) - ln√(2π) + ln(1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
fn log_cdf_tail(x: f64) -> f64 {
    let inv_x2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..12 {
        term *= -((2 * n - 1) as f64) * inv_x2;
        sum += term;
    }
    -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + sum.ln()
}

/// `φ(x) / Φ(x)`, the derivative of `ln Φ(x)`.
pub fn inverse_mills_ratio(x: f64) -> f64 {
    if x > 8.0 {
        // Φ(x) == 1 to double precision; φ(x) alone is exact.
        return normal_log_pdf(x).exp();
    }
    (normal_log_pdf(x) - log_normal_cdf(x)).exp()
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() || p <= 0.0 || p >= 1.0 {
        return x;
    }
    // one Halley step against the accurate CDF
    let err = normal_cdf(x) - p;
    let u = err * (0.5 * x * x + LN_SQRT_2PI).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values from a 50-digit evaluation of Φ.
    const CDF_REFERENCE: &[(f64, f64, f64)] = &[
        (1.959964, 0.9750000009035575957, -0.025317807057564136656),
        (-3.62, 0.00014730150790747261988, -8.8230289975659239946),
        (-1.0, 0.15865525393145705141, -1.8410216450092635058),
        (2.5, 0.99379033467422386483, -0.006229025485860002381),
        (-6.0, 9.865876450376981407e-10, -20.736768949974705655),
        (-10.0, 7.619853024160526066e-24, -53.231285150512470578),
        (-20.0, 2.7536241186062336951e-89, -203.91715537109726394),
        (8.0, 0.9999999999999993779, -6.2209605742717860585e-16),
        (1e-3, 0.50039894221391106258, -0.69234961427268824342),
    ];

    #[test]
    fn cdf_matches_reference() {
        for &(x, p, _) in CDF_REFERENCE {
            assert!((normal_cdf(x) - p).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn log_cdf_matches_reference() {
        for &(x, _, lp) in CDF_REFERENCE {
            let got = log_normal_cdf(x);
            assert!(
                (got - lp).abs() <= 1e-12 * lp.abs().max(1e-3),
                "x = {x}: {got} vs {lp}"
            );
        }
        // Φ(-38), Φ(-40) underflow; the log must not.
        assert!((log_normal_cdf(-38.0) - -726.5572160188201301).abs() < 1e-10);
        assert!((log_normal_cdf(-40.0) - -804.60844201375378817).abs() < 1e-10);
        assert!(log_normal_cdf(-1e4).is_finite());
    }

    #[test]
    fn log_cdf_is_continuous_at_the_switch() {
        let a = log_normal_cdf(LOG_CDF_ASYMPTOTIC + 1e-9);
        let b = log_cdf_tail(LOG_CDF_ASYMPTOTIC + 1e-9);
        assert!((a - b).abs() < 1e-11 * a.abs());
    }

    #[test]
    fn mills_ratio_tail_behaves_like_minus_x() {
        let r = inverse_mills_ratio(-50.0);
        assert!((r - 50.0).abs() / 50.0 < 1e-3);
        assert!((inverse_mills_ratio(0.0) - 2.0 * (-LN_SQRT_2PI).exp()).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.025, 0.3, 0.5, 0.975, 1.0 - 1e-6] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }
}
