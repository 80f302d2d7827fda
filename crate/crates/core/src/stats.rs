//! Scalar special functions used by the acquisition functions and the
//! hypothesis tests.
//!
//! Everything here works in `f64` and stays finite deep into the tails: the
//! log-domain helpers never take the logarithm of an underflowed value.

use libm::erfc;
use statrs::function::gamma::gamma_ur;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≥ 0`.
///
/// Below 25 the product is formed directly (neither factor over/underflows);
/// above it the asymptotic series is accurate to well under 1e-13.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 25.0 {
        return (x * x).exp() * erfc(x);
    }
    erfcx_asymptotic(x)
}

fn erfcx_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (2.0 * x * x);
    // 1 - 1/(2x²) + 3/(2x²)² - 15/(2x²)³ + 105/(2x²)⁴ - 945/(2x²)⁵
    let series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2 * (1.0 - 9.0 * inv2))));
    series / (x * PI.sqrt())
}

/// `log Φ(z)`, finite for every finite `z`.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > 5.0 {
        // Φ(z) = 1 - Φ(-z), keep the tiny complement.
        (-0.5 * erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else if z > -5.0 {
        norm_cdf(z).ln()
    } else {
        // Φ(z) = ½·erfcx(-z/√2)·exp(-z²/2)
        (0.5 * erfcx(-z * FRAC_1_SQRT_2)).ln() - 0.5 * z * z
    }
}

/// `h(z) = φ(z) + z·Φ(z)`, the expected improvement of a unit-variance
/// Gaussian with mean `z` over zero.
pub fn ei_h(z: f64) -> f64 {
    norm_pdf(z) + z * norm_cdf(z)
}

/// `log h(z)` evaluated without cancellation in the lower tail.
pub fn log_ei_h(z: f64) -> f64 {
    if z > -1.0 {
        return ei_h(z).ln();
    }
    let a = -z;
    // h(z) = φ(z)·r with r = 1 - √(π/2)·a·erfcx(a/√2).
    let r = if a >= 35.0 {
        // r = 1/z² - 3/z⁴ + 15/z⁶ - 105/z⁸ + 945/z¹⁰
        let w = 1.0 / (a * a);
        w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w * (1.0 - 9.0 * w))))
    } else {
        1.0 - (PI / 2.0).sqrt() * a * erfcx(a / SQRT_2)
    };
    log_norm_pdf(z) + r.ln()
}

/// Upper tail of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(0.5 * dof, 0.5 * x)
}

/// Differential entropy of a Gaussian with the given variance.
pub fn gaussian_entropy(variance: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * variance).ln()
}

/// Differential entropy of `N(mean, σ²)` truncated to `(-∞, upper]`.
pub fn upper_truncated_entropy(mean: f64, sigma: f64, upper: f64) -> f64 {
    if upper == f64::INFINITY {
        return gaussian_entropy(sigma * sigma);
    }
    let beta = (upper - mean) / sigma;
    let log_z = log_norm_cdf(beta);
    // φ(β)/Φ(β) computed in the log domain.
    let ratio = (log_norm_pdf(beta) - log_z).exp();
    0.5 * (2.0 * PI * std::f64::consts::E).ln() + sigma.ln() + log_z - 0.5 * beta * ratio
}
