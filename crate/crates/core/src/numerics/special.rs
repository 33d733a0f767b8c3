//! Error-function family and Gaussian half-line integrals.

use std::f64::consts::PI;

pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        if x < -26.0 {
            return f64::INFINITY;
        }
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 5.0 {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction, evaluated bottom-up.
    let mut t = 0.0;
    for k in (1..=60).rev() {
        t = (k as f64 * 0.5) / (x + t);
    }
    FRAC_1_SQRT_PI / (x + t)
}

/// `erf(b) - erf(a)` without cancellation in the tails.
pub fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        erfc(a) - erfc(b)
    } else if a <= 0.0 && b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// `∫_0^∞ exp(-(y-μ)^2 / (2σ)) dy` for `σ > 0`.
pub fn half_line_gaussian_integral(mu: f64, sigma: f64) -> f64 {
    (PI * sigma / 2.0).sqrt() * erfc(-mu / (2.0 * sigma).sqrt())
}

/// `exp(-η²) / (1 + erf η)`, finite for all η.
pub fn gaussian_hazard(eta: f64) -> f64 {
    if eta < 0.0 {
        1.0 / erfcx(-eta)
    } else {
        (-eta * eta).exp() / erfc(-eta)
    }
}
