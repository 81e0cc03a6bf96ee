//! Special functions used by the samplers and distribution fitters.
//!
//! Log-gamma, digamma, the regularized incomplete gamma function and erfc
//! come from `statrs`; trigamma is not provided there and lives here.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Second derivative of `ln Gamma`, for `x > 0`.
///
/// Shifts the argument above 10 with `psi'(x) = psi'(x + 1) + 1/x^2`, then
/// applies the asymptotic series in `1/x`.
pub fn trigamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + series
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln k!` for the Poisson sampler.
pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}
