//! Special functions used by the densities and closed forms.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::gamma;

/// Upper tail of the standard normal, `Q(x) = 1 - Φ(x)`.
pub fn normal_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    normal_q(-x)
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Log of the surface area of the unit sphere in `R^d`, `2π^{d/2}/Γ(d/2)`.
pub fn ln_unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::LN_2 + h * PI.ln() - ln_gamma(h)
}

/// `log cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

/// Exact binomial coefficient for `n ≤ 62`.
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
