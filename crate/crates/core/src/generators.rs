//! f-divergence generators.
//!
//! The catalog covers total variation, squared Hellinger, Pearson and Neyman
//! χ², KL and reverse KL, Jeffreys and Jensen-Shannon, plus the α family and
//! the order-k χ family. Every generator satisfies `f(1) = 0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Inside this band around `|α| = 1` the α family is replaced by its KL limit.
pub const ALPHA_GUARD: f64 = 1e-9;

/// Ratios below this are clamped before `f` is evaluated.
pub const RATIO_FLOOR: f64 = 1e-300;

/// A convex (or, for odd-order χ, signed) generator `f` with `f(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FGenerator {
    /// `½|u-1|`
    TotalVariation,
    /// `(√u-1)²`
    SquaredHellinger,
    /// `(u-1)²`
    PearsonChi2,
    /// `(1-u)²/u`
    NeymanChi2,
    /// `-log u`
    Kl,
    /// `u log u`
    ReverseKl,
    /// `(u-1) log u`
    Jeffreys,
    /// `u log u - (1+u) log((1+u)/2)`
    JensenShannon,
    /// `4/(1-α²) (u - u^{(1+α)/2})`, `|α| ≠ 1`
    Alpha(f64),
    /// `(u-1)^k`
    ChiOrder(u32),
}

/// Catalog names accepted by [`builtin_generator`].
pub const BUILTIN_NAMES: [&str; 8] = [
    "total_variation",
    "squared_hellinger",
    "pearson_chi2",
    "neyman_chi2",
    "kl",
    "reverse_kl",
    "jeffreys",
    "jensen_shannon",
];

/// Looks up a catalog generator by its long name.
pub fn builtin_generator(name: &str) -> Result<FGenerator> {
    Ok(match name {
        "total_variation" => FGenerator::TotalVariation,
        "squared_hellinger" => FGenerator::SquaredHellinger,
        "pearson_chi2" => FGenerator::PearsonChi2,
        "neyman_chi2" => FGenerator::NeymanChi2,
        "kl" => FGenerator::Kl,
        "reverse_kl" => FGenerator::ReverseKl,
        "jeffreys" => FGenerator::Jeffreys,
        "jensen_shannon" => FGenerator::JensenShannon,
        other => return Err(Error::UnknownGenerator(other.to_string())),
    })
}

/// α-divergence generator; `α = -1` gives KL and `α = 1` reverse KL.
pub fn alpha_generator(alpha: f64) -> FGenerator {
    if (1.0 - alpha * alpha).abs() < ALPHA_GUARD {
        if alpha < 0.0 {
            FGenerator::Kl
        } else {
            FGenerator::ReverseKl
        }
    } else {
        FGenerator::Alpha(alpha)
    }
}

/// Order-k χ generator `(u-1)^k`.
pub fn chi_order_k_generator(k: u32) -> Result<FGenerator> {
    if k < 1 {
        return Err(Error::InvalidArgument("order-k chi needs k >= 1".into()));
    }
    Ok(FGenerator::ChiOrder(k))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log|e^{x} - 1|`, stable on both sides of zero.
fn log_abs_expm1(x: f64) -> f64 {
    if x > 0.0 {
        x + (-(-x).exp_m1()).ln()
    } else {
        (-x.exp_m1()).ln()
    }
}

impl FGenerator {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            FGenerator::TotalVariation => 0.5 * (u - 1.0).abs(),
            FGenerator::SquaredHellinger => {
                let s = u.sqrt() - 1.0;
                s * s
            }
            FGenerator::PearsonChi2 => (u - 1.0) * (u - 1.0),
            FGenerator::NeymanChi2 => (1.0 - u) * (1.0 - u) / u,
            FGenerator::Kl => -u.ln(),
            FGenerator::ReverseKl => u * u.ln(),
            FGenerator::Jeffreys => (u - 1.0) * u.ln(),
            FGenerator::JensenShannon => u * u.ln() - (1.0 + u) * ((1.0 + u) / 2.0).ln(),
            FGenerator::Alpha(a) => {
                let c = 4.0 / (1.0 - a * a);
                let e = (1.0 + a) / 2.0;
                // u - u^e = -u expm1((e-1) ln u)
                -c * u * ((e - 1.0) * u.ln()).exp_m1()
            }
            FGenerator::ChiOrder(k) => (u - 1.0).powi(k as i32),
        }
    }

    pub fn eval_prime(&self, u: f64) -> f64 {
        match *self {
            FGenerator::TotalVariation => {
                if u > 1.0 {
                    0.5
                } else if u < 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
            FGenerator::SquaredHellinger => 1.0 - 1.0 / u.sqrt(),
            FGenerator::PearsonChi2 => 2.0 * (u - 1.0),
            FGenerator::NeymanChi2 => 1.0 - 1.0 / (u * u),
            FGenerator::Kl => -1.0 / u,
            FGenerator::ReverseKl => u.ln() + 1.0,
            FGenerator::Jeffreys => u.ln() + (u - 1.0) / u,
            FGenerator::JensenShannon => (2.0 * u / (1.0 + u)).ln(),
            FGenerator::Alpha(a) => {
                let c = 4.0 / (1.0 - a * a);
                let e = (1.0 + a) / 2.0;
                c * (1.0 - e * u.powf(e - 1.0))
            }
            FGenerator::ChiOrder(k) => k as f64 * (u - 1.0).powi(k as i32 - 1),
        }
    }

    /// `p · f(q/p)` from `log p` and `log q` without overflowing the ratio.
    pub fn weighted(&self, log_p: f64, log_q: f64) -> f64 {
        let lr = log_q - log_p;
        if lr == 0.0 {
            return 0.0;
        }
        match *self {
            FGenerator::Kl => log_p.exp() * (-lr),
            FGenerator::ReverseKl => log_q.exp() * lr,
            FGenerator::Jeffreys => (log_q.exp() - log_p.exp()) * lr,
            FGenerator::TotalVariation => 0.5 * (log_q.exp() - log_p.exp()).abs(),
            FGenerator::SquaredHellinger => {
                let s = (0.5 * log_q).exp() - (0.5 * log_p).exp();
                s * s
            }
            FGenerator::PearsonChi2 | FGenerator::ChiOrder(_) => {
                let k = match *self {
                    FGenerator::ChiOrder(k) => k,
                    _ => 2,
                };
                let sign = if lr < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
                sign * (log_p + k as f64 * log_abs_expm1(lr)).exp()
            }
            FGenerator::Alpha(a) => {
                let c = 4.0 / (1.0 - a * a);
                let e = (1.0 + a) / 2.0;
                // p (r - r^e) = q - p^{1-e} q^e
                let mixed = (1.0 - e) * log_p + e * log_q;
                c * (log_q.exp() - mixed.exp())
            }
            FGenerator::JensenShannon => {
                let p = log_p.exp();
                let q = log_q.exp();
                q * lr - (p + q) * (softplus(lr) - std::f64::consts::LN_2)
            }
            FGenerator::NeymanChi2 => {
                let r = lr.exp();
                log_p.exp() * self.eval(r)
            }
        }
    }

    /// `f(q/p)` at the ratio `exp(log_ratio)`, clamped below at [`RATIO_FLOOR`].
    ///
    /// Returns the value and whether the clamp fired.
    pub fn eval_log_ratio(&self, log_ratio: f64) -> (f64, bool) {
        let r = log_ratio.exp();
        if r < RATIO_FLOOR {
            (self.eval(RATIO_FLOOR), true)
        } else {
            (self.eval(r), false)
        }
    }

    /// False for odd-order χ with `k ≥ 3`, which is not convex on `(0, ∞)`.
    pub fn is_convex(&self) -> bool {
        !matches!(*self, FGenerator::ChiOrder(k) if k >= 3 && k % 2 == 1)
    }

    /// True when the integrand can change sign ("signed" generators).
    pub fn is_signed(&self) -> bool {
        !self.is_convex()
    }

    /// Upper bound of the induced divergence, when one exists.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            FGenerator::TotalVariation => Some(1.0),
            FGenerator::SquaredHellinger => Some(2.0),
            FGenerator::JensenShannon => Some(2.0 * std::f64::consts::LN_2),
            _ => None,
        }
    }

    /// Name in the command-line vocabulary.
    pub fn cli_name(&self) -> String {
        match *self {
            FGenerator::TotalVariation => "tv".into(),
            FGenerator::SquaredHellinger => "h2".into(),
            FGenerator::PearsonChi2 => "chi2:pearson".into(),
            FGenerator::NeymanChi2 => "chi2:neyman".into(),
            FGenerator::Kl => "kl".into(),
            FGenerator::ReverseKl => "rkl".into(),
            FGenerator::Jeffreys => "jeffreys".into(),
            FGenerator::JensenShannon => "js".into(),
            FGenerator::Alpha(a) => format!("alpha:{a}"),
            FGenerator::ChiOrder(k) => format!("chik:{k}"),
        }
    }
}

impl fmt::Display for FGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cli_name())
    }
}

impl FromStr for FGenerator {
    type Err = Error;

    /// Parses the command-line vocabulary; catalog long names are accepted too.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownGenerator(s.to_string());
        Ok(match s {
            "kl" => FGenerator::Kl,
            "rkl" => FGenerator::ReverseKl,
            "tv" => FGenerator::TotalVariation,
            "h2" => FGenerator::SquaredHellinger,
            "chi2:pearson" => FGenerator::PearsonChi2,
            "chi2:neyman" => FGenerator::NeymanChi2,
            "js" => FGenerator::JensenShannon,
            "jeffreys" => FGenerator::Jeffreys,
            _ => {
                if let Some(k) = s.strip_prefix("chik:") {
                    let k: u32 = k.parse().map_err(|_| unknown())?;
                    chi_order_k_generator(k)?
                } else if let Some(a) = s.strip_prefix("alpha:") {
                    let a: f64 = a.parse().map_err(|_| unknown())?;
                    if !a.is_finite() {
                        return Err(unknown());
                    }
                    alpha_generator(a)
                } else {
                    builtin_generator(s)?
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn catalog() -> Vec<FGenerator> {
        let mut v: Vec<FGenerator> = BUILTIN_NAMES
            .iter()
            .map(|n| builtin_generator(n).unwrap())
            .collect();
        for a in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            v.push(alpha_generator(a));
        }
        for k in 1..=5 {
            v.push(chi_order_k_generator(k).unwrap());
        }
        v
    }

    #[test]
    fn catalog_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in catalog() {
            assert!(g.eval(1.0).abs() <= 1e-12, "{g}: f(1) = {}", g.eval(1.0));
            if g.is_convex() {
                for _ in 0..100 {
                    let mut t = [
                        rng.random_range(0.01..20.0),
                        rng.random_range(0.01..20.0),
                        rng.random_range(0.01..20.0),
                    ];
                    t.sort_by(f64::total_cmp);
                    let [a, b, c] = t;
                    if c - a < 1e-9 {
                        continue;
                    }
                    let chord = ((c - b) * g.eval(a) + (b - a) * g.eval(c)) / (c - a);
                    assert!(g.eval(b) <= chord + 1e-9, "{g} not convex at {a},{b},{c}");
                }
            }
            for _ in 0..50 {
                let u: f64 = rng.random_range(0.1..10.0);
                if matches!(g, FGenerator::TotalVariation) && (u - 1.0).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-5 * u;
                let fd = (g.eval(u + h) - g.eval(u - h)) / (2.0 * h);
                let an = g.eval_prime(u);
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "{g}: f'({u}) = {an}, fd = {fd}"
                );
            }
        }
    }

    #[test]
    fn odd_chi_is_flagged_signed() {
        assert!(FGenerator::ChiOrder(3).is_signed());
        assert!(FGenerator::ChiOrder(5).is_signed());
        assert!(!FGenerator::ChiOrder(1).is_signed());
        assert!(!FGenerator::ChiOrder(4).is_signed());
        assert!(chi_order_k_generator(0).is_err());
    }

    #[test]
    fn table_values() {
        assert_eq!(builtin_generator("pearson_chi2").unwrap().eval(3.0), 4.0);
        assert_relative_eq!(
            builtin_generator("jeffreys").unwrap().eval(2.0),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_eq!(builtin_generator("kl").unwrap().eval(1.0), 0.0);
        assert_eq!(builtin_generator("jensen_shannon").unwrap().eval(1.0), 0.0);
        assert!(matches!(builtin_generator("bogus"), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn alpha_family() {
        assert_relative_eq!(alpha_generator(3.0).eval(2.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(alpha_generator(0.0).eval(4.0), 8.0, epsilon = 1e-14);
        assert_eq!(alpha_generator(-1.0), FGenerator::Kl);
        assert_eq!(alpha_generator(1.0), FGenerator::ReverseKl);
        assert_relative_eq!(alpha_generator(-1.0).eval(std::f64::consts::E), -1.0);
        // continuity at the guard band, modulo the divergence-neutral term c(u - 1)
        for (a, lim) in [(1.0 - 1e-6, FGenerator::ReverseKl), (-1.0 + 1e-6, FGenerator::Kl)] {
            let g = alpha_generator(a);
            assert!(matches!(g, FGenerator::Alpha(_)));
            for i in 0..=30 {
                let u = 0.5 + 1.5 * i as f64 / 30.0;
                let gap = (g.eval(u) - g.eval_prime(1.0) * (u - 1.0))
                    - (lim.eval(u) - lim.eval_prime(1.0) * (u - 1.0));
                assert!(gap.abs() < 1e-4, "alpha {a} at {u}");
            }
        }
    }

    #[test]
    fn chi_order_values() {
        assert_eq!(FGenerator::ChiOrder(2).eval(3.0), 4.0);
        assert_eq!(FGenerator::ChiOrder(1).eval(7.5), 6.5);
        assert_eq!(FGenerator::ChiOrder(4).eval(0.5), 0.0625);
    }

    #[test]
    fn weighted_matches_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in catalog() {
            for _ in 0..50 {
                let lp: f64 = rng.random_range(-5.0..0.0);
                let lq: f64 = rng.random_range(-5.0..0.0);
                let direct = lp.exp() * g.eval((lq - lp).exp());
                let w = g.weighted(lp, lq);
                assert!(
                    (w - direct).abs() <= 1e-12 * direct.abs().max(1e-3),
                    "{g}: {w} vs {direct}"
                );
            }
            assert_eq!(g.weighted(-1.5, -1.5), 0.0, "{g}");
        }
        // ratio beyond f64 range stays finite for the polynomial family
        let w = FGenerator::ChiOrder(4).weighted(-685.0, -578.0);
        assert!(w.is_finite() && w > 0.0);
    }

    #[test]
    fn parse_cli_vocabulary() {
        for (s, g) in [
            ("kl", FGenerator::Kl),
            ("rkl", FGenerator::ReverseKl),
            ("tv", FGenerator::TotalVariation),
            ("h2", FGenerator::SquaredHellinger),
            ("chi2:pearson", FGenerator::PearsonChi2),
            ("chi2:neyman", FGenerator::NeymanChi2),
            ("chik:3", FGenerator::ChiOrder(3)),
            ("alpha:0.5", FGenerator::Alpha(0.5)),
            ("alpha:-1", FGenerator::Kl),
            ("js", FGenerator::JensenShannon),
            ("jeffreys", FGenerator::Jeffreys),
        ] {
            assert_eq!(s.parse::<FGenerator>().unwrap(), g);
            assert_eq!(g.cli_name().parse::<FGenerator>().unwrap(), g);
        }
        assert!("chik:0".parse::<FGenerator>().is_err());
        assert!("alpha:x".parse::<FGenerator>().is_err());
        assert!("nope".parse::<FGenerator>().is_err());
    }
}
