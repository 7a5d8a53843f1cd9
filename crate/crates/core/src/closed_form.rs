//! Closed-form divergences.
//!
//! For a location family every f-divergence is `h_f(u)` with `u = Δ²` the
//! squared Mahalanobis distance between the locations. The functions here
//! always take `u`, never `Δ`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::generators::FGenerator;
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::radial::Family;
use crate::spd::{check_len, mahalanobis_sq, LocationScaleParam};
use crate::special::{binomial, ln_cosh, normal_q};

/// Largest order accepted by [`chi_order_k`].
pub const MAX_CHI_ORDER: u32 = 30;

/// Human-readable list of the shipped closed forms.
pub const AVAILABLE_CLOSED_FORMS: &str = "normal: kl, rkl, jeffreys, h2, chi2:pearson, chi2:neyman, \
alpha:<a>, chik:<k>, js, tv; cauchy: chi2:pearson (d = 1, 3)";

fn check_u(u: f64) -> Result<()> {
    if u >= 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "squared Mahalanobis distance must be finite and non-negative, got {u}"
        )))
    }
}

/// `h_f(u)` for the normal location family.
pub fn hf_normal(gen: &FGenerator, u: f64) -> Result<f64> {
    check_u(u)?;
    Ok(match *gen {
        FGenerator::Kl | FGenerator::ReverseKl => 0.5 * u,
        FGenerator::Jeffreys => u,
        FGenerator::SquaredHellinger => -2.0 * (-u / 8.0).exp_m1(),
        FGenerator::PearsonChi2 | FGenerator::NeymanChi2 => u.exp_m1(),
        FGenerator::Alpha(a) => {
            let s = 1.0 - a * a;
            -4.0 / s * (-s * u / 8.0).exp_m1()
        }
        FGenerator::ChiOrder(k) => chi_order_k(k, u)?,
        FGenerator::JensenShannon => 2.0 * (0.25 * u - i_js_integral(u)?),
        FGenerator::TotalVariation => 1.0 - 2.0 * normal_q(0.5 * u.sqrt()),
    })
}

/// [`hf_normal`] addressed by command-line generator name.
pub fn hf_normal_by_name(name: &str, u: f64) -> Result<f64> {
    hf_normal(&name.parse()?, u)
}

/// `Σ_{i=0}^k (-1)^{k-i} C(k,i) exp(i(i-1)u/2)`, the order-k χ divergence
/// between unit-covariance normals.
pub fn chi_order_k(k: u32, u: f64) -> Result<f64> {
    if !(1..=MAX_CHI_ORDER).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "chi order must lie in 1..={MAX_CHI_ORDER}, got {k}"
        )));
    }
    check_u(u)?;
    // the binomial row sums to zero, so expm1 terms avoid cancelling the ones
    let mut acc = 0.0;
    for i in 2..=k {
        let c = binomial(k, i) as f64;
        let sign = if (k - i).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * c * (0.5 * (i * (i - 1)) as f64 * u).exp_m1();
    }
    Ok(acc)
}

/// `I_JS(u) = ∫ φ(s - μ) log cosh(μ s) ds` with `μ = √u / 2`.
///
/// Then `u/4 - I_JS(u)` is the Jensen-Shannon divergence (halved mixture form)
/// between two unit-variance normals at squared distance `u`.
pub fn i_js_integral(u: f64) -> Result<f64> {
    check_u(u)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    let mu = 0.5 * u.sqrt();
    let norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
    let g = |s: f64| {
        let z = s - mu;
        let lc = ln_cosh(mu * s);
        if lc == 0.0 {
            0.0
        } else {
            (norm - 0.5 * z * z + lc.ln()).exp()
        }
    };
    let r = integrate_real_line(g, &[0.0, mu], &QuadOptions::with_abs_tol(1e-11))?;
    Ok(r.value)
}

/// Fisher-Rao distance between normals sharing a covariance, `√2 acosh(1 + u/4)`.
pub fn fisher_rao_normal(u: f64) -> Result<f64> {
    check_u(u)?;
    let t = 0.25 * u;
    Ok(SQRT_2 * (t + (t * (2.0 + t)).sqrt()).ln_1p())
}

/// Pearson χ² for the Cauchy location family in dimension 1 or 3.
pub fn hf_cauchy(gen: &FGenerator, u: f64, dim: usize) -> Result<f64> {
    check_u(u)?;
    match (gen, dim) {
        (FGenerator::PearsonChi2, 1) => Ok(0.5 * u),
        (FGenerator::PearsonChi2, 3) => Ok(2.0 / 3.0 * u + u * u / 8.0),
        _ => Err(Error::NoClosedForm {
            what: format!("{gen} on cauchy (d = {dim})"),
            available: AVAILABLE_CLOSED_FORMS.into(),
        }),
    }
}

/// A closed-form `h_f` bound to a generator and a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfFunction {
    generator: FGenerator,
    family: Family,
    dim: usize,
}

impl HfFunction {
    /// Looks up the closed form, failing with the list of available ones.
    pub fn new(generator: FGenerator, family: Family, dim: usize) -> Result<Self> {
        let ok = match family {
            Family::Normal => true,
            Family::Student(nu) => {
                nu == 1.0 && generator == FGenerator::PearsonChi2 && (dim == 1 || dim == 3)
            }
        };
        if !ok {
            return Err(Error::NoClosedForm {
                what: format!("{generator} on {family} (d = {dim})"),
                available: AVAILABLE_CLOSED_FORMS.into(),
            });
        }
        Ok(Self {
            generator,
            family,
            dim,
        })
    }

    pub fn generator_name(&self) -> String {
        self.generator.cli_name()
    }

    pub fn generator(&self) -> FGenerator {
        self.generator
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        match self.family {
            Family::Normal => hf_normal(&self.generator, u),
            Family::Student(_) => hf_cauchy(&self.generator, u, self.dim),
        }
    }
}

/// KL between two normals split into its covariance and location parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDecomposition {
    /// `½ burg + ½ mahalanobis`
    pub total: f64,
    /// `tr(Σ₂⁻¹Σ₁) + log det(Σ₂Σ₁⁻¹) - d`
    pub burg: f64,
    /// `Δ²_{Σ₂}(μ₁, μ₂)`
    pub mahalanobis: f64,
}

/// `KL(N(μ₁,Σ₁) : N(μ₂,Σ₂))`.
pub fn kl_mvn_general(p1: &LocationScaleParam, p2: &LocationScaleParam) -> Result<KlDecomposition> {
    check_len(p2.dim(), p1.dim())?;
    let d = p1.dim() as f64;
    let s1 = p1.sigma();
    let s2 = p2.sigma();
    let trace = s2.solve_matrix(s1.matrix()).trace();
    let burg = (trace - d + (s2.log_det() - s1.log_det())).max(0.0);
    let mahalanobis = mahalanobis_sq(p1.location(), p2.location(), s2)?;
    Ok(KlDecomposition {
        total: 0.5 * (burg + mahalanobis),
        burg,
        mahalanobis,
    })
}
