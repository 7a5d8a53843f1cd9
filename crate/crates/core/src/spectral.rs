//! Divergences between two members of a scale family sharing a location.
//!
//! These depend on the scale matrices only through the relative spectrum
//! `λ = eig(Σ₂Σ₁⁻¹)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{DivergenceEstimate, Method, MIN_SAMPLES};
use crate::generators::FGenerator;
use crate::mc::{for_each_chunk, Welford, CHUNK_SIZE};
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::radial::RadialDensity;
use crate::spd::{check_len, relative_spectrum, LocationScaleParam, SpdMatrix, Spectrum};

/// Two scale matrices around a common location, with their relative spectrum.
#[derive(Debug, Clone)]
pub struct ScalePair {
    mu: Vec<f64>,
    sigma1: SpdMatrix,
    sigma2: SpdMatrix,
    spectrum: Spectrum,
}

impl ScalePair {
    pub fn new(mu: &[f64], sigma1: SpdMatrix, sigma2: SpdMatrix) -> Result<Self> {
        check_len(sigma1.dim(), mu.len())?;
        check_len(sigma2.dim(), mu.len())?;
        let spectrum = relative_spectrum(&sigma1, &sigma2)?;
        Ok(Self {
            mu: mu.to_vec(),
            sigma1,
            sigma2,
            spectrum,
        })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma1(&self) -> &SpdMatrix {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &SpdMatrix {
        &self.sigma2
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Largest deviation between the cached spectrum and a fresh computation.
    pub fn spectrum_drift(&self) -> Result<f64> {
        let fresh = relative_spectrum(&self.sigma1, &self.sigma2)?;
        Ok(fresh
            .eigenvalues()
            .iter()
            .zip(self.spectrum.eigenvalues())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// The two members as location-scale parameters.
    pub fn params(&self) -> Result<(LocationScaleParam, LocationScaleParam)> {
        Ok((
            LocationScaleParam::new(&self.mu, self.sigma1.clone())?,
            LocationScaleParam::new(&self.mu, self.sigma2.clone())?,
        ))
    }

    pub fn kl(&self) -> f64 {
        spectral_kl(&self.spectrum)
    }

    pub fn rho(&self, beta: f64) -> Result<f64> {
        bhattacharyya_rho(beta, &self.sigma1, &self.sigma2)
    }

    pub fn alpha_divergence(&self, alpha: f64) -> Result<f64> {
        alpha_div_scale(alpha, &self.sigma1, &self.sigma2)
    }
}

/// `KL(N(μ,Σ₁) : N(μ,Σ₂)) = ½ Σ (1/λᵢ - 1 + log λᵢ)`.
pub fn spectral_kl(spectrum: &Spectrum) -> f64 {
    0.5 * spectrum
        .eigenvalues()
        .iter()
        .map(|&l| {
            let t = 1.0 / l - 1.0;
            t - t.ln_1p()
        })
        .sum::<f64>()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")))
    }
}

// log ∫ p₁^β p₂^{1-β} for centered normals; any real β for which the mixed
// matrix stays positive definite
fn log_rho(beta: f64, sigma1: &SpdMatrix, sigma2: &SpdMatrix) -> Result<f64> {
    check_len(sigma2.dim(), sigma1.dim())?;
    let mixed: DMatrix<f64> = sigma1.matrix() * (1.0 - beta) + sigma2.matrix() * beta;
    let mixed = SpdMatrix::new(mixed)?;
    Ok(0.5 * (1.0 - beta) * sigma1.log_det() + 0.5 * beta * sigma2.log_det() - 0.5 * mixed.log_det())
}

/// Bhattacharyya coefficient `ρ_β = ∫ p₁^β p₂^{1-β}` between `N(μ,Σ₁)` and
/// `N(μ,Σ₂)`, from the determinant ratio
/// `det(Σ₁)^{(1-β)/2} det(Σ₂)^{β/2} / det((1-β)Σ₁ + βΣ₂)^{1/2}`.
pub fn bhattacharyya_rho(beta: f64, sigma1: &SpdMatrix, sigma2: &SpdMatrix) -> Result<f64> {
    check_beta(beta)?;
    Ok(log_rho(beta, sigma1, sigma2)?.exp())
}

/// `ρ_β = Π sqrt(λᵢ^β / (1 + β(λᵢ - 1)))`.
pub fn bhattacharyya_rho_spectral(beta: f64, spectrum: &Spectrum) -> Result<f64> {
    check_beta(beta)?;
    let log: f64 = spectrum
        .eigenvalues()
        .iter()
        .map(|&l| 0.5 * (beta * l.ln() - (beta * (l - 1.0)).ln_1p()))
        .sum();
    Ok(log.exp())
}

/// α-divergence `4/(1-α²) (1 - ρ_{(1-α)/2})` between centered normals.
pub fn alpha_div_scale(alpha: f64, sigma1: &SpdMatrix, sigma2: &SpdMatrix) -> Result<f64> {
    if !alpha.is_finite() || (1.0 - alpha * alpha).abs() < f64::EPSILON {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite with |alpha| != 1 (use the KL forms), got {alpha}"
        )));
    }
    let lr = log_rho(0.5 * (1.0 - alpha), sigma1, sigma2)?;
    Ok((-4.0 / (1.0 - alpha * alpha) * lr.exp_m1()).max(0.0))
}

// log of the density ratio p₂/p₁ at a standard point y, in the eigenbasis
#[inline]
fn spectral_log_ratio(rd: &RadialDensity, kappa: &[f64], half_log_det: f64, y: &[f64]) -> (f64, f64) {
    let mut r = 0.0;
    let mut rk = 0.0;
    for (k, v) in kappa.iter().zip(y) {
        let s = v * v;
        r += s;
        rk += k * s;
    }
    let lp = rd.log_tilde_p(r);
    (lp, half_log_det + rd.log_tilde_p(rk))
}

fn kappa_of(rd: &RadialDensity, spectrum: &Spectrum) -> Result<(Vec<f64>, f64)> {
    check_len(spectrum.dim(), rd.dim())?;
    let kappa: Vec<f64> = spectrum.eigenvalues().iter().map(|l| 1.0 / l).collect();
    Ok((kappa, -0.5 * spectrum.log_det()))
}

/// Monte Carlo `I_f(p₁ : p₂)` for a centered scale pair of any radial family,
/// using only the relative spectrum: `E_y f(Π κᵢ^{1/2} p̃(Σ κᵢ yᵢ²) / p̃(‖y‖²))`
/// with `y` standard and `κ = 1/λ`.
pub fn spectral_fdiv_generic(
    gen: &FGenerator,
    rd: &RadialDensity,
    spectrum: &Spectrum,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let (kappa, half_log_det) = kappa_of(rd, spectrum)?;
    let d = rd.dim();
    let sampler = rd.standard_sampler();
    let parts = for_each_chunk(n, seed, |ci, count, rng| -> Result<(Welford, usize)> {
        let mut y = vec![0.0; d];
        let mut acc = Welford::default();
        let mut clamped = 0;
        for j in 0..count {
            sampler.draw(rng, &mut y);
            let (lp, lq) = spectral_log_ratio(rd, &kappa, half_log_det, &y);
            let (v, c) = gen.eval_log_ratio(lq - lp);
            if !v.is_finite() {
                return Err(Error::NonFiniteSummand {
                    value: v,
                    index: ci * CHUNK_SIZE + j,
                    sample: y.clone(),
                });
            }
            clamped += c as usize;
            acc.push(v);
        }
        Ok((acc, clamped))
    });
    let mut total = Welford::default();
    let mut clamped = 0;
    for part in parts {
        let (w, c) = part?;
        total.merge(&w);
        clamped += c;
    }
    if !total.mean.is_finite() {
        return Err(Error::NonFinite("Monte Carlo average".into()));
    }
    Ok(DivergenceEstimate {
        value: total.mean,
        std_error: total.std_error(),
        n_samples: n,
        method: Method::Mc,
        seed: Some(seed),
        clamped,
    })
}

/// Deterministic counterpart of [`spectral_fdiv_generic`] for `d ≤ 2` by
/// (nested) adaptive quadrature to about `1e-6`.
pub fn spectral_fdiv_quad(gen: &FGenerator, rd: &RadialDensity, spectrum: &Spectrum) -> Result<DivergenceEstimate> {
    let (kappa, half_log_det) = kappa_of(rd, spectrum)?;
    let log_floor = -690.0;
    let term = |y: &[f64]| {
        let (lp, lq) = spectral_log_ratio(rd, &kappa, half_log_det, y);
        if lp < log_floor && lq < log_floor {
            0.0
        } else {
            gen.weighted(lp, lq)
        }
    };
    let value = match rd.dim() {
        1 => integrate_real_line(|t| term(&[t]), &[0.0], &QuadOptions::with_abs_tol(1e-8))?.value,
        2 => {
            let inner_opts = QuadOptions::with_abs_tol(1e-9);
            let failure = std::cell::RefCell::new(None);
            let outer = |s: f64| match integrate_real_line(|t| term(&[s, t]), &[0.0], &inner_opts) {
                Ok(r) => r.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            let r = integrate_real_line(outer, &[0.0], &QuadOptions::with_abs_tol(1e-7))?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            r.value
        }
        d => {
            return Err(Error::InvalidArgument(format!(
                "tensor quadrature is limited to d <= 2, got {d}"
            )))
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("quadrature value".into()));
    }
    Ok(DivergenceEstimate::deterministic(value, Method::QuadNd))
}
