//! Spherical standard densities `p(x) = p̃(‖x‖²)` and their location-scale families.
//!
//! Normal: `p̃(r) = (2π)^{-d/2} e^{-r/2}`.
//! Student ν: `p̃(r) = Γ((ν+d)/2) / (Γ(ν/2) (νπ)^{d/2}) · (1 + r/ν)^{-(ν+d)/2}`.
//! Cauchy is Student with ν = 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mc::{chunk_rng, CHUNK_SIZE};
use crate::quadrature::{integrate, QuadOptions};
use crate::spd::{check_len, LocationScaleParam};
use crate::special::{ln_gamma, ln_unit_sphere_area};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal,
    /// Student with ν degrees of freedom.
    Student(f64),
}

impl Family {
    pub const CAUCHY: Family = Family::Student(1.0);
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Normal => f.write_str("normal"),
            Family::Student(nu) if *nu == 1.0 => f.write_str("cauchy"),
            Family::Student(nu) => write!(f, "student:{nu}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownFamily(s.to_string());
        match s {
            "normal" => Ok(Family::Normal),
            "cauchy" => Ok(Family::CAUCHY),
            _ => {
                let nu: f64 = s
                    .strip_prefix("student:")
                    .ok_or_else(bad)?
                    .parse()
                    .map_err(|_| bad())?;
                if nu > 0.0 && nu.is_finite() {
                    Ok(Family::Student(nu))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// A spherical standard density in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDensity {
    family: Family,
    dim: usize,
    log_norm_const: f64,
}

impl RadialDensity {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let d = dim as f64;
        let log_norm_const = match family {
            Family::Normal => -0.5 * d * (2.0 * std::f64::consts::PI).ln(),
            Family::Student(nu) => {
                if !(nu > 0.0) || !nu.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "degrees of freedom must be positive, got {nu}"
                    )));
                }
                ln_gamma((nu + d) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * d * (nu * std::f64::consts::PI).ln()
            }
        };
        Ok(Self {
            family,
            dim,
            log_norm_const,
        })
    }

    pub fn normal(dim: usize) -> Self {
        Self::new(Family::Normal, dim).expect("positive dimension")
    }

    pub fn cauchy(dim: usize) -> Self {
        Self::new(Family::CAUCHY, dim).expect("positive dimension")
    }

    pub fn student(nu: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Student(nu), dim)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    /// Same family in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.family, dim)
    }

    /// `log p̃(r)` for `r ≥ 0`.
    #[inline]
    pub fn log_tilde_p(&self, r: f64) -> f64 {
        match self.family {
            Family::Normal => self.log_norm_const - 0.5 * r,
            Family::Student(nu) => {
                self.log_norm_const - 0.5 * (nu + self.dim as f64) * (r / nu).ln_1p()
            }
        }
    }

    pub fn tilde_p(&self, r: f64) -> f64 {
        self.log_tilde_p(r).exp()
    }

    pub fn tilde_p_prime(&self, r: f64) -> f64 {
        match self.family {
            Family::Normal => -0.5 * self.tilde_p(r),
            Family::Student(nu) => {
                -0.5 * (nu + self.dim as f64) / nu * self.tilde_p(r) / (1.0 + r / nu)
            }
        }
    }

    /// `log p_{μ,Σ}(x)` using caller-provided scratch of length `2d`.
    #[inline]
    pub fn log_density_with(&self, param: &LocationScaleParam, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dim;
        let (diff, work) = scratch[..2 * d].split_at_mut(d);
        for ((o, a), b) in diff.iter_mut().zip(x).zip(param.location()) {
            *o = a - b;
        }
        let r = param.sigma().quad_form_inv(diff, work);
        -0.5 * param.sigma().log_det() + self.log_tilde_p(r)
    }

    pub fn log_density_at(&self, param: &LocationScaleParam, x: &[f64]) -> Result<f64> {
        check_len(param.dim(), self.dim)?;
        check_len(x.len(), self.dim)?;
        let mut scratch = vec![0.0; 2 * self.dim];
        Ok(self.log_density_with(param, x, &mut scratch))
    }

    /// `det(Σ)^{-1/2} p̃(Δ²_Σ(x, μ))`.
    pub fn density_at(&self, param: &LocationScaleParam, x: &[f64]) -> Result<f64> {
        Ok(self.log_density_at(param, x)?.exp())
    }

    /// `∫ S_{d-1} r^{d-1} p̃(r²) dr`, which is 1 for a normalized density.
    pub fn radial_mass(&self) -> Result<f64> {
        let d = self.dim as f64;
        let ln_s = ln_unit_sphere_area(self.dim);
        let g = |r: f64| {
            if r <= 0.0 {
                return if self.dim == 1 { (ln_s + self.log_tilde_p(0.0)).exp() } else { 0.0 };
            }
            (ln_s + (d - 1.0) * r.ln() + self.log_tilde_p(r * r)).exp()
        };
        let opts = QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        };
        let head = integrate(g, 0.0, 1.0, &opts)?;
        let tail = integrate(g, 1.0, f64::INFINITY, &opts)?;
        Ok(head.value + tail.value)
    }

    pub(crate) fn standard_sampler(&self) -> StandardSampler {
        StandardSampler {
            chi2: match self.family {
                Family::Normal => None,
                Family::Student(nu) => Some((
                    ChiSquared::new(nu).expect("nu validated at construction"),
                    nu,
                )),
            },
        }
    }

    /// `n` draws from `p_{l,P}` as an `n × d` matrix, deterministic in `seed`.
    ///
    /// A draw is `l + P z` with `z` standard normal, or for Student
    /// `z / sqrt(χ²_ν / ν)` with one χ² variate shared by all coordinates.
    pub fn sample(&self, param: &LocationScaleParam, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        check_len(param.dim(), self.dim)?;
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let d = self.dim;
        let sampler = self.standard_sampler();
        let mut rows = vec![0.0; n * d];
        rows.par_chunks_mut(CHUNK_SIZE * d)
            .enumerate()
            .for_each(|(ci, block)| {
                let mut rng = chunk_rng(seed, ci);
                let mut z = vec![0.0; d];
                for x in block.chunks_mut(d) {
                    sampler.draw(&mut rng, &mut z);
                    param.push_forward_into(&z, x);
                }
            });
        Ok(DMatrix::from_row_slice(n, d, &rows))
    }
}

/// Draws standard (`(0, I)`) variates of a family.
pub(crate) struct StandardSampler {
    chi2: Option<(ChiSquared<f64>, f64)>,
}

impl StandardSampler {
    #[inline]
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if let Some((chi2, nu)) = &self.chi2 {
            let w: f64 = chi2.sample(rng);
            let s = (nu / w).sqrt();
            for v in z.iter_mut() {
                *v *= s;
            }
        }
    }
}
