//! Monte Carlo and quadrature estimators of `I_f(p : q)`.
//!
//! Monte Carlo samples from `p` itself, so each summand is `f(q(x)/p(x))`.
//! Ratios are formed in log space and clamped at
//! [`RATIO_FLOOR`](crate::generators::RATIO_FLOOR).

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::generators::FGenerator;
use crate::mc::{for_each_chunk, Welford, CHUNK_SIZE};
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::radial::{Family, RadialDensity};
use crate::spd::{check_len, mahalanobis_sq, LocationScaleParam, SpdMatrix};

/// Smallest sample count accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: usize = 100;

/// Relative tolerance for "same scale matrix" in [`reduce_location`].
pub const SCALE_TOL: f64 = 1e-10;

const LOG_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mc,
    McReduced,
    Quad1d,
    QuadNd,
    Closed,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::McReduced => "mc_reduced",
            Method::Quad1d => "quad_1d",
            Method::QuadNd => "quad_nd",
            Method::Closed => "closed",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Method::Mc | Method::McReduced)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mc" => Method::Mc,
            "mc_reduced" => Method::McReduced,
            "quad_1d" => Method::Quad1d,
            "quad_nd" => Method::QuadNd,
            "closed" => Method::Closed,
            _ => return Err(Error::InvalidArgument(format!("unknown method tag `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceEstimate {
    pub value: f64,
    /// Zero for deterministic methods.
    pub std_error: f64,
    pub n_samples: usize,
    pub method: Method,
    pub seed: Option<u64>,
    /// Summands whose ratio fell below [`RATIO_FLOOR`](crate::generators::RATIO_FLOOR).
    pub clamped: usize,
}

impl DivergenceEstimate {
    pub fn deterministic(value: f64, method: Method) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
            method,
            seed: None,
            clamped: 0,
        }
    }

    /// `|a - b| ≤ k · sqrt(se_a² + se_b²)`
    pub fn agrees_with(&self, other: &DivergenceEstimate, k: f64) -> bool {
        let se = self.std_error.hypot(other.std_error);
        (self.value - other.value).abs() <= k * se
    }
}

impl fmt::Display for DivergenceEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "value={:?} std_error={:?} method={}",
            self.value, self.std_error, self.method
        )
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    Ok(())
}

/// Mean of `g(log q(x) - log p(x))` over `x ~ p`, with `g` returning the
/// summand and whether it was clamped.
fn mc_log_ratio_mean<G>(
    rd: &RadialDensity,
    p: &LocationScaleParam,
    q: &LocationScaleParam,
    n: usize,
    seed: u64,
    g: G,
) -> Result<(Welford, usize)>
where
    G: Fn(f64) -> (f64, bool) + Sync,
{
    check_samples(n)?;
    let d = rd.dim();
    check_len(p.dim(), d)?;
    check_len(q.dim(), d)?;
    let sampler = rd.standard_sampler();
    let parts = for_each_chunk(n, seed, |ci, count, rng| -> Result<(Welford, usize)> {
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut scratch = vec![0.0; 2 * d];
        let mut acc = Welford::default();
        let mut clamped = 0;
        for j in 0..count {
            sampler.draw(rng, &mut z);
            p.push_forward_into(&z, &mut x);
            let lp = rd.log_density_with(p, &x, &mut scratch);
            let lq = rd.log_density_with(q, &x, &mut scratch);
            let (v, c) = g(lq - lp);
            if !v.is_finite() {
                return Err(Error::NonFiniteSummand {
                    value: v,
                    index: ci * CHUNK_SIZE + j,
                    sample: x.clone(),
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
    if !total.mean.is_finite() || !total.m2.is_finite() {
        return Err(Error::NonFinite("Monte Carlo average".into()));
    }
    Ok((total, clamped))
}

/// Monte Carlo estimate of `I_f(p1 : p2)` from `n` draws of `p1`.
pub fn mc_estimate(
    gen: &FGenerator,
    rd: &RadialDensity,
    p1: &LocationScaleParam,
    p2: &LocationScaleParam,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    let (w, clamped) = mc_log_ratio_mean(rd, p1, p2, n, seed, |lr| gen.eval_log_ratio(lr))?;
    Ok(DivergenceEstimate {
        value: w.mean,
        std_error: w.std_error(),
        n_samples: n,
        method: Method::Mc,
        seed: Some(seed),
        clamped,
    })
}

/// Monte Carlo estimate of the affinity `∫ p1^β p2^{1-β} = E_{p1}[(p2/p1)^{1-β}]`.
pub fn mc_affinity(
    beta: f64,
    rd: &RadialDensity,
    p1: &LocationScaleParam,
    p2: &LocationScaleParam,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite, got {beta}")));
    }
    let (w, _) = mc_log_ratio_mean(rd, p1, p2, n, seed, |lr| (((1.0 - beta) * lr).exp(), false))?;
    Ok(DivergenceEstimate {
        value: w.mean,
        std_error: w.std_error(),
        n_samples: n,
        method: Method::Mc,
        seed: Some(seed),
        clamped: 0,
    })
}

/// A same-scale normal pair mapped to the equivalent univariate pair.
#[derive(Debug, Clone)]
pub struct ReducedPair {
    pub delta_sq: f64,
    /// `N(0, 1)`
    pub p1: LocationScaleParam,
    /// `N(√Δ², 1)`
    pub p2: LocationScaleParam,
}

/// Replaces a same-scale pair by `(N(0,1), N(Δ,1))` with `Δ²` the squared
/// Mahalanobis distance between the locations.
pub fn reduce_location(p1: &LocationScaleParam, p2: &LocationScaleParam) -> Result<ReducedPair> {
    check_len(p2.dim(), p1.dim())?;
    let rel = p1.sigma().relative_difference(p2.sigma());
    if rel > SCALE_TOL {
        return Err(Error::UnequalScale(rel));
    }
    let delta_sq = mahalanobis_sq(p1.location(), p2.location(), p1.sigma())?;
    let one = SpdMatrix::identity(1);
    Ok(ReducedPair {
        delta_sq,
        p1: LocationScaleParam::new(&[0.0], one.clone())?,
        p2: LocationScaleParam::new(&[delta_sq.sqrt()], one)?,
    })
}

/// Monte Carlo on the reduced univariate normal pair.
pub fn mc_estimate_reduced(
    gen: &FGenerator,
    p1: &LocationScaleParam,
    p2: &LocationScaleParam,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    let r = reduce_location(p1, p2)?;
    let mut e = mc_estimate(gen, &RadialDensity::normal(1), &r.p1, &r.p2, n, seed)?;
    e.method = Method::McReduced;
    Ok(e)
}

/// `∫ p f(q/p)` over the real line from log-density callables.
///
/// Points where both densities are below `1e-300` contribute nothing.
pub fn quad_fdiv_1d_log<P, Q>(
    gen: &FGenerator,
    log_p: P,
    log_q: Q,
    breakpoints: &[f64],
) -> Result<DivergenceEstimate>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let integrand = |x: f64| {
        let lp = log_p(x);
        let lq = log_q(x);
        if lp < LOG_FLOOR && lq < LOG_FLOOR {
            0.0
        } else {
            gen.weighted(lp, lq)
        }
    };
    let r = integrate_real_line(integrand, breakpoints, &QuadOptions::with_abs_tol(1e-9))?;
    if !r.value.is_finite() {
        return Err(Error::NonFinite("quadrature value".into()));
    }
    Ok(DivergenceEstimate::deterministic(r.value, Method::Quad1d))
}

/// Quadrature of `I_f(p : q)` for univariate members of a family, split at
/// both locations.
pub fn quad_fdiv_1d(
    gen: &FGenerator,
    rd: &RadialDensity,
    p: &LocationScaleParam,
    q: &LocationScaleParam,
) -> Result<DivergenceEstimate> {
    if rd.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "univariate quadrature needs d = 1, got {}",
            rd.dim()
        )));
    }
    check_len(p.dim(), 1)?;
    check_len(q.dim(), 1)?;
    let log_density = |param: &LocationScaleParam, x: f64| {
        let s = param.sigma().matrix()[(0, 0)];
        let z = x - param.location()[0];
        rd.log_tilde_p(z * z / s) - 0.5 * s.ln()
    };
    quad_fdiv_1d_log(
        gen,
        |x| log_density(p, x),
        |x| log_density(q, x),
        &[p.location()[0], q.location()[0]],
    )
}

/// Running estimates over successive doublings of the sample count.
#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    pub sample_counts: Vec<usize>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// True when the running mean rises at every doubling and ends more than
    /// three combined standard errors above where it started, or when the
    /// relative standard error shrinks by less than half the `√n` rate.
    pub suspect_divergent: bool,
}

/// Reruns [`mc_estimate`] at `n0, 2 n0, 4 n0, …` to flag pairs whose
/// divergence appears infinite.
pub fn integrability_probe(
    gen: &FGenerator,
    rd: &RadialDensity,
    p1: &LocationScaleParam,
    p2: &LocationScaleParam,
    n0: usize,
    doublings: usize,
    seed: u64,
) -> Result<IntegrabilityReport> {
    let mut report = IntegrabilityReport {
        sample_counts: Vec::new(),
        means: Vec::new(),
        std_errors: Vec::new(),
        suspect_divergent: false,
    };
    let mut n = n0;
    for _ in 0..=doublings {
        let e = mc_estimate(gen, rd, p1, p2, n, seed)?;
        report.sample_counts.push(n);
        report.means.push(e.value);
        report.std_errors.push(e.std_error);
        n *= 2;
    }
    let m = &report.means;
    let s = &report.std_errors;
    let last = m.len() - 1;
    let rising = last > 0
        && m.windows(2).all(|w| w[1] > w[0])
        && m[last] - m[0] > 3.0 * s[last].hypot(s[0]);
    let stalled = last > 0 && s[0] > 0.0 && s[last] > 0.0 && {
        let rse_first = s[0] / m[0].abs();
        let rse_last = s[last] / m[last].abs();
        rse_last > 2.0 * rse_first / 2f64.powf(0.5 * last as f64)
    };
    report.suspect_divergent = rising || stalled;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeRow {
    pub d: usize,
    pub n: usize,
    pub seconds_full: f64,
    pub seconds_reduced: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeTable {
    pub rows: Vec<RuntimeRow>,
}

impl RuntimeTable {
    pub const HEADER: &'static str = "d,n,seconds_full,seconds_reduced,ratio";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:?},{:?},{:?}\n",
                r.d, r.n, r.seconds_full, r.seconds_reduced, r.ratio
            ));
        }
        s
    }
}

/// Times full `d`-dimensional Monte Carlo against the reduced univariate run
/// on the normal pair `N(0, I)`, `N(d^{-1/2} 1, I)` at the same `n`.
pub fn tabulate_runtime(gen: &FGenerator, dims: &[usize], n: usize, seed: u64) -> Result<RuntimeTable> {
    let mut rows = Vec::with_capacity(dims.len());
    for &d in dims {
        let rd = RadialDensity::new(Family::Normal, d)?;
        let p1 = LocationScaleParam::standard(d);
        let shift = vec![1.0 / (d as f64).sqrt(); d];
        let p2 = LocationScaleParam::new(&shift, SpdMatrix::identity(d))?;
        let t = Instant::now();
        mc_estimate(gen, &rd, &p1, &p2, n, seed)?;
        let seconds_full = t.elapsed().as_secs_f64();
        let t = Instant::now();
        mc_estimate_reduced(gen, &p1, &p2, n, seed)?;
        let seconds_reduced = t.elapsed().as_secs_f64();
        rows.push(RuntimeRow {
            d,
            n,
            seconds_full,
            seconds_reduced,
            ratio: seconds_full / seconds_reduced,
        });
    }
    Ok(RuntimeTable { rows })
}
