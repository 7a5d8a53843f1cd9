//! Adaptive Gauss–Kronrod (10/21) quadrature on finite and infinite intervals.
//!
//! Global adaptive bisection: the interval with the largest error estimate is
//! split until the summed estimate meets the tolerance or the interval budget
//! runs out. Infinite ends are mapped onto `[0, 1)` with `x = a + t/(1-t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error: err }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let first = kronrod21(f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut intervals = 1;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::NonFinite(format!(
                "quadrature integrand on [{a}, {b}]"
            )));
        }
        if total_err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            break;
        }
        if intervals >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: total,
                error: total_err,
                intervals,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::QuadratureNonConvergence {
                estimate: total,
                error: total_err,
                intervals,
            });
        }
        let left = kronrod21(f, worst.a, mid);
        let right = kronrod21(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        intervals += 1;
        if intervals % 64 == 0 {
            // resum to shed accumulated cancellation in the running totals
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        abs_error,
        intervals,
    })
}

/// Integrates `f` over `[a, b]`; either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("NaN integration bound".into()));
    }
    if a > b {
        let r = integrate_dyn(f, b, a, opts)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(&f, a, b, opts),
        (true, false) => adapt(
            &|t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            opts,
        ),
        (false, true) => adapt(
            &|t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            opts,
        ),
        (false, false) => {
            let half = QuadOptions {
                abs_tol: 0.5 * opts.abs_tol,
                ..*opts
            };
            let l = integrate_dyn(f, f64::NEG_INFINITY, 0.0, &half)?;
            let r = integrate_dyn(f, 0.0, f64::INFINITY, &half)?;
            Ok(QuadResult {
                value: l.value + r.value,
                abs_error: l.abs_error + r.abs_error,
                intervals: l.intervals + r.intervals,
            })
        }
    }
}

/// Integrates over the whole real line, split at the given breakpoints.
pub fn integrate_real_line<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(0.0);
    }
    let pieces = pts.len() + 1;
    let sub = QuadOptions {
        abs_tol: opts.abs_tol / pieces as f64,
        ..*opts
    };
    let mut edges = Vec::with_capacity(pieces + 1);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(&pts);
    edges.push(f64::INFINITY);
    let mut out = QuadResult {
        value: 0.0,
        abs_error: 0.0,
        intervals: 0,
    };
    for w in edges.windows(2) {
        let r = integrate(&f, w[0], w[1], &sub)?;
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.intervals += r.intervals;
    }
    Ok(out)
}
