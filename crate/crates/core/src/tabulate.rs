//! Tables of `h_f(u)` and the rational surrogate `a·u/(u+b)`.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{mc_estimate, quad_fdiv_1d, DivergenceEstimate, Method};
use crate::generators::FGenerator;
use crate::radial::{Family, RadialDensity};
use crate::spd::{LocationScaleParam, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfRow {
    pub u: f64,
    pub h: f64,
    pub std_error: f64,
    pub method: Method,
}

/// Estimated `h_f` on a grid of squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct HfTable {
    pub generator: String,
    pub family: String,
    rows: Vec<HfRow>,
}

impl HfTable {
    pub const HEADER: &'static str = "u,h,std_error,method";

    /// Checks that `u` strictly increases and every `h` is finite.
    pub fn new(generator: &str, family: &str, rows: Vec<HfRow>) -> Result<Self> {
        for w in rows.windows(2) {
            if !(w[1].u > w[0].u) {
                return Err(Error::InvalidArgument(format!(
                    "table grid must be strictly increasing ({} then {})",
                    w[0].u, w[1].u
                )));
            }
        }
        if let Some(r) = rows.iter().find(|r| !r.h.is_finite() || !(r.std_error >= 0.0)) {
            return Err(Error::NonFinite(format!("table row at u = {}", r.u)));
        }
        Ok(Self {
            generator: generator.to_string(),
            family: family.to_string(),
            rows,
        })
    }

    pub fn rows(&self) -> &[HfRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Copy with every `h` and standard error multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|r| HfRow {
                h: r.h * c,
                std_error: r.std_error * c.abs(),
                ..*r
            })
            .collect();
        Self::new(&self.generator, &self.family, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{:?},{:?},{:?},{}\n", r.u, r.h, r.std_error, r.method));
        }
        s
    }

    /// Parses the CSV written by [`HfTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidArgument(format!("table line {line}: {msg}"));
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end_matches('\r') == Self::HEADER => {}
            Some(h) => return Err(bad(1, &format!("expected header `{}`, found `{h}`", Self::HEADER))),
            None => return Err(bad(1, "empty input")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(i + 2, &format!("expected 4 fields, found {}", fields.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(i + 2, &format!("not a number: `{s}`")));
            rows.push(HfRow {
                u: num(fields[0])?,
                h: num(fields[1])?,
                std_error: num(fields[2])?,
                method: fields[3].trim().parse()?,
            });
        }
        Self::new("unknown", "unknown", rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableMethod {
    Quad,
    Mc { n: usize, seed: u64 },
}

/// Estimates `h_f(u)` at each grid point from the pair at squared distance `u`.
///
/// Normal pairs in any dimension reduce to `N(0,1)` against `N(√u,1)`. Other
/// families use the univariate pair when `d = 1` and otherwise the
/// `d`-dimensional pair `(0, I)`, `(√u e₁, I)`, which only Monte Carlo handles.
pub fn tabulate_hf(gen: &FGenerator, rd: &RadialDensity, grid: &[f64], method: TableMethod) -> Result<HfTable> {
    if let Some(u) = grid.iter().find(|u| !(**u >= 0.0) || !u.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid values must be non-negative, got {u}")));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
    }
    let work_rd = match rd.family() {
        Family::Normal => RadialDensity::normal(1),
        _ => *rd,
    };
    let d = work_rd.dim();
    if d > 1 && method == TableMethod::Quad {
        return Err(Error::InvalidArgument(format!(
            "quadrature tables for {} need d = 1 (got {d}); use Monte Carlo",
            rd.family()
        )));
    }
    let base = LocationScaleParam::standard(d);
    let row = |u: f64| -> Result<HfRow> {
        let mut loc = vec![0.0; d];
        loc[0] = u.sqrt();
        let shifted = LocationScaleParam::new(&loc, SpdMatrix::identity(d))?;
        let e: DivergenceEstimate = match method {
            TableMethod::Quad => quad_fdiv_1d(gen, &work_rd, &base, &shifted)?,
            TableMethod::Mc { n, seed } => mc_estimate(gen, &work_rd, &base, &shifted, n, seed)?,
        };
        Ok(HfRow {
            u,
            h: e.value,
            std_error: e.std_error,
            method: e.method,
        })
    };
    let rows: Vec<HfRow> = grid
        .par_iter()
        .map(|&u| {
            row(u).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::InvalidArgument(format!("row u = {u}: {m}")),
                Error::NonFinite(m) => Error::NonFinite(format!("row u = {u}: {m}")),
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    HfTable::new(&gen.cli_name(), &rd.family().to_string(), rows)
}

/// The surrogate `a·u/(u + b)` fitted to a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalFit {
    pub a: f64,
    pub b: f64,
    pub fit_domain: (f64, f64),
    pub max_rel_error: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

impl RationalFit {
    pub fn eval(&self, u: f64) -> f64 {
        self.a * u / (u + self.b)
    }

    /// Largest `|fit(u)/h - 1|` over the table rows.
    pub fn max_rel_error_on(&self, table: &HfTable) -> f64 {
        table
            .rows()
            .iter()
            .map(|r| ((self.eval(r.u) - r.h) / r.h).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for RationalFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={:?} b={:?} max_rel_error={:?} domain=[{:?},{:?}]",
            self.a, self.b, self.max_rel_error, self.fit_domain.0, self.fit_domain.1
        )
    }
}

pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_STEP_TOL: f64 = 1e-10;

/// Relative least-squares fit of `a·u/(u+b)` by Levenberg-Marquardt in
/// `(log a, log b)`, started from `a = max h`, `b = median u`.
pub fn fit_rational(table: &HfTable) -> Result<RationalFit> {
    let rows = table.rows();
    if rows.len() < 4 {
        return Err(Error::DegenerateTable(format!("need at least 4 rows, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.u > 0.0) || !(r.h > 0.0)) {
        return Err(Error::DegenerateTable(format!(
            "rows need u > 0 and h > 0 (u = {}, h = {})",
            r.u, r.h
        )));
    }
    let h0 = rows[0].h;
    if rows.iter().all(|r| r.h == h0) {
        return Err(Error::DegenerateTable("all h values are equal".into()));
    }
    let u: Vec<f64> = rows.iter().map(|r| r.u).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();

    let cost = |la: f64, lb: f64| -> f64 {
        let (a, b) = (la.exp(), lb.exp());
        u.iter()
            .zip(&h)
            .map(|(&u, &h)| {
                let r = a * u / (u + b) / h - 1.0;
                r * r
            })
            .sum()
    };

    let h_max = h.iter().copied().fold(f64::MIN, f64::max);
    let mut la = h_max.ln();
    let mut lb = u[u.len() / 2].ln();
    if u.len().is_multiple_of(2) {
        lb = (0.5 * (u[u.len() / 2 - 1] + u[u.len() / 2])).ln();
    }
    let mut c = cost(la, lb);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let (a, b) = (la.exp(), lb.exp());
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&u, &h) in u.iter().zip(&h) {
            let m = a * u / (u + b) / h;
            let r = m - 1.0;
            let j = [m, -m * b / (u + b)];
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        loop {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            let step = if det.abs() > 0.0 {
                [
                    -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det,
                    -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det,
                ]
            } else {
                [0.0, 0.0]
            };
            let size = step[0].abs().max(step[1].abs());
            if !size.is_finite() {
                return Err(Error::FitNonConvergence("non-finite Levenberg-Marquardt step".into()));
            }
            if size < FIT_STEP_TOL {
                converged = true;
                break;
            }
            let trial = cost(la + step[0], lb + step[1]);
            if trial.is_finite() && trial <= c {
                la += step[0];
                lb += step[1];
                c = trial;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent left at working precision
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
    }
    let mut fit = RationalFit {
        a: la.exp(),
        b: lb.exp(),
        fit_domain: (u[0], u[u.len() - 1]),
        max_rel_error: 0.0,
        iterations,
        converged,
    };
    if !fit.a.is_finite() || !fit.b.is_finite() {
        return Err(Error::FitNonConvergence(format!("parameters diverged (a = {}, b = {})", fit.a, fit.b)));
    }
    fit.max_rel_error = fit.max_rel_error_on(table);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// Index of the first row that fails to exceed its predecessor.
    pub first_violation: Option<usize>,
    /// Smallest margin `h_{i+1} - h_i + 3(σ_i + σ_{i+1})` over the table.
    pub slack: f64,
}

/// Checks `h_{i+1} > h_i - 3(σ_i + σ_{i+1})`; exact rows need strict increase.
pub fn monotonicity_report(table: &HfTable) -> MonotonicityReport {
    let mut report = MonotonicityReport {
        pass: true,
        first_violation: None,
        slack: f64::INFINITY,
    };
    for (i, w) in table.rows().windows(2).enumerate() {
        let margin = w[1].h - w[0].h + 3.0 * (w[0].std_error + w[1].std_error);
        report.slack = report.slack.min(margin);
        if !(margin > 0.0) && report.first_violation.is_none() {
            report.pass = false;
            report.first_violation = Some(i + 1);
        }
    }
    report
}
