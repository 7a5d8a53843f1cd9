//! SPD matrices, Mahalanobis geometry, relative spectra and the affine group.
//!
//! Every other module consumes these types. Matrices are stored as nalgebra
//! `DMatrix<f64>`; the Cholesky factor of each [`SpdMatrix`] is computed once at
//! construction and kept row-major for the sampling hot path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric positive-definite matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
    // lower factor, row-major, for forward substitution
    chol_rows: Vec<f64>,
    log_det: f64,
    symmetrized: bool,
}

impl SpdMatrix {
    /// Validates and factors `m`.
    ///
    /// The input is replaced by `(m + mᵀ)/2` when its relative asymmetry is
    /// nonzero but below [`SYMMETRY_TOL`]; larger asymmetry is rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        let rel = if scale > 0.0 { asym / scale } else { 0.0 };
        if rel > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(rel));
        }
        let symmetrized = asym > 0.0;
        let matrix = if symmetrized {
            (&m + m.transpose()) * 0.5
        } else {
            m
        };
        let chol = matrix
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        let n = rows;
        let mut log_det = 0.0;
        for i in 0..n {
            let d = chol[(i, i)];
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            log_det += 2.0 * d.ln();
        }
        let mut chol_rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                chol_rows[i * n + j] = chol[(i, j)];
            }
        }
        Ok(Self {
            matrix,
            chol,
            chol_rows,
            log_det,
            symmetrized,
        })
    }

    /// Builds from a row-major slice of `dim * dim` entries.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `L Lᵀ = Σ`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Whether construction averaged the input with its transpose.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    /// Writes `L⁻¹ v` into `out` by forward substitution.
    pub fn whiten_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let row = &self.chol_rows[i * n..i * n + i + 1];
            let mut acc = v[i];
            for j in 0..i {
                acc -= row[j] * out[j];
            }
            out[i] = acc / row[i];
        }
    }

    /// `vᵀ Σ⁻¹ v` through the Cholesky factor; `scratch` must have length `dim`.
    pub fn quad_form_inv(&self, v: &[f64], scratch: &mut [f64]) -> f64 {
        self.whiten_into(v, scratch);
        scratch.iter().map(|y| y * y).sum()
    }

    /// `Σ⁻¹ B` via two triangular solves.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .chol
            .solve_lower_triangular(b)
            .expect("cholesky factor has positive diagonal");
        self.chol
            .transpose()
            .solve_upper_triangular(&y)
            .expect("cholesky factor has positive diagonal")
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }

    /// Applies `g` to the eigenvalues: `V g(W) Vᵀ`, symmetrized.
    fn spectral_map(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let eig = self.eigen();
        let v = &eig.eigenvectors;
        let w = DMatrix::from_diagonal(&eig.eigenvalues.map(g));
        let m = v * w * v.transpose();
        (&m + m.transpose()) * 0.5
    }

    /// Symmetric inverse square root `Σ^{-1/2}`.
    pub fn inv_sqrt_matrix(&self) -> DMatrix<f64> {
        self.spectral_map(|w| 1.0 / w.sqrt())
    }

    /// Eigenvalues of `Σ`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.eigen().eigenvalues.iter().copied().collect();
        w.sort_by(f64::total_cmp);
        w
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Relative Frobenius distance to `other`.
    pub fn relative_difference(&self, other: &SpdMatrix) -> f64 {
        let scale = self.matrix.norm().max(other.matrix.norm());
        (&self.matrix - &other.matrix).norm() / scale
    }
}

/// Symmetric square root `S` with `S S = Σ`.
pub fn sqrt_spd(sigma: &SpdMatrix) -> SpdMatrix {
    SpdMatrix::new(sigma.spectral_map(f64::sqrt)).expect("square root of SPD is SPD")
}

/// Squared Mahalanobis distance `(μ₂-μ₁)ᵀ Σ⁻¹ (μ₂-μ₁)`.
pub fn mahalanobis_sq(mu1: &[f64], mu2: &[f64], sigma: &SpdMatrix) -> Result<f64> {
    let d = sigma.dim();
    check_len(mu1.len(), d)?;
    check_len(mu2.len(), d)?;
    let diff: Vec<f64> = mu2.iter().zip(mu1).map(|(b, a)| b - a).collect();
    let mut scratch = vec![0.0; d];
    Ok(sigma.quad_form_inv(&diff, &mut scratch))
}

pub(crate) fn check_len(got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// How the scale factor of a [`LocationScaleParam`] was specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleConvention {
    /// Factor is the symmetric root `Σ^{1/2}`.
    SymmetricRoot,
    /// Factor is an arbitrary invertible `P` with `Σ = P Pᵀ`.
    Factor,
}

/// One member `(l, P)` of a location-scale family.
///
/// The density only depends on `Σ = P Pᵀ`; the factor `P` is kept because it
/// is what the affine group acts on and what the sampler pushes draws through.
#[derive(Debug, Clone)]
pub struct LocationScaleParam {
    location: DVector<f64>,
    sigma: SpdMatrix,
    factor: DMatrix<f64>,
    factor_rows: Vec<f64>,
    convention: ScaleConvention,
}

impl LocationScaleParam {
    /// Parameter `(μ, Σ)`; the factor is `Σ^{1/2}`.
    pub fn new(location: &[f64], sigma: SpdMatrix) -> Result<Self> {
        check_len(location.len(), sigma.dim())?;
        let factor = sqrt_spd(&sigma).matrix().clone();
        Ok(Self::assemble(
            DVector::from_column_slice(location),
            sigma,
            factor,
            ScaleConvention::SymmetricRoot,
        ))
    }

    /// Parameter `(l, P)` for an invertible `P`; `Σ = P Pᵀ`.
    pub fn from_factor(location: &[f64], factor: DMatrix<f64>) -> Result<Self> {
        let (r, c) = factor.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        check_len(location.len(), r)?;
        if factor.clone().lu().determinant() == 0.0 {
            return Err(Error::Singular);
        }
        let sigma = SpdMatrix::new(&factor * factor.transpose())?;
        Ok(Self::assemble(
            DVector::from_column_slice(location),
            sigma,
            factor,
            ScaleConvention::Factor,
        ))
    }

    /// The standard member `(0, I)`.
    pub fn standard(dim: usize) -> Self {
        Self::assemble(
            DVector::zeros(dim),
            SpdMatrix::identity(dim),
            DMatrix::identity(dim, dim),
            ScaleConvention::SymmetricRoot,
        )
    }

    fn assemble(
        location: DVector<f64>,
        sigma: SpdMatrix,
        factor: DMatrix<f64>,
        convention: ScaleConvention,
    ) -> Self {
        let n = factor.nrows();
        let mut factor_rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                factor_rows[i * n + j] = factor[(i, j)];
            }
        }
        Self {
            location,
            sigma,
            factor,
            factor_rows,
            convention,
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn location(&self) -> &[f64] {
        self.location.as_slice()
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn convention(&self) -> ScaleConvention {
        self.convention
    }

    /// Same member with the factor replaced by `Σ^{1/2}`.
    pub fn with_symmetric_root(&self) -> Self {
        Self::new(self.location(), self.sigma.clone()).expect("dimensions already checked")
    }

    /// Writes `l + P z` into `out`.
    pub fn push_forward_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = &self.factor_rows[i * n..(i + 1) * n];
            let mut acc = self.location[i];
            for j in 0..n {
                acc += row[j] * z[j];
            }
            out[i] = acc;
        }
    }
}

/// Element `(l, A)` of the affine group with law `(l₁,A₁)(l₂,A₂) = (l₁+A₁l₂, A₁A₂)`.
#[derive(Debug, Clone)]
pub struct AffineElement {
    translation: DVector<f64>,
    linear: DMatrix<f64>,
}

impl AffineElement {
    pub fn new(translation: &[f64], linear: DMatrix<f64>) -> Result<Self> {
        let (r, c) = linear.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        check_len(translation.len(), r)?;
        if linear.clone().lu().determinant() == 0.0 {
            return Err(Error::Singular);
        }
        Ok(Self {
            translation: DVector::from_column_slice(translation),
            linear,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            translation: DVector::zeros(dim),
            linear: DMatrix::identity(dim, dim),
        }
    }

    /// The group element `(l, P)` of a parameter.
    pub fn from_param(p: &LocationScaleParam) -> Self {
        Self {
            translation: DVector::from_column_slice(p.location()),
            linear: p.factor().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn translation(&self) -> &[f64] {
        self.translation.as_slice()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn compose(&self, other: &AffineElement) -> Result<AffineElement> {
        check_len(other.dim(), self.dim())?;
        Ok(AffineElement {
            translation: &self.translation + &self.linear * &other.translation,
            linear: &self.linear * &other.linear,
        })
    }

    /// `(-A⁻¹l, A⁻¹)`.
    pub fn inverse(&self) -> Result<AffineElement> {
        let inv = self.linear.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(AffineElement {
            translation: -(&inv * &self.translation),
            linear: inv,
        })
    }

    /// Action on a family member: `(l,A).(l₁,P₁) = (l + A l₁, A P₁)`.
    pub fn act(&self, p: &LocationScaleParam) -> Result<LocationScaleParam> {
        let g = self.compose(&AffineElement::from_param(p))?;
        LocationScaleParam::from_factor(g.translation.as_slice(), g.linear)
    }
}

/// Maps `(p₁, p₂)` to `((0, I), (P₁⁻¹(l₂-l₁), P₁⁻¹P₂))`.
pub fn canonicalize_pair(
    p1: &LocationScaleParam,
    p2: &LocationScaleParam,
) -> Result<(LocationScaleParam, LocationScaleParam)> {
    check_len(p2.dim(), p1.dim())?;
    let lu = p1.factor().clone().lu();
    let diff = DVector::from_iterator(
        p1.dim(),
        p2.location().iter().zip(p1.location()).map(|(b, a)| b - a),
    );
    let loc = lu.solve(&diff).ok_or(Error::Singular)?;
    let lin = lu.solve(p2.factor()).ok_or(Error::Singular)?;
    Ok((
        LocationScaleParam::standard(p1.dim()),
        LocationScaleParam::from_factor(loc.as_slice(), lin)?,
    ))
}

/// Eigenvalues of `Σ₂Σ₁⁻¹`, ascending and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Sorts ascending; rejects empty input or any non-positive value.
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        if let Some(&bad) = eigenvalues.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveEigenvalue(bad));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ log λᵢ = log det(Σ₂Σ₁⁻¹)`.
    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// Spectrum of the swapped pair: `1/λᵢ`.
    pub fn reciprocal(&self) -> Spectrum {
        Spectrum::new(self.eigenvalues.iter().map(|l| 1.0 / l).collect())
            .expect("reciprocals of positive values are positive")
    }
}

/// Relative spectrum via the symmetric congruence `Σ₁^{-1/2} Σ₂ Σ₁^{-1/2}`.
pub fn relative_spectrum(sigma1: &SpdMatrix, sigma2: &SpdMatrix) -> Result<Spectrum> {
    check_len(sigma2.dim(), sigma1.dim())?;
    let r = sigma1.inv_sqrt_matrix();
    let m = &r * sigma2.matrix() * &r;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    Spectrum::new(eig.eigenvalues.iter().copied().collect())
}
