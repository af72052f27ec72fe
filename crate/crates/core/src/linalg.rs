//! Dense complex linear algebra: Hermitian spectral calculus, norms and
//! partial traces on `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::zeros(rows, cols)
}

pub fn identity(d: usize) -> Mat {
    Mat::identity(d, d)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> Mat {
    let mut m = zeros(values.len(), values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c(*v, 0.0);
    }
    m
}

/// Builds a matrix from real row-major rows.
pub fn from_real_rows(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    Mat::from_fn(r, cols, |i, j| c(rows[i][j], 0.0))
}

pub fn basis_vector(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = ONE;
    v
}

/// `|u><v|`.
pub fn outer(u: &CVec, v: &CVec) -> Mat {
    u * v.adjoint()
}

/// `|u><u|`.
pub fn projector_onto(u: &CVec) -> Mat {
    outer(u, u)
}

/// Matrix unit `|i><j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> Mat {
    let mut m = zeros(d, d);
    m[(i, j)] = ONE;
    m
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

pub fn trace(m: &Mat) -> C64 {
    m.trace()
}

pub fn real_trace(m: &Mat) -> f64 {
    m.trace().re
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &Mat) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

pub fn ensure_square(m: &Mat) -> Result<usize> {
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry modulus.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus of `M - M*`.
pub fn hermiticity_defect(m: &Mat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigendecomposition of the Hermitian part of a matrix, eigenvalues sorted
/// non-increasing. Within degenerate clusters the basis is arbitrary.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Mat,
}

impl HermitianEigen {
    pub fn new(m: &Mat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return HermitianEigen {
                values: Vec::new(),
                vectors: zeros(0, 0),
            };
        }
        let eig = hermitian_part(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        HermitianEigen { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }

    /// `sum_k f(lambda_k) |v_k><v_k|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Number of eigenvalues strictly above `eps`.
    pub fn rank(&self, eps: f64) -> usize {
        self.values.iter().filter(|&&v| v > eps).count()
    }
}

pub fn lambda_max(m: &Mat) -> f64 {
    HermitianEigen::new(m).max()
}

pub fn lambda_min(m: &Mat) -> f64 {
    HermitianEigen::new(m).min()
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Sum of singular values.
pub fn trace_norm(m: &Mat) -> Result<f64> {
    ensure_finite(m)?;
    Ok(singular_values(m).iter().sum())
}

/// Operator norm (largest singular value).
pub fn operator_norm(m: &Mat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Square root of the positive part of a Hermitian matrix.
pub fn sqrt_psd(m: &Mat) -> Mat {
    HermitianEigen::new(m).map(|v| v.max(0.0).sqrt())
}

/// Inverse square root on the numerical support: eigenvalues above `eps` map
/// to `lambda^{-1/2}`, the rest to zero.
pub fn pinv_sqrt(m: &Mat, eps: f64) -> Mat {
    HermitianEigen::new(m).map(|v| if v > eps { 1.0 / v.sqrt() } else { 0.0 })
}

/// Orthogonal projector onto the span of eigenvectors with eigenvalue above `eps`.
pub fn support_projector(m: &Mat, eps: f64) -> Mat {
    HermitianEigen::new(m).map(|v| if v > eps { 1.0 } else { 0.0 })
}

/// Positive part of the Hermitian part (projection onto the PSD cone in
/// Frobenius norm).
pub fn psd_projection(m: &Mat) -> Mat {
    HermitianEigen::new(m).map(|v| v.max(0.0))
}

/// Which tensor factor of a bipartite space to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    /// The first factor (`X` in `X (x) Y`).
    First,
    /// The second factor.
    Second,
}

/// Partial trace of an operator on `X (x) Y` with `dim X = dx`, `dim Y = dy`.
pub fn partial_trace(m: &Mat, dx: usize, dy: usize, keep: Subsystem) -> Result<Mat> {
    let d = ensure_square(m)?;
    if dx == 0 || dy == 0 || dx * dy != d {
        return Err(Error::invalid(format!(
            "dimension {d} does not factor as {dx} x {dy}"
        )));
    }
    Ok(ptrace(m, dx, dy, keep))
}

pub(crate) fn ptrace(m: &Mat, dx: usize, dy: usize, keep: Subsystem) -> Mat {
    match keep {
        Subsystem::First => Mat::from_fn(dx, dx, |i, k| {
            (0..dy).map(|j| m[(i * dy + j, k * dy + j)]).sum()
        }),
        Subsystem::Second => Mat::from_fn(dy, dy, |j, l| {
            (0..dx).map(|i| m[(i * dy + j, i * dy + l)]).sum()
        }),
    }
}

/// Reshapes a vector on `X (x) Y` into the `dx x dy` coefficient matrix.
pub fn unvec(v: &CVec, dx: usize, dy: usize) -> Mat {
    Mat::from_fn(dx, dy, |i, j| v[i * dy + j])
}

/// Inverse of [`unvec`].
pub fn vec_of(m: &Mat) -> CVec {
    let (dx, dy) = m.shape();
    CVec::from_fn(dx * dy, |k, _| m[(k / dy, k % dy)])
}

/// Unitary `exp(i H)` for Hermitian `H`.
pub fn unitary_from_hermitian(h: &Mat) -> Mat {
    let eig = HermitianEigen::new(h);
    let n = eig.dim();
    let mut scaled = eig.vectors.clone();
    for k in 0..n {
        let phase = C64::from_polar(1.0, eig.values[k]);
        for i in 0..n {
            scaled[(i, k)] *= phase;
        }
    }
    scaled * eig.vectors.adjoint()
}
