//! Dense complex matrix kernel.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Validated wrappers
//! ([`Hermitian`], [`Unitary`], [`DensityMatrix`], [`Projection`]) carry the
//! invariants that the rest of the crate relies on; constructing one checks
//! them and reports the violated invariant by name.

mod checked;
pub mod pauli;
pub mod random;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::tolerance::TOL;

pub use checked::{DensityMatrix, Hermitian, Projection, Unitary};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("invariant violated: {invariant} (residual {residual:e})")]
    Invariant { invariant: &'static str, residual: f64 },
    #[error("inconsistent tensor dimensions: {0}")]
    TensorDims(String),
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> LinalgError {
    LinalgError::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hilbert–Schmidt norm `sqrt(tr(M†M))`.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖M − M†‖_HS`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    hs_norm(&(m - m.adjoint()))
}

/// Hilbert–Schmidt pairing `tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(mismatch(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(a.dotc(b))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Hermitian part `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V†`.
    pub fn map<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let scaled = CMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(C64::from)
    }

    /// Projection onto the span of the eigenvectors with indices in `range`.
    pub fn spectral_projection(&self, range: std::ops::Range<usize>) -> CMatrix {
        let cols = self.vectors.columns(range.start, range.len());
        cols * cols.adjoint()
    }
}

pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    ensure_square(m)?;
    if !is_finite(m) {
        return Err(LinalgError::NonFinite);
    }
    let residual = hermiticity_residual(m);
    if residual > TOL.herm * hs_norm(m).max(f64::MIN_POSITIVE) {
        return Err(LinalgError::Invariant {
            invariant: "hermitian: ‖M − M†‖ ≤ 1e-12·‖M‖",
            residual,
        });
    }
    Ok(hermitian_eig_unchecked(&hermitian_part(m)))
}

pub(crate) fn hermitian_eig_unchecked(m: &CMatrix) -> HermitianEigen {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// `exp(-i t H / ħ)`, built from the eigendecomposition of `H`.
pub fn propagator(h: &CMatrix, t: f64, hbar: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(h)?;
    Ok(eig.map(|l| C64::from_polar(1.0, -t * l / hbar)))
}

/// Heisenberg evolution `e^{itH/ħ} M e^{-itH/ħ}`.
pub fn evolve_unitary(h: &CMatrix, t: f64, hbar: f64, m: &CMatrix) -> Result<CMatrix> {
    let d = ensure_square(h)?;
    if m.shape() != (d, d) {
        return Err(mismatch(format!("{d}x{d}"), format!("{:?}", m.shape())));
    }
    if t == 0.0 {
        return Ok(m.clone());
    }
    let u = propagator(h, t, hbar)?;
    Ok(u.adjoint() * m * u)
}

/// Kronecker product `A ⊗ B`; the first factor is the most significant index.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor_all<'a, I>(factors: I) -> CMatrix
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

/// Partial trace keeping the tensor factors listed in `keep` (in factor order).
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total = ensure_square(m)?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(LinalgError::TensorDims(format!("bad factor list {dims:?}")));
    }
    let product: usize = dims.iter().product();
    if product != total {
        return Err(LinalgError::TensorDims(format!(
            "factors {dims:?} multiply to {product}, matrix is {total}x{total}"
        )));
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= dims.len()) {
        return Err(LinalgError::TensorDims(format!(
            "keep {keep:?} out of range for {} factors",
            dims.len()
        )));
    }
    let is_kept: Vec<bool> = (0..dims.len()).map(|k| kept.contains(&k)).collect();
    let out_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let reduced_index = |ds: &[usize], want_kept: bool| {
        ds.iter()
            .zip(dims)
            .zip(&is_kept)
            .filter(|(_, &k)| k == want_kept)
            .fold(0usize, |acc, ((&x, &d), _)| acc * d + x)
    };

    let mut out = CMatrix::zeros(out_dim, out_dim);
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..total {
        digits(i, dims, &mut di);
        let ti = reduced_index(&di, false);
        let ki = reduced_index(&di, true);
        for j in 0..total {
            digits(j, dims, &mut dj);
            if reduced_index(&dj, false) == ti {
                out[(ki, reduced_index(&dj, true))] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Column-stacked vectorization of a matrix (nalgebra storage order).
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &[C64], dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v)
}

/// Orthonormal basis (as columns) of the nullspace of `a`.
///
/// A right-singular vector is null when its singular value is at most
/// `rel_tol · max(σ_max, scale)`. `scale` sets the operator magnitude used
/// when every singular value is zero or tiny.
pub fn nullspace(a: &CMatrix, rel_tol: f64, scale: f64) -> CMatrix {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    let padded;
    let a = if rows < cols {
        padded = a.clone().resize_vertically(cols, C64::from(0.0));
        &padded
    } else {
        a
    };
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_tol * sigma_max.max(scale);
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .collect();
    CMatrix::from_fn(cols, null.len(), |i, j| v_t[(null[j], i)].conj())
}
