use std::ops::Deref;

use super::{
    ensure_square, hermitian_eig_unchecked, hermitian_part, hermiticity_residual, hs_norm, identity,
    is_finite, CMatrix, LinalgError, Result,
};
use crate::tolerance::TOL;

fn check_hermitian(m: &CMatrix) -> Result<()> {
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
    Ok(())
}

macro_rules! matrix_newtype {
    ($name:ident) => {
        impl Deref for $name {
            type Target = CMatrix;
            fn deref(&self) -> &CMatrix {
                &self.0
            }
        }

        impl AsRef<CMatrix> for $name {
            fn as_ref(&self) -> &CMatrix {
                &self.0
            }
        }

        impl From<$name> for CMatrix {
            fn from(m: $name) -> CMatrix {
                m.0
            }
        }

        impl $name {
            pub fn matrix(&self) -> &CMatrix {
                &self.0
            }

            pub fn into_inner(self) -> CMatrix {
                self.0
            }

            pub fn dim(&self) -> usize {
                self.0.nrows()
            }
        }
    };
}

/// Square matrix equal to its adjoint within `TOL.herm` (relative).
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);
matrix_newtype!(Hermitian);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_hermitian(&m)?;
        Ok(Self(m))
    }

    /// Takes the Hermitian part of `m`; only finiteness and shape are checked.
    pub fn from_hermitian_part(m: &CMatrix) -> Result<Self> {
        ensure_square(m)?;
        if !is_finite(m) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(hermitian_part(m)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMatrix);
matrix_newtype!(Unitary);

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = ensure_square(&m)?;
        if !is_finite(&m) {
            return Err(LinalgError::NonFinite);
        }
        let residual = hs_norm(&(m.adjoint() * &m - identity(d)));
        if residual > TOL.unitary * d as f64 {
            return Err(LinalgError::Invariant {
                invariant: "unitary: ‖U†U − I‖ ≤ 1e-10·dim",
                residual,
            });
        }
        Ok(Self(m))
    }
}

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);
matrix_newtype!(DensityMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_hermitian(&m)?;
        let m = hermitian_part(&m);
        let tr = m.trace();
        let residual = (tr - 1.0).norm();
        if residual > TOL.trace {
            return Err(LinalgError::Invariant {
                invariant: "density: tr ρ = 1 within 1e-10",
                residual,
            });
        }
        let min_eig = hermitian_eig_unchecked(&m).values[0];
        if min_eig < -TOL.positivity {
            return Err(LinalgError::Invariant {
                invariant: "density: smallest eigenvalue ≥ −1e-10",
                residual: -min_eig,
            });
        }
        Ok(Self(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim).unscale(dim as f64))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) column vector.
    pub fn pure(psi: &super::CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LinalgError::Invariant {
                invariant: "density: pure state vector must be nonzero",
                residual: norm,
            });
        }
        let v = psi.unscale(norm);
        Ok(Self(&v * v.adjoint()))
    }

    /// Expectation `tr(ρ X)`.
    pub fn expect(&self, x: &CMatrix) -> super::C64 {
        (&self.0 * x).trace()
    }
}

/// Orthogonal projection: `π = π†`, `π² = π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(CMatrix);
matrix_newtype!(Projection);

impl Projection {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_hermitian(&m)?;
        let residual = hs_norm(&(&m * &m - &m));
        if residual > TOL.idempotency {
            return Err(LinalgError::Invariant {
                invariant: "projection: ‖π² − π‖ ≤ 1e-10",
                residual,
            });
        }
        Ok(Self(m))
    }

    /// Projection onto the column span of `v`, whose columns must be orthonormal.
    pub fn onto_orthonormal(v: &CMatrix) -> Result<Self> {
        Self::new(hermitian_part(&(v * v.adjoint())))
    }

    pub fn rank(&self) -> usize {
        self.0.trace().re.round() as usize
    }

    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self(identity(d) - &self.0)
    }
}
