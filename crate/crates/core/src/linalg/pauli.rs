//! Pauli matrices and qubit helpers. Basis order is `|↑⟩ = |0⟩`, `|↓⟩ = |1⟩`.

use super::{c, CMatrix};

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Lowering operator `|↓⟩⟨↑|`.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
}

/// Raising operator `|↑⟩⟨↓|`.
pub fn sigma_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// `ρ(n) = (1 + n·σ)/2`.
pub fn bloch_density(n: [f64; 3]) -> CMatrix {
    (CMatrix::identity(2, 2) + sigma_x().scale(n[0]) + sigma_y().scale(n[1]) + sigma_z().scale(n[2]))
        .scale(0.5)
}

/// `n = tr(σ ρ)`.
pub fn bloch_vector(rho: &CMatrix) -> [f64; 3] {
    [
        (sigma_x() * rho).trace().re,
        (sigma_y() * rho).trace().re,
        (sigma_z() * rho).trace().re,
    ]
}
