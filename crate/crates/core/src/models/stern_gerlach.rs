//! Stern–Gerlach toy: a spin and two detectors, one per beam.
//!
//! Factors are spin ⊗ upper detector ⊗ lower detector, detectors starting in
//! `|0⟩` (dormant). The coupling `U = P↑ ⊗ X ⊗ 1 + P↓ ⊗ 1 ⊗ X` fires the upper
//! detector on `|↑⟩` and the lower one on `|↓⟩`. The state is then evaluated
//! on the pointer algebra, `U† (1 ⊗ D ⊗ D) U` with `D` the diagonal readings
//! of a detector, and one ETH step is taken.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::algebra::AlgebraBasis;
use crate::eth::{eth_step, EthParams, State};
use crate::linalg::pauli::{bloch_density, sigma_x};
use crate::linalg::{identity, tensor, tensor_all, CMatrix, DensityMatrix};
use crate::models::fluorescence::BlochVector;
use crate::models::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Upper,
    Lower,
}

/// The detector coupling on spin ⊗ upper ⊗ lower.
pub fn detector_coupling() -> CMatrix {
    let up = bloch_density([0.0, 0.0, 1.0]);
    let down = bloch_density([0.0, 0.0, -1.0]);
    let i2 = identity(2);
    tensor_all([&up, &sigma_x(), &i2]) + tensor_all([&down, &i2, &sigma_x()])
}

fn fired(upper: bool, lower: bool) -> CMatrix {
    let e = |on: bool| bloch_density([0.0, 0.0, if on { -1.0 } else { 1.0 }]);
    tensor_all([&identity(2), &e(upper), &e(lower)])
}

pub fn stern_gerlach_demo<R: Rng + ?Sized>(spin: BlochVector, rng: &mut R) -> Result<Detector, ModelError> {
    stern_gerlach_demo_with(spin, rng, &EthParams::default())
}

pub fn stern_gerlach_demo_with<R: Rng + ?Sized>(
    spin: BlochVector,
    rng: &mut R,
    params: &EthParams,
) -> Result<Detector, ModelError> {
    if spin.norm() > 1.0 + 1e-10 {
        return Err(ModelError::OutsideBall(spin.norm()));
    }
    let dormant = bloch_density([0.0, 0.0, 1.0]);
    let omega = tensor(&tensor(&spin.density(), &dormant), &dormant);
    let u = detector_coupling();
    let pointer = AlgebraBasis::scalars(2)
        .tensor(&AlgebraBasis::diagonal(2))
        .tensor(&AlgebraBasis::diagonal(2))
        .conjugated(&u);
    let s0 = State::new(DensityMatrix::new(omega)?, Arc::new(AlgebraBasis::full(8)), 0)?;
    let (_, record) = eth_step(&s0, Arc::new(pointer), rng, params)?;

    // projections in the Heisenberg picture; pull the chosen one back through U
    let chosen = &u * record.projection.matrix() * u.adjoint();
    let weight = |m: &CMatrix| (&chosen * m).trace().re;
    let upper = weight(&fired(true, false));
    let lower = weight(&fired(false, true));
    match (upper > 0.5, lower > 0.5) {
        (true, false) => Ok(Detector::Upper),
        (false, true) => Ok(Detector::Lower),
        _ => Err(ModelError::Parameter(format!(
            "selected pointer event is not a single detector click (upper {upper:.3}, lower {lower:.3})"
        ))),
    }
}
