//! Concrete scenarios: the discrete-time atom–field model, the fluorescence
//! jump process with its photomultiplier experiments, and a Stern–Gerlach toy.

pub mod atom_field;
pub mod fluorescence;
pub mod stern_gerlach;

use thiserror::Error;

use crate::algebra::AlgebraError;
use crate::eth::EthError;
use crate::linalg::LinalgError;

pub use atom_field::{build_atom_field_model, calibrate_alpha, check_pdp, AtomFieldConfig, AtomFieldModel, Calibration};
pub use fluorescence::{
    bloch_drift, fluorescence_jump_step, integrate_lindblad, lindblad_rhs, photomultiplier_experiment,
    run_fluorescence_ensemble, BlochVector, ExperimentOutcome, FluorescenceEnsemble, FluorescenceParams,
};
pub use stern_gerlach::{stern_gerlach_demo, Detector};

/// Largest ambient dimension `M·d^N` accepted by [`build_atom_field_model`].
pub const MAX_TOTAL_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("total dimension {0} exceeds budget {MAX_TOTAL_DIM}")]
    Budget(usize),
    #[error("invalid model parameter: {0}")]
    Parameter(String),
    #[error("Bloch vector norm {0} exceeds 1")]
    OutsideBall(f64),
    #[error("Lindblad integration left the unit ball (|n| = {norm}) at t = {t}; use a smaller dt")]
    Unstable { t: f64, norm: f64 },
    #[error("drifted Bloch vector vanished; alpha·dt must stay below 1")]
    DegenerateDrift,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Eth(#[from] EthError),
}
