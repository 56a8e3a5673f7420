//! Numerical tolerances shared by every module.
//!
//! All thresholds live in one record so tests and callers can pin them.
//! [`Tolerances::default`] returns the values the library is validated against.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative Hermiticity: `‖M − M†‖ ≤ herm · ‖M‖` (Hilbert–Schmidt norms).
    pub herm: f64,
    /// `‖U†U − I‖ ≤ unitary · dim`.
    pub unitary: f64,
    /// `|tr ρ − 1|` for density matrices.
    pub trace: f64,
    /// Smallest admissible eigenvalue of a density matrix is `-positivity`.
    pub positivity: f64,
    /// `‖π² − π‖` for projections.
    pub idempotency: f64,
    /// Eigendecomposition reconstruction error relative to `‖M‖`.
    pub reconstruction: f64,
    /// Relative singular-value cutoff for nullspaces and subspace intersections.
    pub rank: f64,
    /// Projection residual for algebra closure checks and Gram–Schmidt drops.
    pub closure: f64,
    /// Orthogonality and completeness of partitions of unity.
    pub partition: f64,
    /// Eigenvalue clustering gap for minimal projections, relative to the spread.
    pub cluster_gap: f64,
    /// Span inclusion between consecutive algebras of a schedule.
    pub inclusion: f64,
    /// Born probabilities at or below this are treated as null branches.
    pub born_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-12,
            unitary: 1e-10,
            trace: 1e-10,
            positivity: 1e-10,
            idempotency: 1e-10,
            reconstruction: 1e-10,
            rank: 1e-9,
            closure: 1e-9,
            partition: 1e-9,
            cluster_gap: 1e-6,
            inclusion: 1e-8,
            born_eps: 1e-12,
        }
    }
}

/// The default tolerance record.
pub const TOL: Tolerances = Tolerances {
    herm: 1e-12,
    unitary: 1e-10,
    trace: 1e-10,
    positivity: 1e-10,
    idempotency: 1e-10,
    reconstruction: 1e-10,
    rank: 1e-9,
    closure: 1e-9,
    partition: 1e-9,
    cluster_gap: 1e-6,
    inclusion: 1e-8,
    born_eps: 1e-12,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const_matches_default() {
        assert_eq!(TOL, Tolerances::default());
    }
}
