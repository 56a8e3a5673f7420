//! Discrete-time atom coupled to a chain of field modes.
//!
//! The atom interacts with mode `k − 1` during step `k`, after which the mode
//! never interacts again. Tensor factor order is atom first, then modes
//! `0..N`. Algebras of future observables are built in the Heisenberg
//! picture, `E_{≥n} = Γ(n)† (B(h_A) ⊗ 1_{modes<n} ⊗ B(modes≥n)) Γ(n)` with
//! `Γ(n) = U_n ⋯ U_1`.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::algebra::{relative_commutant, AlgebraBasis};
use crate::eth::{AlgebraSchedule, ScheduleRule};
use crate::linalg::{
    c, identity, partial_trace, propagator, tensor, tensor_all, CMatrix, CVector, LinalgError, Unitary,
};
use crate::models::fluorescence::{bloch_from_density, BlochVector};
use crate::models::{ModelError, MAX_TOTAL_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomFieldConfig {
    pub atom_levels: usize,
    pub n_modes: usize,
    pub mode_dim: usize,
    pub g: f64,
    pub tau: f64,
    /// Level splitting of the atom Hamiltonian, `H_A = Ω σ₃ / 2` for a qubit.
    pub omega: f64,
}

impl Default for AtomFieldConfig {
    fn default() -> Self {
        Self {
            atom_levels: 2,
            n_modes: 3,
            mode_dim: 2,
            g: 0.1,
            tau: 1.0,
            omega: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AtomFieldModel {
    config: AtomFieldConfig,
    /// Interaction unitary on atom ⊗ one mode.
    interaction: Unitary,
    /// `U_k` embedded in the full space, `k = 1..=N`.
    steps: Vec<CMatrix>,
    /// `Γ(n)`, `n = 0..=N`.
    propagators: Vec<CMatrix>,
    schedule: AlgebraSchedule,
}

/// Atom Hamiltonian: evenly spaced levels from `Ω/2` (index 0) down to `−Ω/2`.
pub fn atom_hamiltonian(levels: usize, omega: f64) -> CMatrix {
    let diag: Vec<_> = (0..levels)
        .map(|j| {
            let x = if levels == 1 {
                0.0
            } else {
                0.5 - j as f64 / (levels - 1) as f64
            };
            c(omega * x, 0.0)
        })
        .collect();
    CMatrix::from_diagonal(&CVector::from_vec(diag))
}

/// Atom lowering `Σ |j+1⟩⟨j|`; equals `σ₋` for two levels.
pub fn atom_lowering(levels: usize) -> CMatrix {
    CMatrix::from_fn(levels, levels, |i, j| if i == j + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

/// Mode annihilation `a = Σ √k |k−1⟩⟨k|`, index 0 being the vacuum.
pub fn mode_lowering(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn embed(op_atom: &CMatrix, mode_op: Option<(usize, &CMatrix)>, cfg: &AtomFieldConfig) -> CMatrix {
    let id = identity(cfg.mode_dim);
    let mut factors = vec![op_atom];
    for k in 0..cfg.n_modes {
        match mode_op {
            Some((m, op)) if m == k => factors.push(op),
            _ => factors.push(&id),
        }
    }
    tensor_all(factors)
}

/// Generator of one interaction step on atom ⊗ mode `mode` inside the full space.
fn step_generator(cfg: &AtomFieldConfig, mode: usize) -> CMatrix {
    let l = atom_lowering(cfg.atom_levels);
    let a = mode_lowering(cfg.mode_dim);
    let free = embed(&atom_hamiltonian(cfg.atom_levels, cfg.omega), None, cfg);
    let emit = embed(&l, Some((mode, &a.adjoint())), cfg);
    let absorb = embed(&l.adjoint(), Some((mode, &a)), cfg);
    free + (emit + absorb).scale(cfg.g)
}

pub fn build_atom_field_model(config: AtomFieldConfig) -> Result<AtomFieldModel, ModelError> {
    let cfg = config;
    if cfg.atom_levels < 2 || cfg.mode_dim < 2 {
        return Err(ModelError::Parameter("atom_levels and mode_dim must be at least 2".into()));
    }
    if !(cfg.g.is_finite() && cfg.tau.is_finite() && cfg.omega.is_finite()) || cfg.tau <= 0.0 {
        return Err(ModelError::Parameter("g, tau, Omega must be finite and tau > 0".into()));
    }
    let total = cfg
        .mode_dim
        .checked_pow(cfg.n_modes as u32)
        .and_then(|m| m.checked_mul(cfg.atom_levels))
        .unwrap_or(usize::MAX);
    if total > MAX_TOTAL_DIM {
        return Err(ModelError::Budget(total));
    }

    let single = AtomFieldConfig { n_modes: 1, ..cfg };
    let interaction = Unitary::new(propagator(&step_generator(&single, 0), cfg.tau, 1.0)?)?;

    let steps = (0..cfg.n_modes)
        .map(|k| propagator(&step_generator(&cfg, k), cfg.tau, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut propagators = vec![identity(total)];
    for u in &steps {
        let next = u * propagators.last().expect("nonempty");
        propagators.push(next);
    }

    let mut algebras = Vec::with_capacity(cfg.n_modes + 1);
    for (n, gamma) in propagators.iter().enumerate() {
        let mut factor = AlgebraBasis::full(cfg.atom_levels);
        for k in 0..cfg.n_modes {
            let mode_alg = if k < n {
                AlgebraBasis::scalars(cfg.mode_dim)
            } else {
                AlgebraBasis::full(cfg.mode_dim)
            };
            factor = factor.tensor(&mode_alg);
        }
        algebras.push(Arc::new(factor.conjugated(gamma)));
    }
    let schedule = AlgebraSchedule::new(algebras, cfg.tau, ScheduleRule::Propagated)?;

    Ok(AtomFieldModel {
        config: cfg,
        interaction,
        steps,
        propagators,
        schedule,
    })
}

impl AtomFieldModel {
    pub fn config(&self) -> &AtomFieldConfig {
        &self.config
    }

    pub fn total_dim(&self) -> usize {
        self.config.atom_levels * self.config.mode_dim.pow(self.config.n_modes as u32)
    }

    pub fn interaction(&self) -> &Unitary {
        &self.interaction
    }

    /// `U_k` for `k = 1..=N`.
    pub fn step_unitary(&self, k: usize) -> &CMatrix {
        &self.steps[k - 1]
    }

    /// `Γ(n) = U_n ⋯ U_1`.
    pub fn propagator(&self, n: usize) -> &CMatrix {
        &self.propagators[n]
    }

    pub fn schedule(&self) -> &AlgebraSchedule {
        &self.schedule
    }

    /// Atom in `rho_atom`, every mode in the vacuum.
    pub fn product_state(&self, rho_atom: &CMatrix) -> CMatrix {
        let d = self.config.mode_dim;
        let vac = CMatrix::from_fn(d, d, |i, j| if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let mut out = rho_atom.clone();
        for _ in 0..self.config.n_modes {
            out = tensor(&out, &vac);
        }
        out
    }

    /// One step of the reduced atom dynamics: couple to a fresh vacuum mode, then trace it out.
    pub fn reduced_step(&self, rho_atom: &CMatrix) -> Result<CMatrix, ModelError> {
        let m = self.config.atom_levels;
        let d = self.config.mode_dim;
        if rho_atom.shape() != (m, m) {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{m}x{m}"),
                found: format!("{:?}", rho_atom.shape()),
            }
            .into());
        }
        let vac = CMatrix::from_fn(d, d, |i, j| if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let u = self.interaction.matrix();
        let joint = u * tensor(rho_atom, &vac) * u.adjoint();
        Ok(partial_trace(&joint, &[m, d], &[0])?)
    }
}

/// `(computed_dim, expected_dim)` for the relative commutant of `E_{≥n′}` in `E_{≥n}`.
pub fn check_pdp(model: &AtomFieldModel, n: usize, n_prime: usize) -> Result<(usize, usize), ModelError> {
    let len = model.config.n_modes;
    if n >= n_prime || n_prime > len {
        return Err(ModelError::Parameter(format!(
            "need 0 ≤ n < n′ ≤ {len}, got n = {n}, n′ = {n_prime}"
        )));
    }
    let sched = model.schedule.algebras();
    let rc = relative_commutant(&sched[n_prime], &sched[n])?;
    let d2 = model.config.mode_dim * model.config.mode_dim;
    Ok((rc.dim(), d2.pow((n_prime - n) as u32)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub alpha: f64,
    /// `α / (g² τ)`; tends to 1 as `g → 0`.
    pub c0: f64,
    /// Largest relative deviation of the excited population from the fitted exponential.
    pub fit_residual: f64,
    pub tau: f64,
    pub g: f64,
    /// Microscopic `n₃` after each step, starting with `n₃ = 1` at `t = 0`.
    pub n3_micro: Vec<f64>,
}

/// Fits the decay rate of the reduced atom dynamics started in `+e₃` with `Ω = 0`.
pub fn calibrate_alpha(model: &AtomFieldModel) -> Result<Calibration, ModelError> {
    let cfg = model.config;
    if cfg.atom_levels != 2 {
        return Err(ModelError::Parameter("calibration needs a two-level atom".into()));
    }
    let probe = build_atom_field_model(AtomFieldConfig {
        n_modes: 1,
        omega: 0.0,
        ..cfg
    })?;
    let rate_guess = cfg.g * cfg.g * cfg.tau;
    let steps = if rate_guess > 0.0 {
        ((3.0 / rate_guess).ceil() as usize).clamp(10, 20_000)
    } else {
        10
    };

    let mut rho = crate::linalg::pauli::bloch_density([0.0, 0.0, 1.0]);
    let mut n3 = vec![1.0];
    for _ in 0..steps {
        rho = probe.reduced_step(&rho)?;
        n3.push(bloch_from_density(&rho).n3);
    }

    // least squares of ln p_k = −α t_k through the origin, p = (1 + n₃)/2
    let pts: Vec<(f64, f64)> = n3
        .iter()
        .enumerate()
        .map(|(k, &z)| (k as f64 * cfg.tau, (1.0 + z) / 2.0))
        .filter(|&(_, p)| p > 1e-12)
        .collect();
    let sxx: f64 = pts.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = pts.iter().map(|(t, p)| t * p.ln()).sum();
    let alpha = if sxx > 0.0 { (-sxy / sxx).max(0.0) } else { 0.0 };
    let fit_residual = pts
        .iter()
        .map(|&(t, p)| ((-alpha * t).exp() - p).abs() / p)
        .fold(0.0, f64::max);
    if fit_residual > 0.05 {
        warn!("exponential fit of the microscopic decay deviates by {:.1}%", 100.0 * fit_residual);
    }
    let c0 = if rate_guess > 0.0 { alpha / rate_guess } else { f64::NAN };
    Ok(Calibration {
        alpha,
        c0,
        fit_residual,
        tau: cfg.tau,
        g: cfg.g,
        n3_micro: n3,
    })
}

/// Bloch vector of the reduced atom state after `steps` fresh-mode steps.
pub fn reduced_trajectory(model: &AtomFieldModel, n0: BlochVector, steps: usize) -> Result<Vec<BlochVector>, ModelError> {
    if model.config.atom_levels != 2 {
        return Err(ModelError::Parameter("Bloch trajectories need a two-level atom".into()));
    }
    let mut rho = n0.density();
    let mut out = vec![n0];
    for _ in 0..steps {
        rho = model.reduced_step(&rho)?;
        out.push(bloch_from_density(&rho));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::commutant;
    use crate::linalg::pauli::*;
    use crate::linalg::{hs_norm, random::random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_model(n_modes: usize, g: f64, omega: f64) -> AtomFieldModel {
        build_atom_field_model(AtomFieldConfig {
            atom_levels: 2,
            n_modes,
            mode_dim: 2,
            g,
            tau: 1.0,
            omega,
        })
        .unwrap()
    }

    #[test]
    fn ladder_conventions() {
        assert_eq!(atom_lowering(2), sigma_minus());
        let a = mode_lowering(3);
        let n = a.adjoint() * &a;
        for k in 0..3 {
            assert!((n[(k, k)].re - k as f64).abs() < 1e-14);
        }
        assert!(hs_norm(&(atom_hamiltonian(2, 1.3) - sigma_z().scale(0.65))) < 1e-15);
    }

    #[test]
    fn decoupled_step_is_precession() {
        let m = qubit_model(1, 0.0, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(2, &mut rng);
        let u = propagator(&atom_hamiltonian(2, 0.7), 1.0, 1.0).unwrap();
        let expected = &u * &rho * u.adjoint();
        assert!(hs_norm(&(m.reduced_step(&rho).unwrap() - expected)) < 1e-12);
    }

    #[test]
    fn reduced_step_preserves_trace() {
        let m = qubit_model(1, 0.05, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let rho = random_density(2, &mut rng);
            let out = m.reduced_step(&rho).unwrap();
            assert!((out.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn schedule_is_strictly_decreasing() {
        let m = qubit_model(3, 0.1, 0.5);
        assert_eq!(m.total_dim(), 16);
        let algs = m.schedule().algebras();
        assert_eq!(algs.len(), 4);
        for w in algs.windows(2) {
            assert!(w[0].containment_residual(&w[1]) < 1e-8);
            assert!(w[1].dim() < w[0].dim());
            assert!(w[1].containment_residual(&w[0]) > 0.1);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = build_atom_field_model(AtomFieldConfig {
            n_modes: 6,
            ..AtomFieldConfig::default()
        })
        .unwrap_err();
        assert!(matches!(err, ModelError::Budget(128)));
    }

    #[test]
    fn pdp_on_two_modes() {
        for g in [0.0, 0.1] {
            let m = qubit_model(2, g, 0.3);
            assert_eq!(check_pdp(&m, 0, 1).unwrap(), (4, 4));
            assert_eq!(check_pdp(&m, 1, 2).unwrap(), (4, 4));
            assert_eq!(check_pdp(&m, 0, 2).unwrap(), (16, 16));
        }
        assert!(check_pdp(&qubit_model(2, 0.1, 0.0), 1, 1).is_err());
    }

    #[test]
    fn relative_commutant_by_brute_force() {
        // direct nullspace oracle for n = 0, n′ = 1 on one mode: commutant of E_{≥1} inside the full algebra
        let m = qubit_model(1, 0.2, 0.0);
        let e1 = &m.schedule().algebras()[1];
        let comm = commutant(e1);
        assert_eq!(comm.dim(), 4);
        for a in comm.basis() {
            for b in e1.basis() {
                assert!(hs_norm(&(a * b - b * a)) < 1e-9);
            }
        }
    }

    #[test]
    fn calibration_matches_cosine_law() {
        let m = qubit_model(1, 0.1, 0.0);
        let cal = calibrate_alpha(&m).unwrap();
        let exact = -(0.1f64.cos().powi(2)).ln();
        assert!((cal.alpha - exact).abs() < 1e-10);
        assert!((cal.c0 - 1.0).abs() < 0.01);
        let free = calibrate_alpha(&qubit_model(1, 0.0, 0.0)).unwrap();
        assert_eq!(free.alpha, 0.0);
    }
}
