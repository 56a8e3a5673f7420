//! Stochastic state-reduction dynamics on a decreasing family of algebras.
//!
//! A [`State`] is a density matrix together with the algebra of future
//! observables it is evaluated on. One step of the dynamics restricts the
//! state to the next (smaller) algebra of an [`AlgebraSchedule`], computes
//! the finest event generating the center of the restricted state's
//! centralizer, and, when that event has at least two branches with
//! non-negligible Born weight, collapses onto one of them.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    self, center, commuting_subalgebra, conditional_expectation, minimal_projections, AlgebraBasis, AlgebraError,
    PartitionOfUnity,
};
use crate::linalg::{self, hermitian_part, CMatrix, DensityMatrix, LinalgError, Projection};
use crate::tolerance::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EthError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("collapse onto null event (Born probability {0:e})")]
    NullCollapse(f64),
    #[error("schedule is not a co-filtration (inclusion residual {residual:e} at step {step})")]
    NotCoFiltration { step: usize, residual: f64 },
    #[error("schedule has {available} transitions, {requested} requested")]
    ScheduleTooShort { available: usize, requested: usize },
    #[error("state dimension {state} does not match algebra dimension {algebra}")]
    DimensionMismatch { state: usize, algebra: usize },
}

pub type Result<T, E = EthError> = std::result::Result<T, E>;

/// Knobs that are not part of the physics but must be pinned for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EthParams {
    /// Seed for the generic-element coefficients of `minimal_projections`.
    pub generic_seed: u64,
}

impl Default for EthParams {
    fn default() -> Self {
        Self {
            generic_seed: 0x00e7_4a11_5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct State {
    omega: DensityMatrix,
    algebra: Arc<AlgebraBasis>,
    time_index: usize,
}

impl State {
    pub fn new(omega: DensityMatrix, algebra: Arc<AlgebraBasis>, time_index: usize) -> Result<Self> {
        if omega.dim() != algebra.ambient_dim() {
            return Err(EthError::DimensionMismatch {
                state: omega.dim(),
                algebra: algebra.ambient_dim(),
            });
        }
        Ok(Self {
            omega,
            algebra,
            time_index,
        })
    }

    pub fn omega(&self) -> &DensityMatrix {
        &self.omega
    }

    pub fn algebra(&self) -> &Arc<AlgebraBasis> {
        &self.algebra
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    /// Same density, evaluated on `algebra` (the restriction `ω|_E`).
    pub fn restricted(&self, algebra: Arc<AlgebraBasis>) -> Self {
        Self {
            omega: self.omega.clone(),
            algebra,
            time_index: self.time_index,
        }
    }

    /// Density of the restricted state inside the algebra.
    pub fn restricted_density(&self) -> CMatrix {
        conditional_expectation(self.omega.matrix(), &self.algebra)
            .expect("dimensions checked at construction")
            .into_inner()
    }
}

/// `{A ∈ E : [A, Ω_E] = 0}` with `Ω_E` the conditional expectation of the
/// state onto its algebra `E`.
pub fn centralizer(s: &State) -> AlgebraBasis {
    commuting_subalgebra(&s.algebra, &s.restricted_density())
}

/// Minimal projections of the center of the centralizer.
pub fn finest_event(s: &State, params: &EthParams) -> Result<PartitionOfUnity> {
    let z = center(&centralizer(s));
    Ok(minimal_projections(&z, params.generic_seed)?)
}

/// `max |tr(Ω_E A) − Σ_ξ tr(π_ξ Ω_E π_ξ A)|` over `tests`.
pub fn incoherence_residual(s: &State, partition: &PartitionOfUnity, tests: &[CMatrix]) -> f64 {
    let omega_e = s.restricted_density();
    let pinched = algebra::pinch(&omega_e, partition);
    tests
        .iter()
        .map(|a| ((&omega_e * a).trace() - (&pinched * a).trace()).norm())
        .fold(0.0, f64::max)
}

/// `tr(Ω π)` per projection, clamped at zero.
pub fn born_probabilities(partition: &PartitionOfUnity, s: &State) -> Vec<f64> {
    partition
        .projections()
        .iter()
        .map(|p| s.omega.expect(p.matrix()).re.max(0.0))
        .collect()
}

/// True when at least two weights lie strictly inside `(ε_p, 1 − ε_p)`.
pub fn actualizes_weights(weights: &[f64]) -> bool {
    weights
        .iter()
        .filter(|&&w| w > TOL.born_eps && w < 1.0 - TOL.born_eps)
        .count()
        >= 2
}

pub fn actualizes(partition: &PartitionOfUnity, s: &State) -> bool {
    actualizes_weights(&born_probabilities(partition, s))
}

/// `π Ω π / tr(Ω π)`; the algebra is unchanged.
pub fn collapse(s: &State, pi: &Projection) -> Result<State> {
    let p = s.omega.expect(pi.matrix()).re;
    if p <= TOL.born_eps {
        return Err(EthError::NullCollapse(p));
    }
    let reduced = pi.matrix() * s.omega.matrix() * pi.matrix();
    let omega = DensityMatrix::new(hermitian_part(&reduced).unscale(p))?;
    Ok(State {
        omega,
        algebra: s.algebra.clone(),
        time_index: s.time_index,
    })
}

/// Inverse-CDF choice over `weights` in label order, skipping null branches.
pub fn sample_branch(weights: &[f64], u: f64) -> usize {
    let live: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > TOL.born_eps).collect();
    let total: f64 = live.iter().map(|&k| weights[k]).sum();
    let target = u * total;
    let mut acc = 0.0;
    for &k in &live {
        acc += weights[k];
        if target < acc {
            return k;
        }
    }
    *live.last().expect("weights sum to one")
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub time_index: usize,
    pub label: i64,
    #[serde(skip)]
    pub projection: Projection,
    pub born_probability: f64,
    /// False for the near-trivial branch where no event actualized.
    pub actualized: bool,
    pub partition_size: usize,
}

/// Restrict to `next`, find the finest event, and collapse if it actualizes.
pub fn eth_step<R: Rng + ?Sized>(
    s: &State,
    next: Arc<AlgebraBasis>,
    rng: &mut R,
    params: &EthParams,
) -> Result<(State, StepRecord)> {
    let residual = s.algebra.containment_residual(&next);
    if residual > TOL.inclusion || next.ambient_dim() != s.algebra.ambient_dim() {
        return Err(EthError::NotCoFiltration {
            step: s.time_index,
            residual,
        });
    }
    let restricted = s.restricted(next);
    let event = finest_event(&restricted, params)?;
    let weights = born_probabilities(&event, &restricted);
    let time_index = s.time_index + 1;

    let (mut successor, k, actualized) = if actualizes_weights(&weights) {
        let k = sample_branch(&weights, rng.random::<f64>());
        (collapse(&restricted, &event.projections()[k])?, k, true)
    } else {
        let k = (0..weights.len())
            .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
            .expect("partition is nonempty");
        (restricted, k, false)
    };
    successor.time_index = time_index;
    let record = StepRecord {
        time_index,
        label: event.labels()[k],
        projection: event.projections()[k].clone(),
        born_probability: weights[k],
        actualized,
        partition_size: event.len(),
    };
    Ok((successor, record))
}

/// How the algebras of a schedule were produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScheduleRule {
    /// Tensor-factor filtration, no dynamics.
    Static,
    /// `E_{≥n} = Γ^{-n} E Γ^{n}` for a propagator `Γ`.
    Propagated,
    Constant,
}

/// Decreasing sequence `E_{≥0} ⊇ E_{≥1} ⊇ …` with time step `dt`.
#[derive(Debug, Clone)]
pub struct AlgebraSchedule {
    algebras: Vec<Arc<AlgebraBasis>>,
    dt: f64,
    rule: ScheduleRule,
}

impl AlgebraSchedule {
    /// Checks every inclusion `E_{n+1} ⊆ E_n` to `TOL.inclusion`.
    pub fn new(algebras: Vec<Arc<AlgebraBasis>>, dt: f64, rule: ScheduleRule) -> Result<Self> {
        for (step, pair) in algebras.windows(2).enumerate() {
            let residual = pair[0].containment_residual(&pair[1]);
            if residual > TOL.inclusion || pair[0].ambient_dim() != pair[1].ambient_dim() {
                return Err(EthError::NotCoFiltration { step, residual });
            }
        }
        Ok(Self { algebras, dt, rule })
    }

    pub fn constant(algebra: Arc<AlgebraBasis>, len: usize, dt: f64) -> Self {
        Self {
            algebras: vec![algebra; len],
            dt,
            rule: ScheduleRule::Constant,
        }
    }

    pub fn algebras(&self) -> &[Arc<AlgebraBasis>] {
        &self.algebras
    }

    pub fn get(&self, n: usize) -> Option<&Arc<AlgebraBasis>> {
        self.algebras.get(n)
    }

    /// Number of algebras (one more than the number of available steps).
    pub fn len(&self) -> usize {
        self.algebras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.algebras.is_empty()
    }

    pub fn transitions(&self) -> usize {
        self.algebras.len().saturating_sub(1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rule(&self) -> &ScheduleRule {
        &self.rule
    }
}

#[derive(Debug, Clone)]
pub struct History {
    pub initial: State,
    pub steps: Vec<StepRecord>,
}

impl History {
    pub fn labels(&self) -> Vec<i64> {
        self.steps.iter().map(|r| r.label).collect()
    }

    /// Product of the per-step Born probabilities.
    pub fn sequential_probability(&self) -> f64 {
        self.steps.iter().map(|r| r.born_probability).product()
    }
}

/// Runs `n_steps` of [`eth_step`], step `k` restricting to `schedule[k + 1]`.
pub fn run_trajectory<R: Rng + ?Sized>(
    s0: &State,
    schedule: &AlgebraSchedule,
    n_steps: usize,
    rng: &mut R,
    params: &EthParams,
) -> Result<History> {
    if schedule.transitions() < n_steps {
        return Err(EthError::ScheduleTooShort {
            available: schedule.transitions(),
            requested: n_steps,
        });
    }
    let mut state = s0.clone();
    let mut steps = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let (next, record) = eth_step(&state, schedule.algebras[k + 1].clone(), rng, params)?;
        steps.push(record);
        state = next;
    }
    Ok(History {
        initial: s0.clone(),
        steps,
    })
}

/// `tr(H† Ω₀ H)` with `H = π₁ π₂ ⋯ π_n`, earliest event leftmost.
pub fn history_probability_of<'a, I>(omega0: &CMatrix, projections: I) -> f64
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    let d = omega0.nrows();
    let h = projections.into_iter().fold(linalg::identity(d), |acc, p| acc * p);
    let p = (h.adjoint() * omega0 * &h).trace().re;
    p.clamp(0.0, 1.0)
}

pub fn history_probability(s0: &State, h: &History) -> f64 {
    history_probability_of(s0.omega.matrix(), h.steps.iter().map(|r| r.projection.matrix()))
}

/// Sequential Born sampling and collapse along prescribed partitions.
///
/// Used to test history probabilities against sampled frequencies when the
/// events are fixed in advance rather than derived from the state.
pub fn sample_prescribed_history<R: Rng + ?Sized>(
    s0: &State,
    partitions: &[PartitionOfUnity],
    rng: &mut R,
) -> Result<History> {
    let mut state = s0.clone();
    let mut steps = Vec::with_capacity(partitions.len());
    for partition in partitions {
        let weights = born_probabilities(partition, &state);
        let k = sample_branch(&weights, rng.random::<f64>());
        let pi = &partition.projections()[k];
        let mut next = collapse(&state, pi)?;
        next.time_index = state.time_index + 1;
        steps.push(StepRecord {
            time_index: next.time_index,
            label: partition.labels()[k],
            projection: pi.clone(),
            born_probability: weights[k],
            actualized: actualizes_weights(&weights),
            partition_size: partition.len(),
        });
        state = next;
    }
    Ok(History {
        initial: s0.clone(),
        steps,
    })
}

/// True when the restriction of `s` to each of `schedule[1..=horizon]` has a
/// centralizer with trivial center.
pub fn is_passive(s: &State, schedule: &AlgebraSchedule, horizon: usize) -> Result<bool> {
    if schedule.transitions() < horizon {
        return Err(EthError::ScheduleTooShort {
            available: schedule.transitions(),
            requested: horizon,
        });
    }
    for alg in &schedule.algebras[1..=horizon] {
        let restricted = s.restricted(alg.clone());
        if center(&centralizer(&restricted)).dim() != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli::*;
    use crate::linalg::random::*;
    use crate::linalg::{hs_norm, identity, nullspace, tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(omega: CMatrix, alg: AlgebraBasis) -> State {
        State::new(DensityMatrix::new(omega).unwrap(), Arc::new(alg), 0).unwrap()
    }

    fn has_projection(p: &PartitionOfUnity, target: &CMatrix, tol: f64) -> bool {
        p.projections().iter().any(|q| hs_norm(&(q.matrix() - target)) < tol)
    }

    fn diag2(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![a.into(), b.into()]))
    }

    #[test]
    fn centralizer_examples() {
        let s = state(identity(2).scale(0.5), AlgebraBasis::full(2));
        assert_eq!(centralizer(&s).dim(), 4);
        let s = state(diag2(0.7, 0.3), AlgebraBasis::full(2));
        let c = centralizer(&s);
        assert!(c.same_span(&AlgebraBasis::diagonal(2), 1e-9));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = random_density(2, &mut rng);
        let left = AlgebraBasis::full(2).tensor(&AlgebraBasis::scalars(2));
        let s = state(tensor(&diag2(0.9, 0.1), &sigma), left);
        let c = centralizer(&s);
        let expected = AlgebraBasis::diagonal(2).tensor(&AlgebraBasis::scalars(2));
        assert!(c.same_span(&expected, 1e-9));
    }

    #[test]
    fn centralizer_characterizations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..12 {
            let d = 2 + trial % 3;
            let m = 2;
            // block algebra M_d ⊗ I_m conjugated by a random unitary
            let u = random_unitary(d * m, &mut rng);
            let alg = AlgebraBasis::full(d).tensor(&AlgebraBasis::scalars(m)).conjugated(&u);
            let mut omega = random_density(d * m, &mut rng);
            if trial % 2 == 0 {
                // make the restricted state degenerate so the centralizer is larger
                let block = tensor(&diag2(0.5, 0.5).resize(d, d, 0.0.into()), &identity(m));
                let block = u.adjoint() * block * &u;
                omega = hermitian_part(&(block.clone() * &omega * &block + identity(d * m).scale(0.01)));
                omega /= omega.trace();
            }
            let s = state(omega.clone(), alg.clone());
            let c1 = centralizer(&s);
            // second route: A ∈ E with tr(Ω(AX − XA)) = 0 for all X in a spanning set of E
            let k = alg.dim();
            let mut rows = CMatrix::zeros(k, k);
            for (i, x) in alg.basis().iter().enumerate() {
                for (j, a) in alg.basis().iter().enumerate() {
                    rows[(i, j)] = (&omega * (a * x - x * a)).trace();
                }
            }
            let null = nullspace(&rows, 1e-9, 1.0);
            let stacked = alg.stacked() * null;
            let basis: Vec<CMatrix> = (0..stacked.ncols())
                .map(|j| crate::linalg::unvectorize(stacked.column(j).as_slice(), d * m))
                .collect();
            let c2 = AlgebraBasis::from_orthonormal(d * m, basis).unwrap();
            assert!(c1.same_span(&c2, 1e-8), "trial {trial}: {} vs {}", c1.dim(), c2.dim());
        }
    }

    #[test]
    fn finest_event_examples() {
        let params = EthParams::default();
        let up = bloch_density([0., 0., 1.]);
        let down = bloch_density([0., 0., -1.]);
        let s = state(diag2(0.7, 0.3), AlgebraBasis::full(2));
        let p = finest_event(&s, &params).unwrap();
        assert_eq!(p.len(), 2);
        assert!(has_projection(&p, &up, 1e-10) && has_projection(&p, &down, 1e-10));

        let s = state(up.clone(), AlgebraBasis::full(2));
        let p = finest_event(&s, &params).unwrap();
        assert!(has_projection(&p, &up, 1e-10) && has_projection(&p, &down, 1e-10));
        let mut w = born_probabilities(&p, &s);
        w.sort_by(f64::total_cmp);
        assert!(w[0].abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        assert!(!actualizes(&p, &s));

        let n = [0.3, -0.2, 0.5];
        let len: f64 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
        let len = len.sqrt();
        let u = [n[0] / len, n[1] / len, n[2] / len];
        let s = state(bloch_density(n), AlgebraBasis::full(2));
        let p = finest_event(&s, &params).unwrap();
        assert!(has_projection(&p, &bloch_density(u), 1e-10));
        assert!(has_projection(&p, &bloch_density([-u[0], -u[1], -u[2]]), 1e-10));
        let mut w = born_probabilities(&p, &s);
        w.sort_by(f64::total_cmp);
        assert!((w[0] - (1.0 - len) / 2.0).abs() < 1e-12);
        assert!((w[1] - (1.0 + len) / 2.0).abs() < 1e-12);
        assert!(actualizes(&p, &s));
    }

    #[test]
    fn incoherence_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let u = random_unitary(6, &mut rng);
            let alg = AlgebraBasis::full(3).tensor(&AlgebraBasis::scalars(2)).conjugated(&u);
            let s = state(random_density(6, &mut rng), alg.clone());
            let p = finest_event(&s, &EthParams::default()).unwrap();
            let tests: Vec<CMatrix> = (0..20)
                .map(|_| {
                    let coeffs = random_matrix(alg.dim(), &mut rng);
                    alg.basis().iter().enumerate().fold(CMatrix::zeros(6, 6), |acc, (i, b)| acc + b * coeffs[(i, 0)])
                })
                .collect();
            assert!(incoherence_residual(&s, &p, &tests) <= 1e-8);
        }
    }

    #[test]
    fn actualization_threshold() {
        assert!(actualizes_weights(&[0.7, 0.3]));
        assert!(!actualizes_weights(&[1.0, 0.0]));
        assert!(!actualizes_weights(&[1.0 - 5e-13, 5e-13]));
    }

    #[test]
    fn born_examples() {
        let s = state(identity(2).scale(0.5), AlgebraBasis::full(2));
        let z = PartitionOfUnity::new(
            vec![
                Projection::new(bloch_density([0., 0., 1.])).unwrap(),
                Projection::new(bloch_density([0., 0., -1.])).unwrap(),
            ],
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(born_probabilities(&z, &s), vec![0.5, 0.5]);
        let w = born_probabilities(&PartitionOfUnity::trivial(2), &s);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collapse_examples() {
        let s = state(diag2(0.7, 0.3), AlgebraBasis::full(2));
        let up = Projection::new(bloch_density([0., 0., 1.])).unwrap();
        let c1 = collapse(&s, &up).unwrap();
        assert!(hs_norm(&(c1.omega().matrix() - up.matrix())) < 1e-15);
        assert!((c1.omega().expect(up.matrix()).re - 1.0).abs() < 1e-10);
        let c2 = collapse(&c1, &up).unwrap();
        assert_eq!(c1.omega(), c2.omega());

        let n = [0.2, 0.4, -0.4];
        let len = (0.04f64 + 0.16 + 0.16).sqrt();
        let u = [n[0] / len, n[1] / len, n[2] / len];
        let s = state(bloch_density(n), AlgebraBasis::full(2));
        let pu = Projection::new(bloch_density(u)).unwrap();
        let c = collapse(&s, &pu).unwrap();
        assert!(hs_norm(&(c.omega().matrix() - bloch_density(u))) < 1e-12);

        let pure = state(bloch_density([0., 0., 1.]), AlgebraBasis::full(2));
        assert!(matches!(collapse(&pure, &up.complement()), Err(EthError::NullCollapse(_))));
    }

    #[test]
    fn one_step_ensemble_average_is_pinching() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let alg = AlgebraBasis::full(4);
        let s = state(random_density(4, &mut rng), alg);
        let p = finest_event(&s, &EthParams::default()).unwrap();
        let w = born_probabilities(&p, &s);
        let mut avg = CMatrix::zeros(4, 4);
        for (k, pi) in p.projections().iter().enumerate() {
            if w[k] > TOL.born_eps {
                avg += collapse(&s, pi).unwrap().omega().matrix().scale(w[k]);
            }
        }
        let pinched = algebra::pinch(s.omega().matrix(), &p);
        assert!(hs_norm(&(&avg - &pinched)) <= 1e-9);
        // for the finest event on the full algebra the pinching reproduces Ω itself
        assert!(hs_norm(&(avg - s.omega().matrix())) <= 1e-9);
    }

    #[test]
    fn eth_step_without_actualization_keeps_state() {
        let alg = Arc::new(AlgebraBasis::full(2));
        let s = State::new(DensityMatrix::new(bloch_density([0., 0., 1.])).unwrap(), alg.clone(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, rec) = eth_step(&s, alg, &mut rng, &EthParams::default()).unwrap();
        assert!(!rec.actualized);
        assert_eq!(next.omega(), s.omega());
        assert_eq!(next.time_index(), 1);
    }

    #[test]
    fn eth_step_rejects_growing_algebra() {
        let small = Arc::new(AlgebraBasis::diagonal(2));
        let s = State::new(DensityMatrix::maximally_mixed(2), small, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = eth_step(&s, Arc::new(AlgebraBasis::full(2)), &mut rng, &EthParams::default()).unwrap_err();
        assert!(err.to_string().contains("co-filtration"));
    }

    #[test]
    fn trajectory_is_deterministic_per_seed() {
        let alg = Arc::new(AlgebraBasis::full(2));
        let sched = AlgebraSchedule::constant(alg.clone(), 5, 0.1);
        let s = State::new(DensityMatrix::new(bloch_density([0.3, 0.1, 0.2])).unwrap(), alg, 0).unwrap();
        let params = EthParams::default();
        let h1 = run_trajectory(&s, &sched, 4, &mut ChaCha8Rng::seed_from_u64(5), &params).unwrap();
        let h2 = run_trajectory(&s, &sched, 4, &mut ChaCha8Rng::seed_from_u64(5), &params).unwrap();
        assert_eq!(h1.labels(), h2.labels());
        // first step collapses, the rest are near-trivial
        assert!(h1.steps[0].actualized);
        assert!(h1.steps[1..].iter().all(|r| !r.actualized));
        assert!((history_probability(&s, &h1) - h1.sequential_probability()).abs() < 1e-12);

        let empty = run_trajectory(&s, &sched, 0, &mut ChaCha8Rng::seed_from_u64(5), &params).unwrap();
        assert!(empty.steps.is_empty());
        assert!(run_trajectory(&s, &sched, 5, &mut ChaCha8Rng::seed_from_u64(5), &params).is_err());
    }

    #[test]
    fn history_probability_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let omega = random_density(2, &mut rng);
        let up = bloch_density([0., 0., 1.]);
        let down = bloch_density([0., 0., -1.]);
        assert!((history_probability_of(&omega, [&up]) - omega[(0, 0)].re).abs() < 1e-14);
        assert!((history_probability_of(&omega, [&identity(2), &identity(2)]) - 1.0).abs() < 1e-14);

        // σ3 partition then Hadamard-rotated partition, brute force by explicit 2×2 products
        let plus = bloch_density([1., 0., 0.]);
        let minus = bloch_density([-1., 0., 0.]);
        let mut total = 0.0;
        for a in [&up, &down] {
            for b in [&plus, &minus] {
                let h = a * b;
                let brute = (h.adjoint() * &omega * &h).trace().re;
                let p = history_probability_of(&omega, [a, b]);
                assert!((p - brute).abs() < 1e-14);
                total += p;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passivity_examples() {
        let full = Arc::new(AlgebraBasis::full(2));
        let sched = AlgebraSchedule::constant(full.clone(), 3, 1.0);
        let tracial = State::new(DensityMatrix::maximally_mixed(2), full.clone(), 0).unwrap();
        assert!(is_passive(&tracial, &sched, 2).unwrap());
        let s = State::new(DensityMatrix::new(diag2(0.7, 0.3)).unwrap(), full, 0).unwrap();
        assert!(!is_passive(&s, &sched, 2).unwrap());
        assert!(is_passive(&s, &sched, 0).unwrap());
    }

    #[test]
    fn schedule_validates_inclusions() {
        let full = Arc::new(AlgebraBasis::full(2));
        let diag = Arc::new(AlgebraBasis::diagonal(2));
        let sc = Arc::new(AlgebraBasis::scalars(2));
        assert!(AlgebraSchedule::new(vec![full.clone(), diag.clone(), sc.clone()], 1.0, ScheduleRule::Static).is_ok());
        assert!(AlgebraSchedule::new(vec![sc, diag, full], 1.0, ScheduleRule::Static).is_err());
    }

    #[test]
    fn sampling_follows_label_order() {
        assert_eq!(sample_branch(&[0.25, 0.75], 0.1), 0);
        assert_eq!(sample_branch(&[0.25, 0.75], 0.3), 1);
        assert_eq!(sample_branch(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_branch(&[0.5, 0.5, 0.0], 0.999_999_999), 1);
    }
}
