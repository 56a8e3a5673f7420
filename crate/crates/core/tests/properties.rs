use std::sync::Arc;

use ethsim_core::algebra::{commutant, pinch, AlgebraBasis};
use ethsim_core::classical::smeared_interval_probability;
use ethsim_core::eth::{born_probabilities, collapse, finest_event, EthParams, State};
use ethsim_core::linalg::random::{random_density, random_unitary};
use ethsim_core::linalg::{identity, partial_trace, CMatrix, DensityMatrix};
use ethsim_core::models::fluorescence::{integrate_lindblad, jump_step_with_uniform, DriftMap};
use ethsim_core::models::{BlochVector, FluorescenceParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn ball_point() -> impl Strategy<Value = BlochVector> {
    (0.0..=1.0f64, -1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, z, phi)| {
        let s = (1.0 - z * z).sqrt();
        BlochVector::raw(r * s * phi.cos(), r * s * phi.sin(), r * z)
    })
}

fn params() -> impl Strategy<Value = FluorescenceParams> {
    (-5.0..5.0f64, 0.0..3.0f64, 1e-4..0.05f64).prop_map(|(o, a, dt)| FluorescenceParams::new(o, a, dt, 1.0).unwrap())
}

/// Diagonal algebra rotated by a random unitary, tensored with a full factor.
fn rotated_algebra(seed: u64, d1: usize, d2: usize) -> AlgebraBasis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(d1 * d2, &mut rng);
    AlgebraBasis::diagonal(d1).tensor(&AlgebraBasis::full(d2)).conjugated(&u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drift_stays_in_ball(n in ball_point(), p in params()) {
        let bar = DriftMap::new(&p).apply(n);
        prop_assert!(bar.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn jump_step_lands_on_sphere_and_averages_to_drift(n in ball_point(), p in params()) {
        prop_assume!(n.norm() > 1e-3);
        let d = DriftMap::new(&p);
        let stay = jump_step_with_uniform(&d, n, 0.0).unwrap();
        let jump = jump_step_with_uniform(&d, n, 1.0 - f64::EPSILON).unwrap();
        prop_assert!((stay.n.norm() - 1.0).abs() < 1e-12);
        let q = stay.jump_prob;
        prop_assert!((0.0..=0.5).contains(&q));
        let mean = [
            (1.0 - q) * stay.n.n1 + q * jump.n.n1,
            (1.0 - q) * stay.n.n2 + q * jump.n.n2,
            (1.0 - q) * stay.n.n3 + q * jump.n.n3,
        ];
        let bar = stay.drift.to_array();
        for c in 0..3 {
            prop_assert!((mean[c] - bar[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn lindblad_stays_in_ball(n in ball_point(), p in params()) {
        let path = integrate_lindblad(n, &p, 2.0).unwrap();
        prop_assert!(path.states.iter().all(|s| s.norm() <= 1.0 + 1e-9));
    }

    #[test]
    fn finest_event_is_a_partition_commuting_with_the_state(
        seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=2,
    ) {
        let alg = rotated_algebra(seed, d1, d2);
        let d = d1 * d2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let s = State::new(DensityMatrix::new(random_density(d, &mut rng)).unwrap(), Arc::new(alg.clone()), 0).unwrap();
        let event = finest_event(&s, &EthParams::default()).unwrap();
        let mut sum = CMatrix::zeros(d, d);
        for (i, p) in event.projections().iter().enumerate() {
            prop_assert!(alg.residual(p.matrix()) < 1e-8);
            let rho_e = s.restricted_density();
            prop_assert!(hs(&(p.matrix() * &rho_e - &rho_e * p.matrix())) < 1e-8);
            for q in &event.projections()[i + 1..] {
                prop_assert!(hs(&(p.matrix() * q.matrix())) < 1e-8);
            }
            sum += p.matrix();
        }
        prop_assert!(hs(&(sum - identity(d))) < 1e-8);
        let w: f64 = born_probabilities(&event, &s).iter().sum();
        prop_assert!((w - 1.0).abs() < 1e-10);
        let pinched = pinch(s.omega().matrix(), &event);
        prop_assert!((pinched.trace() - s.omega().matrix().trace()).norm() < 1e-12);
    }

    #[test]
    fn collapse_is_idempotent(seed in any::<u64>(), d in 2usize..=4) {
        let alg = rotated_algebra(seed, d, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let s = State::new(DensityMatrix::new(random_density(d, &mut rng)).unwrap(), Arc::new(alg), 0).unwrap();
        let event = finest_event(&s, &EthParams::default()).unwrap();
        let pi = &event.projections()[0];
        let once = collapse(&s, pi).unwrap();
        let twice = collapse(&once, pi).unwrap();
        prop_assert!(hs(&(once.omega().matrix() - twice.omega().matrix())) < 1e-12);
    }

    #[test]
    fn bicommutant_of_rotated_algebras(seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=2) {
        let alg = rotated_algebra(seed, d1, d2);
        let bi = commutant(&commutant(&alg));
        prop_assert_eq!(bi.dim(), alg.dim());
        prop_assert!(alg.containment_residual(&bi) < 1e-8);
    }

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(a * b, &mut rng);
        for keep in [[0usize], [1usize]] {
            let r = partial_trace(&rho, &[a, b], &keep).unwrap();
            prop_assert!((r.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smeared_probabilities_are_additive(
        a in -2.0..0.0f64, w in 0.0..2.0f64, c in -3.0..3.0f64, l1 in 0.0..2.0f64, l2 in 0.0..2.0f64, sigma in 0.0..2.0f64,
    ) {
        let b = a + w;
        let p1 = smeared_interval_probability(a, b, c, c + l1, sigma);
        let p2 = smeared_interval_probability(a, b, c + l1, c + l1 + l2, sigma);
        let p12 = smeared_interval_probability(a, b, c, c + l1 + l2, sigma);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p12));
        prop_assert!((p1 + p2 - p12).abs() < 1e-12);
    }
}
