//! Two-level atom in fluorescence: Lindblad ensemble law and its jump unraveling.
//!
//! Bloch parametrization `ρ(n) = (1 + n·σ)/2` with `|↑⟩ = e₃`. The atom
//! Hamiltonian is `H_A = Ω σ₃ / 2` and spontaneous emission is generated by
//! `σ₋` at rate `α`.

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::pauli::{bloch_density, bloch_vector};
use crate::linalg::CMatrix;
use crate::models::ModelError;
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl BlochVector {
    pub const UP: Self = Self::raw(0.0, 0.0, 1.0);
    pub const DOWN: Self = Self::raw(0.0, 0.0, -1.0);

    pub const fn raw(n1: f64, n2: f64, n3: f64) -> Self {
        Self { n1, n2, n3 }
    }

    /// Checked constructor: finite entries, `|n|² ≤ 1 + 1e-10`.
    pub fn new(n1: f64, n2: f64, n3: f64) -> Result<Self, ModelError> {
        let n = Self::raw(n1, n2, n3);
        if !(n1.is_finite() && n2.is_finite() && n3.is_finite()) || n.norm_sq() > 1.0 + 1e-10 {
            return Err(ModelError::OutsideBall(n.norm()));
        }
        Ok(n)
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self, ModelError> {
        Self::new(a[0], a[1], a[2])
    }

    /// Unit vector at polar angle `theta` from `e₃` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self::raw(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.n1, self.n2, self.n3]
    }

    pub fn norm_sq(self) -> f64 {
        self.n1 * self.n1 + self.n2 * self.n2 + self.n3 * self.n3
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::raw(s * self.n1, s * self.n2, s * self.n3)
    }

    /// Polar angle from `e₃`.
    pub fn theta(self) -> f64 {
        (self.n3 / self.norm()).clamp(-1.0, 1.0).acos()
    }

    pub fn density(self) -> CMatrix {
        bloch_density(self.to_array())
    }
}

pub fn bloch_from_density(rho: &CMatrix) -> BlochVector {
    let [a, b, c] = bloch_vector(rho);
    BlochVector::raw(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluorescenceParams {
    /// Larmor frequency (rad/s).
    pub omega: f64,
    /// Decay rate (1/s).
    pub alpha: f64,
    pub dt: f64,
    /// Flight time from source to detector.
    pub t_final: f64,
}

impl FluorescenceParams {
    /// `alpha = 0` is accepted (the decoupled limit); `alpha·dt` must stay below 1.
    pub fn new(omega: f64, alpha: f64, dt: f64, t_final: f64) -> Result<Self, ModelError> {
        if !omega.is_finite() {
            return Err(ModelError::Parameter("Omega must be finite".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ModelError::Parameter("alpha must be >= 0".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::Parameter("dt must be > 0".into()));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(ModelError::Parameter("T must be >= 0".into()));
        }
        if alpha * dt >= 1.0 {
            return Err(ModelError::Parameter("alpha·dt must be < 1".into()));
        }
        if alpha * dt > 0.1 {
            warn!("alpha·dt = {} is not small; the jump process is a coarse unraveling", alpha * dt);
        }
        Ok(Self {
            omega,
            alpha,
            dt,
            t_final,
        })
    }

    /// Number of `dt` steps covering `[0, T]`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Bloch form of the Lindblad generator.
pub fn lindblad_rhs(n: BlochVector, p: &FluorescenceParams) -> BlochVector {
    let half = 0.5 * p.alpha;
    BlochVector::raw(
        -p.omega * n.n2 - half * n.n1,
        p.omega * n.n1 - half * n.n2,
        -p.alpha * (1.0 + n.n3),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct LindbladPath {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
}

/// Classic RK4 with step `dt` (the last step is shortened to land on `t_final`).
pub fn integrate_lindblad(n0: BlochVector, p: &FluorescenceParams, t_final: f64) -> Result<LindbladPath, ModelError> {
    if !(t_final >= 0.0) {
        return Err(ModelError::Parameter("t_final must be >= 0".into()));
    }
    let add = |a: BlochVector, b: BlochVector, h: f64| BlochVector::raw(a.n1 + h * b.n1, a.n2 + h * b.n2, a.n3 + h * b.n3);
    let mut times = vec![0.0];
    let mut states = vec![n0];
    let mut n = n0;
    let full = (t_final / p.dt).round() as usize;
    let exact = (full as f64 * p.dt - t_final).abs() <= 1e-9 * t_final.max(1.0);
    let mut k = 0usize;
    loop {
        let t = k as f64 * p.dt;
        let h = if exact {
            if k == full {
                break;
            }
            p.dt
        } else {
            let rest = t_final - t;
            if rest <= 0.0 {
                break;
            }
            rest.min(p.dt)
        };
        let k1 = lindblad_rhs(n, p);
        let k2 = lindblad_rhs(add(n, k1, h / 2.0), p);
        let k3 = lindblad_rhs(add(n, k2, h / 2.0), p);
        let k4 = lindblad_rhs(add(n, k3, h), p);
        n = BlochVector::raw(
            n.n1 + h / 6.0 * (k1.n1 + 2.0 * k2.n1 + 2.0 * k3.n1 + k4.n1),
            n.n2 + h / 6.0 * (k1.n2 + 2.0 * k2.n2 + 2.0 * k3.n2 + k4.n2),
            n.n3 + h / 6.0 * (k1.n3 + 2.0 * k2.n3 + 2.0 * k3.n3 + k4.n3),
        );
        k += 1;
        let t_next = if exact { k as f64 * p.dt } else { t + h };
        let norm = n.norm();
        if norm > 1.0 + 1e-6 || !norm.is_finite() {
            return Err(ModelError::Unstable { t: t_next, norm });
        }
        times.push(t_next);
        states.push(n);
    }
    Ok(LindbladPath { times, states })
}

/// Precomputed one-step drift `n ↦ R_z(Ω dt) (n + dK[n])`.
#[derive(Debug, Clone, Copy)]
pub struct DriftMap {
    cos: f64,
    sin: f64,
    transverse: f64,
    decay: f64,
}

impl DriftMap {
    pub fn new(p: &FluorescenceParams) -> Self {
        let a = p.alpha * p.dt;
        let (sin, cos) = (p.omega * p.dt).sin_cos();
        Self {
            cos,
            sin,
            // first order this is 1 − α dt / 2; the square root keeps the map inside the ball
            transverse: (1.0 - a).sqrt(),
            decay: a,
        }
    }

    pub fn apply(&self, n: BlochVector) -> BlochVector {
        let m1 = self.transverse * n.n1;
        let m2 = self.transverse * n.n2;
        let m3 = n.n3 - self.decay * (1.0 + n.n3);
        BlochVector::raw(self.cos * m1 - self.sin * m2, self.sin * m1 + self.cos * m2, m3)
    }
}

/// Deterministic drift step `n̄(t + dt)`.
pub fn bloch_drift(n: BlochVector, p: &FluorescenceParams) -> BlochVector {
    DriftMap::new(p).apply(n)
}

/// Result of one jump step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStep {
    pub n: BlochVector,
    pub jumped: bool,
    pub jump_prob: f64,
    pub drift: BlochVector,
}

/// Jump step driven by a uniform variate `u ∈ [0, 1)`: the no-jump branch
/// occupies `[0, (1 + |n̄|)/2)`.
pub fn jump_step_with_uniform(drift: &DriftMap, n: BlochVector, u: f64) -> Result<JumpStep, ModelError> {
    let bar = drift.apply(n);
    let r = bar.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(ModelError::DegenerateDrift);
    }
    let jump_prob = ((1.0 - r) / 2.0).max(0.0);
    let jumped = u >= 1.0 - jump_prob;
    let unit = bar.scale(1.0 / r);
    Ok(JumpStep {
        n: if jumped { unit.scale(-1.0) } else { unit },
        jumped,
        jump_prob,
        drift: bar,
    })
}

pub fn fluorescence_jump_step<R: Rng + ?Sized>(
    n: BlochVector,
    p: &FluorescenceParams,
    rng: &mut R,
) -> Result<(BlochVector, bool, f64), ModelError> {
    if n.norm() > 1.0 + 1e-9 {
        return Err(ModelError::OutsideBall(n.norm()));
    }
    let s = jump_step_with_uniform(&DriftMap::new(p), n, rng.random::<f64>())?;
    Ok((s.n, s.jumped, s.jump_prob))
}

/// Ensemble statistics on `n_bins + 1` output times `t_b = k_b dt`.
#[derive(Debug, Clone, Serialize)]
pub struct FluorescenceEnsemble {
    pub n_traj: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
    pub se: Vec<[f64; 3]>,
    /// Jumps per trajectory per unit time in `(t_{b−1}, t_b]`; zero at `b = 0`.
    pub jump_rate: Vec<f64>,
    pub jump_time_histogram: Vec<u64>,
    /// Entry `k` counts trajectories with exactly `k` jumps.
    pub jump_count_distribution: Vec<u64>,
}

impl FluorescenceEnsemble {
    pub fn total_jumps(&self) -> u64 {
        self.jump_time_histogram.iter().sum()
    }
}

struct TrajectorySummary {
    samples: Vec<BlochVector>,
    jumps_per_bin: Vec<u32>,
    n_jumps: usize,
}

/// Step indices of the output bins, `round(b K / n_bins)`.
pub fn bin_steps(n_steps: usize, n_bins: usize) -> Vec<usize> {
    let n_bins = n_bins.clamp(1, n_steps.max(1));
    (0..=n_bins)
        .map(|b| ((b as f64 * n_steps as f64) / n_bins as f64).round() as usize)
        .collect()
}

fn run_one(n0: BlochVector, drift: &DriftMap, marks: &[usize], seed: u64, index: u64) -> Result<TrajectorySummary, ModelError> {
    let mut rng = stream(seed, index);
    let mut n = n0;
    let mut samples = Vec::with_capacity(marks.len());
    let mut jumps_per_bin = vec![0u32; marks.len()];
    let mut n_jumps = 0;
    samples.push(n);
    let mut bin = 1;
    let last = *marks.last().expect("at least one mark");
    for k in 1..=last {
        let s = jump_step_with_uniform(drift, n, rng.random::<f64>())?;
        n = s.n;
        if s.jumped {
            n_jumps += 1;
            jumps_per_bin[bin] += 1;
        }
        while bin < marks.len() && marks[bin] == k {
            samples.push(n);
            bin += 1;
        }
    }
    Ok(TrajectorySummary {
        samples,
        jumps_per_bin,
        n_jumps,
    })
}

/// `n_traj` independent trajectories over `[0, T]`, trajectory `i` driven by `stream(seed, i)`.
pub fn run_fluorescence_ensemble(
    n0: BlochVector,
    p: &FluorescenceParams,
    n_traj: usize,
    seed: u64,
    n_bins: usize,
) -> Result<FluorescenceEnsemble, ModelError> {
    if n_traj == 0 {
        return Err(ModelError::Parameter("n_traj must be >= 1".into()));
    }
    if n0.norm() > 1.0 + 1e-9 {
        return Err(ModelError::OutsideBall(n0.norm()));
    }
    let marks = bin_steps(p.n_steps(), n_bins);
    let drift = DriftMap::new(p);
    let runs: Vec<TrajectorySummary> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_one(n0, &drift, &marks, seed, i))
        .collect::<Result<_, _>>()?;

    let nb = marks.len();
    let mut sum = vec![[0.0f64; 3]; nb];
    let mut sum_sq = vec![[0.0f64; 3]; nb];
    let mut hist = vec![0u64; nb];
    let mut counts: Vec<u64> = Vec::new();
    for r in &runs {
        for (b, s) in r.samples.iter().enumerate() {
            for (c, x) in s.to_array().into_iter().enumerate() {
                sum[b][c] += x;
                sum_sq[b][c] += x * x;
            }
        }
        for (b, &j) in r.jumps_per_bin.iter().enumerate() {
            hist[b] += j as u64;
        }
        if counts.len() <= r.n_jumps {
            counts.resize(r.n_jumps + 1, 0);
        }
        counts[r.n_jumps] += 1;
    }
    let nt = n_traj as f64;
    let mut mean = vec![[0.0; 3]; nb];
    let mut se = vec![[0.0; 3]; nb];
    for b in 0..nb {
        for c in 0..3 {
            let m = sum[b][c] / nt;
            mean[b][c] = m;
            se[b][c] = if n_traj > 1 {
                let var = ((sum_sq[b][c] - nt * m * m) / (nt - 1.0)).max(0.0);
                (var / nt).sqrt()
            } else {
                0.0
            };
        }
    }
    let jump_rate = (0..nb)
        .map(|b| {
            if b == 0 {
                0.0
            } else {
                let width = (marks[b] - marks[b - 1]) as f64 * p.dt;
                hist[b] as f64 / (nt * width)
            }
        })
        .collect();
    Ok(FluorescenceEnsemble {
        n_traj,
        seed,
        times: marks.iter().map(|&k| k as f64 * p.dt).collect(),
        mean,
        se,
        jump_rate,
        jump_time_histogram: hist,
        jump_count_distribution: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub emitted: bool,
    pub n_out: BlochVector,
    /// Reading of `X = diag(1, −1)` in the atom detector.
    pub detector_reading: i8,
    pub jump_times: Vec<f64>,
}

/// One atom from source to detector.
///
/// With `detect_photon = false` the jump process runs over the whole flight.
/// With `detect_photon = true` the first jump is recorded by the photomultiplier
/// and leaves the atom in `ρ(−e₃)` for the rest of the flight.
pub fn photomultiplier_experiment<R: Rng + ?Sized>(
    n0: BlochVector,
    p: &FluorescenceParams,
    detect_photon: bool,
    rng: &mut R,
) -> Result<ExperimentOutcome, ModelError> {
    if n0.norm() > 1.0 + 1e-9 {
        return Err(ModelError::OutsideBall(n0.norm()));
    }
    let drift = DriftMap::new(p);
    let mut n = n0;
    let mut jump_times = Vec::new();
    for k in 1..=p.n_steps() {
        let s = jump_step_with_uniform(&drift, n, rng.random::<f64>())?;
        n = s.n;
        if s.jumped {
            jump_times.push(k as f64 * p.dt);
            if detect_photon {
                n = BlochVector::DOWN;
                break;
            }
        }
    }
    let p_plus = ((1.0 + n.n3) / 2.0).clamp(0.0, 1.0);
    let detector_reading = if rng.random::<f64>() < p_plus { 1 } else { -1 };
    Ok(ExperimentOutcome {
        emitted: !jump_times.is_empty(),
        n_out: n,
        detector_reading,
        jump_times,
    })
}

/// Aggregate of many [`photomultiplier_experiment`] runs.
#[derive(Debug, Clone, Serialize)]
pub struct PhotomultiplierSummary {
    pub detect_photon: bool,
    pub n_runs: usize,
    pub emitted: u64,
    pub emission_frequency: f64,
    pub reading_plus: u64,
    /// Fraction of runs reading `+1` and its binomial standard error.
    pub p_plus: f64,
    pub p_plus_se: f64,
    /// Emitted runs in detect mode that did not end exactly at `−e₃` (must be zero).
    pub emitted_not_ground: u64,
    pub jump_count_distribution: Vec<u64>,
    /// Mean `|θ_out − θ₀|` over runs without jumps.
    pub mean_theta_dev_no_jump: Option<f64>,
    /// Mean `|θ_out − (π − θ₀)|` over runs with exactly one jump.
    pub mean_theta_dev_one_jump: Option<f64>,
}

pub fn run_photomultiplier_ensemble(
    n0: BlochVector,
    p: &FluorescenceParams,
    detect_photon: bool,
    n_runs: usize,
    seed: u64,
) -> Result<PhotomultiplierSummary, ModelError> {
    if n_runs == 0 {
        return Err(ModelError::Parameter("n_traj must be >= 1".into()));
    }
    let outcomes: Vec<ExperimentOutcome> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| photomultiplier_experiment(n0, p, detect_photon, &mut stream(seed, i)))
        .collect::<Result<_, _>>()?;
    let theta0 = n0.theta();
    let mut emitted = 0;
    let mut plus = 0;
    let mut bad = 0;
    let mut counts: Vec<u64> = Vec::new();
    let (mut dev0, mut c0, mut dev1, mut c1) = (0.0, 0u64, 0.0, 0u64);
    for o in &outcomes {
        if o.emitted {
            emitted += 1;
            if detect_photon && o.n_out != BlochVector::DOWN {
                bad += 1;
            }
        }
        if o.detector_reading == 1 {
            plus += 1;
        }
        let j = o.jump_times.len();
        if counts.len() <= j {
            counts.resize(j + 1, 0);
        }
        counts[j] += 1;
        match j {
            0 => {
                dev0 += (o.n_out.theta() - theta0).abs();
                c0 += 1;
            }
            1 if !detect_photon => {
                dev1 += (o.n_out.theta() - (std::f64::consts::PI - theta0)).abs();
                c1 += 1;
            }
            _ => {}
        }
    }
    let nr = n_runs as f64;
    let p_plus = plus as f64 / nr;
    Ok(PhotomultiplierSummary {
        detect_photon,
        n_runs,
        emitted,
        emission_frequency: emitted as f64 / nr,
        reading_plus: plus,
        p_plus,
        p_plus_se: (p_plus * (1.0 - p_plus) / nr).sqrt(),
        emitted_not_ground: bad,
        jump_count_distribution: counts,
        mean_theta_dev_no_jump: (c0 > 0).then(|| dev0 / c0 as f64),
        mean_theta_dev_one_jump: (c1 > 0).then(|| dev1 / c1 as f64),
    })
}
