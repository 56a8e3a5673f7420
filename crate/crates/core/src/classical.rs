//! Brownian motion as the classical reference: heat kernels, Wiener paths,
//! window probabilities and the Markov sum identity, plus the quantum
//! sequential-measurement analogue where that identity fails.
//!
//! The kernel solves `∂ₜρ = D Δρ`, so increments have per-coordinate
//! variance `2 D Δt`.

use std::f64::consts::{PI, SQRT_2};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;
use thiserror::Error;

use crate::algebra::PartitionOfUnity;
use crate::eth::history_probability_of;
use crate::linalg::{CMatrix, LinalgError};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicalError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cover is not a partition of the line: {0}")]
    NotAPartition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = ClassicalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelParams {
    pub d: f64,
    pub spatial_dim: usize,
}

impl HeatKernelParams {
    pub fn new(d: f64, spatial_dim: usize) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(ClassicalError::Parameter("D must be > 0".into()));
        }
        if spatial_dim != 1 && spatial_dim != 3 {
            return Err(ClassicalError::Parameter("spatial_dim must be 1 or 3".into()));
        }
        Ok(Self { d, spatial_dim })
    }

    /// Standard deviation of one coordinate after time `t`.
    pub fn sigma(&self, t: f64) -> f64 {
        (2.0 * self.d * t).sqrt()
    }

    fn require_1d(&self) -> Result<()> {
        if self.spatial_dim != 1 {
            return Err(ClassicalError::Parameter("window probabilities are one-dimensional".into()));
        }
        Ok(())
    }
}

/// `(4πDt)^{−dim/2} exp(−|x|²/(4Dt))`.
pub fn heat_kernel(x: &[f64], t: f64, p: &HeatKernelParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(ClassicalError::Parameter("t must be > 0".into()));
    }
    if x.len() != p.spatial_dim {
        return Err(ClassicalError::Parameter(format!(
            "point has {} coordinates, expected {}",
            x.len(),
            p.spatial_dim
        )));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let four_dt = 4.0 * p.d * t;
    Ok((PI * four_dt).powf(-(p.spatial_dim as f64) / 2.0) * (-r2 / four_dt).exp())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Antiderivative of `Φ`: `zΦ(z) + φ(z)`.
fn phi_integral(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::INFINITY;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    z * normal_cdf(z) + normal_pdf(z)
}

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Probability that `Y + σZ ∈ [c, d]` for `Y` uniform on `[a, b]` (or the point `a` when `a == b`).
pub fn smeared_interval_probability(a: f64, b: f64, c: f64, d: f64, sigma: f64) -> f64 {
    let width = b - a;
    if sigma == 0.0 {
        if width == 0.0 {
            return if a >= c && a <= d { 1.0 } else { 0.0 };
        }
        return overlap(a, b, c, d) / width;
    }
    if width == 0.0 {
        return normal_cdf((d - a) / sigma) - normal_cdf((c - a) / sigma);
    }
    // (1/w) ∫_a^b [Φ((d−y)/σ) − Φ((c−y)/σ)] dy
    let part = |e: f64| {
        if e.is_infinite() {
            return if e > 0.0 { width / sigma } else { 0.0 };
        }
        phi_integral((e - a) / sigma) - phi_integral((e - b) / sigma)
    };
    (sigma / width * (part(d) - part(c))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerPath {
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

/// Positions at `times` of a path started at `x0` at time 0.
pub fn sample_wiener<R: Rng + ?Sized>(x0: &[f64], times: &[f64], p: &HeatKernelParams, rng: &mut R) -> Result<WienerPath> {
    if x0.len() != p.spatial_dim {
        return Err(ClassicalError::Parameter("x0 has the wrong dimension".into()));
    }
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ClassicalError::Parameter("times must be nonnegative and strictly ascending".into()));
    }
    let mut x = x0.to_vec();
    let mut prev = 0.0;
    let mut positions = Vec::with_capacity(times.len());
    for &t in times {
        let s = p.sigma(t - prev);
        for xi in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *xi += s * z;
        }
        positions.push(x.clone());
        prev = t;
    }
    Ok(WienerPath {
        x0: x0.to_vec(),
        times: times.to_vec(),
        positions,
    })
}

/// Path must lie in `[lo, hi]` at `time` (bounds may be infinite).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub time: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(time: f64, lo: f64, hi: f64) -> Self {
        Self { time, lo, hi }
    }

    pub fn whole_line(time: f64) -> Self {
        Self::new(time, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

fn check_windows(windows: &[Window]) -> Result<()> {
    if windows.first().is_some_and(|w| w.time < 0.0) || windows.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(ClassicalError::Parameter("windows must be time-ordered from t >= 0".into()));
    }
    if windows.iter().any(|w| !(w.lo <= w.hi) || w.time.is_nan()) {
        return Err(ClassicalError::Parameter("window bounds must satisfy lo <= hi".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

/// Monte Carlo estimate; path `i` uses `stream(seed, i)`.
pub fn window_probability_mc(
    x0: f64,
    windows: &[Window],
    p: &HeatKernelParams,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    p.require_1d()?;
    check_windows(windows)?;
    if n_paths == 0 {
        return Err(ClassicalError::Parameter("n_paths must be >= 1".into()));
    }
    let sigmas: Vec<f64> = windows
        .iter()
        .scan(0.0, |prev, w| {
            let s = p.sigma(w.time - *prev);
            *prev = w.time;
            Some(s)
        })
        .collect();
    let hits: usize = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let mut x = x0;
            for (w, &s) in windows.iter().zip(&sigmas) {
                let z: f64 = rng.sample(StandardNormal);
                x += s * z;
                if !w.contains(x) {
                    return 0;
                }
            }
            1
        })
        .sum();
    let value = hits as f64 / n_paths as f64;
    Ok(Estimate {
        value,
        se: (value * (1.0 - value) / n_paths as f64).sqrt(),
        n: n_paths,
    })
}

/// Grid for iterated-kernel quadrature in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub cells: usize,
    /// Half-width of the grid in units of the standard deviation at the last window time.
    pub sigmas: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            cells: 1500,
            sigmas: 10.0,
        }
    }
}

struct Grid {
    lo: f64,
    h: f64,
    n: usize,
}

impl Grid {
    fn for_windows(x0: f64, windows: &[Window], p: &HeatKernelParams, q: &QuadratureGrid) -> Self {
        let t_max = windows.last().map_or(0.0, |w| w.time);
        let mut half = q.sigmas * p.sigma(t_max);
        for w in windows {
            for b in [w.lo, w.hi] {
                if b.is_finite() {
                    half = half.max((b - x0).abs() * 1.05);
                }
            }
        }
        let half = half.max(1e-9);
        Self {
            lo: x0 - half,
            h: 2.0 * half / q.cells as f64,
            n: q.cells,
        }
    }

    fn cell(&self, i: usize) -> (f64, f64) {
        let a = self.lo + i as f64 * self.h;
        (a, a + self.h)
    }

    /// Fraction of each cell inside `[lo, hi]`.
    fn weights(&self, lo: f64, hi: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (a, b) = self.cell(i);
                overlap(a, b, lo, hi) / self.h
            })
            .collect()
    }

    /// One diffusion step of cell masses (mass uniform within each cell).
    fn diffuse(&self, mass: &[f64], sigma: f64) -> Vec<f64> {
        if sigma == 0.0 {
            return mass.to_vec();
        }
        let n = self.n as isize;
        // transition depends only on the offset between cells
        let kernel: Vec<f64> = (-(n - 1)..n)
            .map(|k| {
                let off = k as f64 * self.h;
                smeared_interval_probability(0.0, self.h, off, off + self.h, sigma)
            })
            .collect();
        let mut out = vec![0.0; self.n];
        for (j, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += m * kernel[(i as isize - j as isize + n - 1) as usize];
            }
        }
        out
    }
}

fn quadrature_with_grid(x0: f64, windows: &[Window], p: &HeatKernelParams, grid: &Grid) -> f64 {
    if windows.is_empty() {
        return 1.0;
    }
    let mut mass: Vec<f64> = Vec::new();
    let mut prev = 0.0;
    for (k, w) in windows.iter().enumerate() {
        let sigma = p.sigma(w.time - prev);
        if k == 0 {
            // exact for the first window: clip each cell to the window
            mass = (0..grid.n)
                .map(|i| {
                    let (a, b) = grid.cell(i);
                    let (a, b) = (a.max(w.lo), b.min(w.hi));
                    if a < b {
                        smeared_interval_probability(x0, x0, a, b, sigma)
                    } else {
                        0.0
                    }
                })
                .collect();
        } else {
            mass = grid.diffuse(&mass, sigma);
            for (m, wi) in mass.iter_mut().zip(grid.weights(w.lo, w.hi)) {
                *m *= wi;
            }
        }
        prev = w.time;
    }
    mass.iter().sum()
}

/// Iterated-kernel quadrature on a uniform grid.
pub fn window_probability_quadrature(x0: f64, windows: &[Window], p: &HeatKernelParams, q: &QuadratureGrid) -> Result<f64> {
    p.require_1d()?;
    check_windows(windows)?;
    Ok(quadrature_with_grid(x0, windows, p, &Grid::for_windows(x0, windows, p, q)))
}

/// Checks that `cover` is a finite partition of the line into consecutive intervals.
pub fn validate_cover(cover: &[(f64, f64)]) -> Result<()> {
    let first = cover.first().ok_or_else(|| ClassicalError::NotAPartition("empty cover".into()))?;
    let last = cover.last().expect("nonempty");
    if first.0 != f64::NEG_INFINITY || last.1 != f64::INFINITY {
        return Err(ClassicalError::NotAPartition("cover must run from -inf to +inf".into()));
    }
    for (k, w) in cover.windows(2).enumerate() {
        if w[0].1 != w[1].0 {
            return Err(ClassicalError::NotAPartition(format!("gap or overlap between pieces {k} and {}", k + 1)));
        }
    }
    if cover.iter().any(|&(a, b)| !(a < b)) {
        return Err(ClassicalError::NotAPartition("empty or reversed piece".into()));
    }
    Ok(())
}

/// `(lhs, rhs)`: window `i` replaced by each cover piece and summed, versus window `i` dropped.
pub fn markov_sum_check(
    x0: f64,
    windows: &[Window],
    i: usize,
    cover: &[(f64, f64)],
    p: &HeatKernelParams,
    q: &QuadratureGrid,
) -> Result<(f64, f64)> {
    p.require_1d()?;
    check_windows(windows)?;
    validate_cover(cover)?;
    if i >= windows.len() {
        return Err(ClassicalError::Parameter(format!("window index {i} out of range")));
    }
    let grid = Grid::for_windows(x0, windows, p, q);
    let lhs = cover
        .iter()
        .map(|&(lo, hi)| {
            let mut w = windows.to_vec();
            w[i] = Window::new(windows[i].time, lo, hi);
            quadrature_with_grid(x0, &w, p, &grid)
        })
        .sum();
    // dropping window i is the same as replacing it by the whole line
    let mut w = windows.to_vec();
    w[i] = Window::whole_line(windows[i].time);
    let rhs = quadrature_with_grid(x0, &w, p, &grid);
    Ok((lhs, rhs))
}

/// One measurement in a sequential quantum experiment: evolve by `unitary`, then measure `partition`.
#[derive(Debug, Clone)]
pub struct LswStep {
    pub unitary: Option<CMatrix>,
    pub partition: PartitionOfUnity,
}

/// `tr(πₙ(tₙ)⋯π₁(t₁) Ω π₁(t₁)⋯πₙ(tₙ))` with Heisenberg-evolved projections.
pub fn lsw_quantum(omega0: &CMatrix, steps: &[LswStep], selection: &[usize]) -> Result<f64> {
    if steps.len() != selection.len() {
        return Err(ClassicalError::Parameter("one selection per step".into()));
    }
    let d = omega0.nrows();
    let mut u = crate::linalg::identity(d);
    let mut evolved = Vec::with_capacity(steps.len());
    for (step, &k) in steps.iter().zip(selection) {
        if step.partition.dim() != d {
            return Err(LinalgError::DimensionMismatch {
                expected: d.to_string(),
                found: step.partition.dim().to_string(),
            }
            .into());
        }
        if let Some(v) = &step.unitary {
            u = v * u;
        }
        let pi = step
            .partition
            .projections()
            .get(k)
            .ok_or_else(|| ClassicalError::Parameter(format!("selection {k} out of range")))?;
        evolved.push(u.adjoint() * pi.matrix() * &u);
    }
    Ok(history_probability_of(omega0, evolved.iter()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LswComparison {
    /// Probability of the final selection with the intermediate measurement left out.
    pub direct: f64,
    /// Same, summed over all outcomes of the intermediate measurement.
    pub summed: f64,
    pub violation: f64,
}

/// Quantum counterpart of [`markov_sum_check`] for step `i`.
pub fn lsw_markov_comparison(omega0: &CMatrix, steps: &[LswStep], i: usize, selection: &[usize]) -> Result<LswComparison> {
    if i >= steps.len() {
        return Err(ClassicalError::Parameter(format!("step index {i} out of range")));
    }
    let mut summed = 0.0;
    for k in 0..steps[i].partition.len() {
        let mut sel = selection.to_vec();
        sel[i] = k;
        summed += lsw_quantum(omega0, steps, &sel)?;
    }
    let mut reduced = steps.to_vec();
    let mut sel = selection.to_vec();
    // drop the measurement but keep its dynamics
    reduced[i].partition = PartitionOfUnity::trivial(omega0.nrows());
    sel[i] = 0;
    let direct = lsw_quantum(omega0, &reduced, &sel)?;
    Ok(LswComparison {
        direct,
        summed,
        violation: (direct - summed).abs(),
    })
}

/// Qubit in `|+⟩`, measured in the σ₃ basis and then in the σ₁ basis; selection is `+` at the end.
pub fn lsw_demo() -> LswComparison {
    use crate::linalg::pauli::bloch_density;
    use crate::linalg::Projection;
    let part = |n: [f64; 3]| {
        let m = [-n[0], -n[1], -n[2]];
        PartitionOfUnity::new(
            vec![
                Projection::new(bloch_density(n)).expect("pure state"),
                Projection::new(bloch_density(m)).expect("pure state"),
            ],
            vec![0, 1],
        )
        .expect("two complementary projections")
    };
    let steps = vec![
        LswStep {
            unitary: None,
            partition: part([0.0, 0.0, 1.0]),
        },
        LswStep {
            unitary: None,
            partition: part([1.0, 0.0, 0.0]),
        },
    ];
    lsw_markov_comparison(&bloch_density([1.0, 0.0, 0.0]), &steps, 0, &[0, 0]).expect("consistent instance")
}

/// Initial density on the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialDensity {
    PointMass(f64),
    /// Uniform within each cell `[edges[k], edges[k+1]]` with total weight `weights[k]`.
    Piecewise { edges: Vec<f64>, weights: Vec<f64> },
}

impl InitialDensity {
    fn validate(&self) -> Result<()> {
        if let Self::Piecewise { edges, weights } = self {
            if edges.len() != weights.len() + 1 || weights.is_empty() {
                return Err(ClassicalError::Parameter("need one more edge than weights".into()));
            }
            if edges.windows(2).any(|w| !(w[1] > w[0])) || weights.iter().any(|&w| !(w >= 0.0)) {
                return Err(ClassicalError::Parameter("edges ascending, weights nonnegative".into()));
            }
            if !(weights.iter().sum::<f64>() > 0.0) {
                return Err(ClassicalError::Parameter("weights must not all vanish".into()));
            }
        }
        Ok(())
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Self::PointMass(x) => (*x, *x),
            Self::Piecewise { edges, .. } => (edges[0], *edges.last().expect("validated")),
        }
    }

    /// Probability of landing in `[c, d]` after diffusing with standard deviation `sigma`.
    fn evolved_probability(&self, c: f64, d: f64, sigma: f64) -> f64 {
        match self {
            Self::PointMass(x) => smeared_interval_probability(*x, *x, c, d, sigma),
            Self::Piecewise { edges, weights } => {
                let total: f64 = weights.iter().sum();
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w / total * smeared_interval_probability(edges[k], edges[k + 1], c, d, sigma))
                    .sum()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionCheck {
    pub bin_edges: Vec<f64>,
    pub empirical: Vec<f64>,
    pub expected: Vec<f64>,
    pub se: Vec<f64>,
    /// Largest `|empirical − expected| / se` over bins.
    pub max_z: f64,
    pub max_discrepancy: f64,
    pub all_within_3se: bool,
}

/// Histogram of diffused samples against the kernel-evolved density.
pub fn diffusion_ensemble_check(
    rho0: &InitialDensity,
    t: f64,
    p: &HeatKernelParams,
    n_paths: usize,
    n_bins: usize,
    seed: u64,
) -> Result<DiffusionCheck> {
    p.require_1d()?;
    rho0.validate()?;
    if !(t >= 0.0) || n_paths == 0 || n_bins == 0 {
        return Err(ClassicalError::Parameter("need t >= 0, n_paths >= 1, n_bins >= 1".into()));
    }
    let sigma = p.sigma(t);
    let (a, b) = rho0.support();
    let (lo, hi) = if a == b && sigma == 0.0 {
        (a - 0.5, a + 0.5)
    } else {
        (a - 4.0 * sigma, b + 4.0 * sigma)
    };
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| lo + k as f64 * width).collect();

    let picker = match rho0 {
        InitialDensity::Piecewise { weights, .. } => {
            Some(WeightedIndex::new(weights).map_err(|e| ClassicalError::Parameter(e.to_string()))?)
        }
        InitialDensity::PointMass(_) => None,
    };
    let counts: Vec<u64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let y = match (rho0, &picker) {
                (InitialDensity::Piecewise { edges, .. }, Some(pick)) => {
                    let k = pick.sample(&mut rng);
                    edges[k] + rng.random::<f64>() * (edges[k + 1] - edges[k])
                }
                (InitialDensity::PointMass(x), _) => *x,
                _ => unreachable!("picker matches density kind"),
            };
            let z: f64 = rng.sample(StandardNormal);
            let x = y + sigma * z;
            let k = ((x - lo) / width).floor();
            let mut hist = vec![0u64; n_bins];
            if k >= 0.0 && (k as usize) < n_bins {
                hist[k as usize] = 1;
            }
            hist
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut acc, h| {
                for (a, b) in acc.iter_mut().zip(h) {
                    *a += b;
                }
                acc
            },
        );
    let n = n_paths as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let expected: Vec<f64> = bin_edges
        .windows(2)
        .map(|e| rho0.evolved_probability(e[0], e[1], sigma))
        .collect();
    let se: Vec<f64> = expected.iter().map(|&q| (q * (1.0 - q) / n).sqrt()).collect();
    let mut max_z: f64 = 0.0;
    let mut max_discrepancy: f64 = 0.0;
    let mut all_within_3se = true;
    for k in 0..n_bins {
        let diff = (empirical[k] - expected[k]).abs();
        max_discrepancy = max_discrepancy.max(diff);
        let tol = 3.0 * se[k] + 1e-12;
        if diff > tol {
            all_within_3se = false;
        }
        if se[k] > 0.0 {
            max_z = max_z.max(diff / se[k]);
        } else if diff > 1e-12 {
            max_z = f64::INFINITY;
        }
    }
    Ok(DiffusionCheck {
        bin_edges,
        empirical,
        expected,
        se,
        max_z,
        max_discrepancy,
        all_within_3se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli::bloch_density;
    use crate::linalg::Projection;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p1() -> HeatKernelParams {
        HeatKernelParams::new(0.5, 1).unwrap()
    }

    #[test]
    fn kernel_plug_in_value() {
        let p = HeatKernelParams::new(1.0, 1).unwrap();
        let t = 1.0 / (4.0 * PI);
        assert!((heat_kernel(&[0.0], t, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(heat_kernel(&[0.0], 0.0, &p).is_err());
        let p3 = HeatKernelParams::new(1.0, 3).unwrap();
        assert!((heat_kernel(&[0.0, 0.0, 0.0], t, &p3).unwrap() - 1.0).abs() < 1e-15);
    }

    fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|k| f(a + k as f64 * h)).sum();
        h * (inner + 0.5 * (f(a) + f(b)))
    }

    #[test]
    fn kernel_normalized() {
        let p = p1();
        let total = trapezoid(|x| heat_kernel(&[x], 0.7, &p).unwrap(), -20.0, 20.0, 20_000);
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chapman_kolmogorov_on_grid() {
        let p = p1();
        let (s, t) = (0.3, 0.5);
        for x in [-1.5, 0.0, 0.4, 2.0] {
            let conv = trapezoid(
                |y| heat_kernel(&[x - y], s, &p).unwrap() * heat_kernel(&[y], t, &p).unwrap(),
                -15.0,
                15.0,
                30_000,
            );
            assert!((conv - heat_kernel(&[x], s + t, &p).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn wiener_moments_and_increments() {
        let p = p1();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 20_000;
        let (mut s1, mut s2, mut cov) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let path = sample_wiener(&[1.0], &[0.8, 1.5], &p, &mut rng).unwrap();
            let x = path.positions[0][0] - 1.0;
            let inc = path.positions[1][0] - path.positions[0][0];
            s1 += x;
            s2 += x * x;
            cov += x * inc;
        }
        let nf = n as f64;
        let var = 2.0 * p.d * 0.8;
        assert!((s1 / nf).abs() < 3.0 * (var / nf).sqrt());
        // variance of the sample second moment is 2 var²
        assert!((s2 / nf - var).abs() < 3.0 * (2.0 * var * var / nf).sqrt());
        let var2 = 2.0 * p.d * 0.7;
        assert!((cov / nf).abs() < 3.0 * (var * var2 / nf).sqrt());

        let empty = sample_wiener(&[0.5], &[], &p, &mut rng).unwrap();
        assert!(empty.positions.is_empty() && empty.x0 == vec![0.5]);
        assert!(sample_wiener(&[0.0], &[1.0, 0.5], &p, &mut rng).is_err());
    }

    #[test]
    fn trivial_windows() {
        let p = p1();
        let q = QuadratureGrid::default();
        let whole = [Window::whole_line(1.0)];
        assert!((window_probability_quadrature(0.0, &whole, &p, &q).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(window_probability_mc(0.0, &whole, &p, 500, 1).unwrap().value, 1.0);

        let nested = [Window::new(1.0, -1.0, 1.0), Window::new(1.0, -0.5, 0.5)];
        let inner = [Window::new(1.0, -0.5, 0.5)];
        let a = window_probability_quadrature(0.0, &nested, &p, &q).unwrap();
        let b = window_probability_quadrature(0.0, &inner, &p, &q).unwrap();
        // the second window cuts grid cells, which costs O(h²)
        assert!((a - b).abs() < 2e-5);
        let exact = normal_cdf(0.5) - normal_cdf(-0.5);
        assert!((b - exact).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let p = p1();
        let w = [Window::new(0.5, -0.3, 1.0), Window::new(1.2, 0.0, f64::INFINITY)];
        let quad = window_probability_quadrature(0.2, &w, &p, &QuadratureGrid::default()).unwrap();
        let mc = window_probability_mc(0.2, &w, &p, 40_000, 17).unwrap();
        assert!((mc.value - quad).abs() < 3.0 * mc.se, "mc {} ± {} vs quad {quad}", mc.value, mc.se);
    }

    #[test]
    fn markov_sum_holds() {
        let p = p1();
        let q = QuadratureGrid::default();
        let w = [Window::new(0.5, -0.3, 1.0), Window::new(1.0, -1.0, 0.2), Window::new(1.6, 0.0, 2.0)];
        let (l, r) = markov_sum_check(0.0, &w, 1, &[(f64::NEG_INFINITY, f64::INFINITY)], &p, &q).unwrap();
        assert_eq!(l, r);
        let cover = [(f64::NEG_INFINITY, 0.1), (0.1, f64::INFINITY)];
        let (l, r) = markov_sum_check(0.0, &w, 1, &cover, &p, &q).unwrap();
        assert!((l - r).abs() < 1e-6);
        assert!(markov_sum_check(0.0, &w, 1, &[(f64::NEG_INFINITY, 0.0), (0.5, f64::INFINITY)], &p, &q).is_err());
    }

    fn basis_partition(n: [f64; 3]) -> PartitionOfUnity {
        PartitionOfUnity::new(
            vec![
                Projection::new(bloch_density(n)).unwrap(),
                Projection::new(bloch_density([-n[0], -n[1], -n[2]])).unwrap(),
            ],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn lsw_examples() {
        let omega = bloch_density([0.3, 0.2, -0.5]);
        let step = LswStep {
            unitary: None,
            partition: basis_partition([0.0, 0.0, 1.0]),
        };
        let p0 = lsw_quantum(&omega, std::slice::from_ref(&step), &[0]).unwrap();
        assert!((p0 - 0.25).abs() < 1e-14);

        let demo = lsw_demo();
        assert!((demo.direct - 1.0).abs() < 1e-12);
        assert!((demo.summed - 0.5).abs() < 1e-12);
        assert!((demo.violation - 0.5).abs() < 1e-10);

        // commuting partitions: no interference
        let steps = vec![step.clone(), step];
        let c = lsw_markov_comparison(&omega, &steps, 0, &[0, 1]).unwrap();
        assert!(c.violation < 1e-14);
    }

    #[test]
    fn lsw_total_is_one_with_dynamics() {
        let h = crate::linalg::pauli::sigma_x().scale(0.7);
        let u = crate::linalg::propagator(&h, 1.0, 1.0).unwrap();
        let steps = vec![
            LswStep {
                unitary: None,
                partition: basis_partition([0.0, 0.0, 1.0]),
            },
            LswStep {
                unitary: Some(u),
                partition: basis_partition([0.0, 0.0, 1.0]),
            },
        ];
        let omega = bloch_density([0.1, 0.5, 0.2]);
        let total: f64 = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|s| lsw_quantum(&omega, &steps, s).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diffusion_examples() {
        let p = p1();
        let point = InitialDensity::PointMass(0.3);
        let c = diffusion_ensemble_check(&point, 0.8, &p, 20_000, 16, 2).unwrap();
        // tail bins hold a handful of counts, so allow a looser bound than 3 SE here
        assert!(c.max_z < 5.0, "max z {}", c.max_z);
        let total: f64 = c.expected.iter().sum();
        assert!(total > 0.999);

        let piece = InitialDensity::Piecewise {
            edges: vec![-1.0, 0.0, 2.0],
            weights: vec![0.25, 0.75],
        };
        let c = diffusion_ensemble_check(&piece, 0.0, &p, 50_000, 12, 3).unwrap();
        assert!(c.all_within_3se, "{:?} {:?}", c.empirical, c.expected);
        // at t = 0 the expected histogram is the initial density itself
        let inside: f64 = c
            .bin_edges
            .windows(2)
            .zip(&c.expected)
            .filter(|(e, _)| e[1] <= -1.0 || e[0] >= 2.0)
            .map(|(_, q)| q)
            .sum();
        assert!(inside < 1e-15);
    }

    #[test]
    fn smeared_probability_limits() {
        // narrow uniform approaches the point-mass formula
        let a = smeared_interval_probability(0.0, 1e-7, -0.5, 0.7, 0.4);
        let b = normal_cdf(0.7 / 0.4) - normal_cdf(-0.5 / 0.4);
        assert!((a - b).abs() < 1e-6);
        let whole = smeared_interval_probability(-1.0, 2.0, f64::NEG_INFINITY, f64::INFINITY, 0.3);
        assert!((whole - 1.0).abs() < 1e-12);
    }
}
