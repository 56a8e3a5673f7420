//! Scenario dispatch and output files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ethsim_core::algebra::{AlgebraError, PartitionOfUnity};
use ethsim_core::classical::{
    diffusion_ensemble_check, lsw_demo, markov_sum_check, window_probability_mc, window_probability_quadrature,
    ClassicalError, HeatKernelParams, InitialDensity, QuadratureGrid, Window,
};
use ethsim_core::eth::{history_probability_of, sample_prescribed_history, EthError, State};
use ethsim_core::linalg::pauli::bloch_density;
use ethsim_core::linalg::{DensityMatrix, LinalgError, Projection};
use ethsim_core::models::fluorescence::run_photomultiplier_ensemble;
use ethsim_core::models::{
    build_atom_field_model, check_pdp, integrate_lindblad, run_fluorescence_ensemble, stern_gerlach_demo, AtomFieldConfig,
    BlochVector, Detector, FluorescenceParams, ModelError,
};
use ethsim_core::rng::{derive_seed, stream};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Format, RunConfig, Scenario};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Eth(#[from] EthError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    F(f64),
    U(u64),
    I(i64),
    B(bool),
    S(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x:?}"),
            Cell::U(x) => write!(f, "{x}"),
            Cell::I(x) => write!(f, "{x}"),
            Cell::B(x) => write!(f, "{x}"),
            Cell::S(x) => f.write_str(x),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

/// Scenario result before it is written anywhere.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub table: Table,
    pub headline: Value,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub data_file: PathBuf,
    pub summary_file: PathBuf,
    pub output: ScenarioOutput,
}

pub fn execute(cfg: &RunConfig) -> Result<ScenarioOutput, RunError> {
    let seed = cfg.seed;
    match &cfg.scenario {
        &Scenario::Fluorescence {
            alpha,
            omega,
            dt,
            t_final,
            n_traj,
            n0,
            bins,
        } => fluorescence(FluorescenceParams::new(omega, alpha, dt, t_final)?, n0, n_traj, bins, seed),
        &Scenario::Photomultiplier {
            alpha,
            omega,
            dt,
            t_final,
            n_traj,
            n0,
        } => photomultiplier(FluorescenceParams::new(omega, alpha, dt, t_final)?, n0, n_traj, seed),
        &Scenario::PdpCheck {
            g,
            tau,
            n_modes,
            mode_dim,
            omega,
        } => pdp(AtomFieldConfig {
            atom_levels: 2,
            n_modes,
            mode_dim,
            g,
            tau,
            omega,
        }),
        &Scenario::SternGerlach { n_traj, n0 } => stern_gerlach(n0, n_traj, seed),
        &Scenario::Brownian { d, t_final, n_paths, bins } => brownian(d, t_final, n_paths, bins, seed),
        Scenario::LswDemo => lsw(),
        &Scenario::HistoryTree { depth, n_traj, n0 } => history_tree(depth, n0, n_traj, seed),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the scenario and writes `<scenario>_<seed>.<csv|json>` and `<scenario>_<seed>.summary.json` into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, RunError> {
    let output = execute(cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stem = format!("{}_{}", cfg.scenario.kind(), cfg.seed);
    let data_file = out_dir.join(format!("{stem}.{}", cfg.format.extension()));
    let summary_file = out_dir.join(format!("{stem}.summary.json"));
    let data = match cfg.format {
        Format::Csv => output.table.to_csv(),
        Format::Json => output.table.to_json(),
    };
    fs::write(&data_file, data).map_err(io_err(&data_file))?;

    let summary = json!({
        "program": "ethsim",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.scenario.kind().name(),
        "seed": cfg.seed,
        "inputs": cfg,
        "data_file": data_file.file_name().map(|f| f.to_string_lossy().into_owned()),
        "columns": output.table.columns,
        "headline": output.headline,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::write(&summary_file, text).map_err(io_err(&summary_file))?;
    Ok(RunArtifacts {
        data_file,
        summary_file,
        output,
    })
}

pub const FLUORESCENCE_COLUMNS: [&str; 11] = [
    "t", "mean_n1", "mean_n2", "mean_n3", "se_n1", "se_n2", "se_n3", "jump_rate", "ref_n1", "ref_n2", "ref_n3",
];

fn fluorescence(p: FluorescenceParams, n0: [f64; 3], n_traj: usize, bins: usize, seed: u64) -> Result<ScenarioOutput, RunError> {
    let n0 = BlochVector::from_array(n0)?;
    let ens = run_fluorescence_ensemble(n0, &p, n_traj, seed, bins)?;
    let reference = integrate_lindblad(n0, &p, p.n_steps() as f64 * p.dt)?;
    let mut table = Table::new(&FLUORESCENCE_COLUMNS);
    let mut max_z: f64 = 0.0;
    let mut within = true;
    for (b, &t) in ens.times.iter().enumerate() {
        let k = (t / p.dt).round() as usize;
        let r = reference.states[k].to_array();
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(ens.mean[b].iter().map(|&x| Cell::F(x)));
        row.extend(ens.se[b].iter().map(|&x| Cell::F(x)));
        row.push(ens.jump_rate[b].into());
        row.extend(r.iter().map(|&x| Cell::F(x)));
        table.push(row);
        for c in 0..3 {
            let diff = (ens.mean[b][c] - r[c]).abs();
            if diff > 3.0 * ens.se[b][c] + 1e-12 {
                within = false;
            }
            if ens.se[b][c] > 0.0 {
                max_z = max_z.max(diff / ens.se[b][c]);
            }
        }
    }
    let total = ens.total_jumps();
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "n_traj": n_traj,
            "n_steps": p.n_steps(),
            "output_bins": ens.times.len(),
            "max_abs_z": max_z,
            "within_3se_every_bin": within,
            "total_jumps": total,
            "mean_jumps_per_trajectory": total as f64 / n_traj as f64,
            "jump_count_distribution": ens.jump_count_distribution,
        }),
    })
}

/// Calibration constant of the emission rate for an initial Bloch vector, `(1 + n₃)²/4`.
pub fn emission_calibration(n0: [f64; 3]) -> f64 {
    (1.0 + n0[2]).powi(2) / 4.0
}

fn photomultiplier(p: FluorescenceParams, n0: [f64; 3], n_traj: usize, seed: u64) -> Result<ScenarioOutput, RunError> {
    let n0v = BlochVector::from_array(n0)?;
    let off = run_photomultiplier_ensemble(n0v, &p, false, n_traj, seed)?;
    let on = run_photomultiplier_ensemble(n0v, &p, true, n_traj, derive_seed(seed, 1))?;
    let mut table = Table::new(&[
        "experiment",
        "detect_photon",
        "n_runs",
        "emitted",
        "emission_frequency",
        "p_plus",
        "p_plus_se",
        "emitted_not_ground",
        "mean_theta_dev_no_jump",
        "mean_theta_dev_one_jump",
    ]);
    for (name, s) in [("1", &off), ("2", &on)] {
        table.push(vec![
            name.into(),
            s.detect_photon.into(),
            s.n_runs.into(),
            s.emitted.into(),
            s.emission_frequency.into(),
            s.p_plus.into(),
            s.p_plus_se.into(),
            s.emitted_not_ground.into(),
            s.mean_theta_dev_no_jump.map_or(Cell::S(String::new()), Cell::F),
            s.mean_theta_dev_one_jump.map_or(Cell::S(String::new()), Cell::F),
        ]);
    }
    let tv = (off.p_plus - on.p_plus).abs();
    let tv_se = (off.p_plus_se.powi(2) + on.p_plus_se.powi(2)).sqrt();
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "alpha_T": p.alpha * p.t_final,
            "calibration_constant": emission_calibration(n0),
            "emission_frequency_off": off.emission_frequency,
            "emission_frequency_on": on.emission_frequency,
            "emitted_not_ground": on.emitted_not_ground,
            "reading_tv_distance": tv,
            "reading_tv_se": tv_se,
            "jump_count_distribution_off": off.jump_count_distribution,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PdpRow {
    pub n: usize,
    pub n_prime: usize,
    pub computed_dim: usize,
    pub expected_dim: usize,
    pub pass: bool,
}

pub fn pdp_rows(cfg: AtomFieldConfig) -> Result<Vec<PdpRow>, RunError> {
    let model = build_atom_field_model(cfg)?;
    let mut rows = Vec::new();
    for n in 0..cfg.n_modes {
        for n_prime in n + 1..=cfg.n_modes {
            let (computed_dim, expected_dim) = check_pdp(&model, n, n_prime)?;
            rows.push(PdpRow {
                n,
                n_prime,
                computed_dim,
                expected_dim,
                pass: computed_dim == expected_dim,
            });
        }
    }
    Ok(rows)
}

fn pdp(cfg: AtomFieldConfig) -> Result<ScenarioOutput, RunError> {
    let rows = pdp_rows(cfg)?;
    let mut table = Table::new(&["n", "n_prime", "computed_dim", "expected_dim", "pass"]);
    for r in &rows {
        table.push(vec![r.n.into(), r.n_prime.into(), r.computed_dim.into(), r.expected_dim.into(), r.pass.into()]);
    }
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "total_dim": 2 * cfg.mode_dim.pow(cfg.n_modes as u32),
            "all_pass": rows.iter().all(|r| r.pass),
            "pairs": rows,
        }),
    })
}

fn stern_gerlach(n0: [f64; 3], n_traj: usize, seed: u64) -> Result<ScenarioOutput, RunError> {
    let spin = BlochVector::from_array(n0)?;
    let outcomes: Vec<Detector> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| stern_gerlach_demo(spin, &mut stream(seed, i)))
        .collect::<Result<_, _>>()?;
    let upper = outcomes.iter().filter(|&&d| d == Detector::Upper).count() as u64;
    let lower = n_traj as u64 - upper;
    let mut table = Table::new(&["detector", "count", "frequency", "born_weight"]);
    let nt = n_traj as f64;
    let w_up = (1.0 + n0[2]) / 2.0;
    table.push(vec!["upper".into(), upper.into(), (upper as f64 / nt).into(), w_up.into()]);
    table.push(vec!["lower".into(), lower.into(), (lower as f64 / nt).into(), (1.0 - w_up).into()]);
    let se = (w_up * (1.0 - w_up) / nt).sqrt();
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "upper": upper,
            "lower": lower,
            "born_weight_upper": w_up,
            "z": if se > 0.0 { (upper as f64 / nt - w_up).abs() / se } else { 0.0 },
        }),
    })
}

/// Piecewise-uniform initial density used by the diffusion check.
pub fn brownian_initial_density() -> InitialDensity {
    InitialDensity::Piecewise {
        edges: vec![-1.0, 0.0, 0.5, 2.0],
        weights: vec![0.2, 0.5, 0.3],
    }
}

/// Three windows scaled to the spread at `t_final`, and the cover used for the middle one.
pub fn brownian_windows(p: &HeatKernelParams, t_final: f64) -> (Vec<Window>, Vec<(f64, f64)>) {
    let s = p.sigma(t_final);
    let windows = vec![
        Window::new(t_final / 3.0, -s, s),
        Window::new(2.0 * t_final / 3.0, f64::NEG_INFINITY, 0.5 * s),
        Window::new(t_final, -0.5 * s, f64::INFINITY),
    ];
    let cover = vec![(f64::NEG_INFINITY, -0.2 * s), (-0.2 * s, 0.3 * s), (0.3 * s, f64::INFINITY)];
    (windows, cover)
}

fn brownian(d: f64, t_final: f64, n_paths: usize, bins: usize, seed: u64) -> Result<ScenarioOutput, RunError> {
    let p = HeatKernelParams::new(d, 1)?;
    let check = diffusion_ensemble_check(&brownian_initial_density(), t_final, &p, n_paths, bins, seed)?;
    let mut table = Table::new(&["bin_lo", "bin_hi", "empirical", "expected", "se"]);
    for k in 0..check.empirical.len() {
        table.push(vec![
            check.bin_edges[k].into(),
            check.bin_edges[k + 1].into(),
            check.empirical[k].into(),
            check.expected[k].into(),
            check.se[k].into(),
        ]);
    }
    let (windows, cover) = brownian_windows(&p, t_final);
    let q = QuadratureGrid::default();
    let (lhs, rhs) = markov_sum_check(0.0, &windows, 1, &cover, &p, &q)?;
    let quad = window_probability_quadrature(0.0, &windows, &p, &q)?;
    let mc = window_probability_mc(0.0, &windows, &p, n_paths, derive_seed(seed, 1))?;
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "all_bins_within_3se": check.all_within_3se,
            "max_z": check.max_z,
            "max_discrepancy": check.max_discrepancy,
            "markov_lhs": lhs,
            "markov_rhs": rhs,
            "window_probability_quadrature": quad,
            "window_probability_mc": mc.value,
            "window_probability_mc_se": mc.se,
        }),
    })
}

fn lsw() -> Result<ScenarioOutput, RunError> {
    let demo = lsw_demo();
    let p = HeatKernelParams::new(0.5, 1)?;
    let (windows, cover) = brownian_windows(&p, 1.0);
    let (lhs, rhs) = markov_sum_check(0.0, &windows, 1, &cover, &p, &QuadratureGrid::default())?;
    let mut table = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("quantum_direct", demo.direct),
        ("quantum_summed", demo.summed),
        ("quantum_violation", demo.violation),
        ("classical_lhs", lhs),
        ("classical_rhs", rhs),
        ("classical_violation", (lhs - rhs).abs()),
    ] {
        table.push(vec![k.into(), v.into()]);
    }
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "quantum_violation": demo.violation,
            "classical_violation": (lhs - rhs).abs(),
        }),
    })
}

/// Qubit partitions along axes tilted by `jπ/(depth + 1)` from `e₃` in the x–z plane.
pub fn history_tree_partitions(depth: usize) -> Vec<PartitionOfUnity> {
    (1..=depth)
        .map(|j| {
            let th = j as f64 * std::f64::consts::PI / (depth as f64 + 1.0);
            let n = [th.sin(), 0.0, th.cos()];
            let m = [-n[0], 0.0, -n[2]];
            PartitionOfUnity::new(
                vec![
                    Projection::new(bloch_density(n)).expect("pure state"),
                    Projection::new(bloch_density(m)).expect("pure state"),
                ],
                vec![0, 1],
            )
            .expect("complementary projections")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryTreeStats {
    pub probabilities: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_traj: usize,
}

/// Exact probabilities of all `2^depth` histories and sampled counts; history `h`
/// selects branch `(h >> (depth − 1 − j)) & 1` at step `j`.
pub fn history_tree_stats(depth: usize, n0: [f64; 3], n_traj: usize, seed: u64) -> Result<HistoryTreeStats, RunError> {
    let parts = history_tree_partitions(depth);
    let omega = bloch_density(n0);
    let n_hist = 1usize << depth;
    let probabilities = (0..n_hist)
        .map(|h| {
            let proj = (0..depth).map(|j| parts[j].projections()[(h >> (depth - 1 - j)) & 1].matrix());
            history_probability_of(&omega, proj)
        })
        .collect();
    let state = State::new(
        DensityMatrix::new(omega)?,
        std::sync::Arc::new(ethsim_core::algebra::AlgebraBasis::full(2)),
        0,
    )?;
    let indices: Vec<usize> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let h = sample_prescribed_history(&state, &parts, &mut stream(seed, i))?;
            Ok(h.labels().iter().fold(0usize, |acc, &l| (acc << 1) | l as usize))
        })
        .collect::<Result<_, EthError>>()?;
    let mut counts = vec![0u64; n_hist];
    for h in indices {
        counts[h] += 1;
    }
    Ok(HistoryTreeStats {
        probabilities,
        counts,
        n_traj,
    })
}

fn history_tree(depth: usize, n0: [f64; 3], n_traj: usize, seed: u64) -> Result<ScenarioOutput, RunError> {
    let stats = history_tree_stats(depth, n0, n_traj, seed)?;
    let nt = n_traj as f64;
    let mut table = Table::new(&["history", "probability", "count", "frequency", "se"]);
    let mut max_z: f64 = 0.0;
    let mut within = true;
    for (h, (&p, &c)) in stats.probabilities.iter().zip(&stats.counts).enumerate() {
        let label: String = (0..depth).map(|j| if (h >> (depth - 1 - j)) & 1 == 0 { '0' } else { '1' }).collect();
        let freq = c as f64 / nt;
        let se = (p * (1.0 - p) / nt).sqrt();
        let diff = (freq - p).abs();
        if diff > 3.0 * se + 1e-12 {
            within = false;
        }
        if se > 0.0 {
            max_z = max_z.max(diff / se);
        }
        table.push(vec![label.as_str().into(), p.into(), c.into(), freq.into(), se.into()]);
    }
    Ok(ScenarioOutput {
        table,
        headline: json!({
            "total_probability": stats.probabilities.iter().sum::<f64>(),
            "all_within_3se": within,
            "max_z": max_z,
        }),
    })
}

