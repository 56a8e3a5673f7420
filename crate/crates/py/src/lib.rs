//! Python bindings. Matrices cross the boundary as nested lists of `complex`;
//! structured results come back as dicts.

use std::fmt::Display;
use std::path::PathBuf;
use std::sync::Arc;

use ethsim_cli::config::parse_config;
use ethsim_cli::runner;
use ethsim_core::algebra::{self, AlgebraBasis};
use ethsim_core::classical;
use ethsim_core::eth::{self, EthParams, State};
use ethsim_core::linalg::{CMatrix, DensityMatrix, C64};
use ethsim_core::models::{self, BlochVector, FluorescenceParams};
use ethsim_core::rng::stream;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

pub fn matrix_from_rows(rows: &[Vec<C64>]) -> Result<CMatrix, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("expected a non-empty square matrix, got {n} rows"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn bloch(n: [f64; 3]) -> PyResult<BlochVector> {
    BlochVector::from_array(n).map_err(err)
}

/// A *-subalgebra of `B(C^d)` stored as an orthonormal basis.
#[pyclass(name = "Algebra", module = "ethsim_py", frozen)]
pub struct PyAlgebra {
    inner: Arc<AlgebraBasis>,
}

impl PyAlgebra {
    fn wrap(a: AlgebraBasis) -> Self {
        Self { inner: Arc::new(a) }
    }
}

#[pymethods]
impl PyAlgebra {
    #[staticmethod]
    fn full(d: usize) -> Self {
        Self::wrap(AlgebraBasis::full(d))
    }

    #[staticmethod]
    fn diagonal(d: usize) -> Self {
        Self::wrap(AlgebraBasis::diagonal(d))
    }

    #[staticmethod]
    fn scalars(d: usize) -> Self {
        Self::wrap(AlgebraBasis::scalars(d))
    }

    /// Algebra generated by the given matrices and the identity.
    #[staticmethod]
    fn generated_by(generators: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let gens = generators
            .iter()
            .map(|g| matrix_from_rows(g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let d = gens.first().map(|g| g.nrows()).ok_or_else(|| err("need at least one generator"))?;
        Ok(Self::wrap(algebra::generate_algebra(&gens, d).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn basis(&self) -> Vec<Vec<Vec<C64>>> {
        self.inner.basis().iter().map(matrix_to_rows).collect()
    }

    fn tensor(&self, other: &PyAlgebra) -> Self {
        Self::wrap(self.inner.tensor(&other.inner))
    }

    /// `u† A u`.
    fn conjugated(&self, u: Vec<Vec<C64>>) -> PyResult<Self> {
        let u = matrix_from_rows(&u).map_err(err)?;
        if u.nrows() != self.inner.ambient_dim() {
            return Err(err("unitary dimension does not match the algebra"));
        }
        Ok(Self::wrap(self.inner.conjugated(&u)))
    }

    fn commutant(&self) -> Self {
        Self::wrap(algebra::commutant(&self.inner))
    }

    fn center(&self) -> Self {
        Self::wrap(algebra::center(&self.inner))
    }

    fn contains(&self, other: &PyAlgebra, tol: f64) -> bool {
        self.inner.contains(&other.inner, tol)
    }

    fn __repr__(&self) -> String {
        format!("Algebra(dim={}, ambient_dim={})", self.inner.dim(), self.inner.ambient_dim())
    }
}

fn state(rho: &[Vec<C64>], alg: &PyAlgebra) -> PyResult<State> {
    let m = matrix_from_rows(rho).map_err(err)?;
    State::new(DensityMatrix::new(m).map_err(err)?, alg.inner.clone(), 0).map_err(err)
}

/// Minimal projections of the center of the centralizer of `rho` on `algebra`.
#[pyfunction]
fn finest_event(rho: Vec<Vec<C64>>, algebra: &PyAlgebra) -> PyResult<Vec<Vec<Vec<C64>>>> {
    let s = state(&rho, algebra)?;
    let p = eth::finest_event(&s, &EthParams::default()).map_err(err)?;
    Ok(p.projections().iter().map(|q| matrix_to_rows(q.matrix())).collect())
}

/// One restriction-and-collapse step; returns the new density and the step record.
#[pyfunction]
fn eth_step(py: Python<'_>, rho: Vec<Vec<C64>>, algebra: &PyAlgebra, next: &PyAlgebra, seed: u64) -> PyResult<Py<PyAny>> {
    let s = state(&rho, algebra)?;
    let (out, rec) = eth::eth_step(&s, next.inner.clone(), &mut stream(seed, 0), &EthParams::default()).map_err(err)?;
    #[derive(Serialize)]
    struct Step {
        rho: Vec<Vec<[f64; 2]>>,
        projection: Vec<Vec<[f64; 2]>>,
        label: i64,
        born_probability: f64,
        actualized: bool,
        partition_size: usize,
    }
    let pairs = |m: &CMatrix| {
        matrix_to_rows(m)
            .into_iter()
            .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
            .collect()
    };
    to_py(
        py,
        &Step {
            rho: pairs(out.omega().matrix()),
            projection: pairs(rec.projection.matrix()),
            label: rec.label,
            born_probability: rec.born_probability,
            actualized: rec.actualized,
            partition_size: rec.partition_size,
        },
    )
}

/// `tr(H† ρ H)` with `H = π₁ ⋯ πₙ`.
#[pyfunction]
fn history_probability(rho: Vec<Vec<C64>>, projections: Vec<Vec<Vec<C64>>>) -> PyResult<f64> {
    let rho = matrix_from_rows(&rho).map_err(err)?;
    let ps = projections
        .iter()
        .map(|p| matrix_from_rows(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    if ps.iter().any(|p| p.nrows() != rho.nrows()) {
        return Err(err("projection dimension does not match the state"));
    }
    Ok(eth::history_probability_of(&rho, ps.iter()))
}

#[pyfunction]
#[pyo3(signature = (n0, omega, alpha, dt, t_final))]
fn integrate_lindblad(py: Python<'_>, n0: [f64; 3], omega: f64, alpha: f64, dt: f64, t_final: f64) -> PyResult<Py<PyAny>> {
    let p = FluorescenceParams::new(omega, alpha, dt, t_final).map_err(err)?;
    let path = models::integrate_lindblad(bloch(n0)?, &p, t_final).map_err(err)?;
    let states: Vec<[f64; 3]> = path.states.iter().map(|s| s.to_array()).collect();
    to_py(py, &serde_json::json!({ "times": path.times, "states": states }))
}

#[pyfunction]
#[pyo3(signature = (n0, omega, alpha, dt, t_final, n_traj, seed, n_bins=40))]
#[allow(clippy::too_many_arguments)]
fn fluorescence_ensemble(
    py: Python<'_>,
    n0: [f64; 3],
    omega: f64,
    alpha: f64,
    dt: f64,
    t_final: f64,
    n_traj: usize,
    seed: u64,
    n_bins: usize,
) -> PyResult<Py<PyAny>> {
    let p = FluorescenceParams::new(omega, alpha, dt, t_final).map_err(err)?;
    let ens = models::run_fluorescence_ensemble(bloch(n0)?, &p, n_traj, seed, n_bins).map_err(err)?;
    to_py(py, &ens)
}

#[pyfunction]
#[pyo3(signature = (n0, omega, alpha, dt, t_final, detect_photon, n_runs, seed))]
#[allow(clippy::too_many_arguments)]
fn photomultiplier(
    py: Python<'_>,
    n0: [f64; 3],
    omega: f64,
    alpha: f64,
    dt: f64,
    t_final: f64,
    detect_photon: bool,
    n_runs: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let p = FluorescenceParams::new(omega, alpha, dt, t_final).map_err(err)?;
    let s = models::fluorescence::run_photomultiplier_ensemble(bloch(n0)?, &p, detect_photon, n_runs, seed).map_err(err)?;
    to_py(py, &s)
}

/// `(n, n′, computed_dim, expected_dim)` for all pairs of the atom–field model.
#[pyfunction]
#[pyo3(signature = (g, tau, n_modes, mode_dim=2, omega=0.0))]
fn check_pdp(g: f64, tau: f64, n_modes: usize, mode_dim: usize, omega: f64) -> PyResult<Vec<(usize, usize, usize, usize)>> {
    let rows = runner::pdp_rows(models::AtomFieldConfig {
        atom_levels: 2,
        n_modes,
        mode_dim,
        g,
        tau,
        omega,
    })
    .map_err(err)?;
    Ok(rows.iter().map(|r| (r.n, r.n_prime, r.computed_dim, r.expected_dim)).collect())
}

/// Fitted decay rate of the single-mode atom–field model.
#[pyfunction]
fn calibrate_alpha(py: Python<'_>, g: f64, tau: f64) -> PyResult<Py<PyAny>> {
    let m = models::build_atom_field_model(models::AtomFieldConfig {
        n_modes: 1,
        g,
        tau,
        omega: 0.0,
        ..Default::default()
    })
    .map_err(err)?;
    to_py(py, &models::calibrate_alpha(&m).map_err(err)?)
}

/// Detector that fired for one spin, `"upper"` or `"lower"`.
#[pyfunction]
fn stern_gerlach(n0: [f64; 3], seed: u64) -> PyResult<String> {
    let d = models::stern_gerlach_demo(bloch(n0)?, &mut stream(seed, 0)).map_err(err)?;
    Ok(match d {
        models::Detector::Upper => "upper".into(),
        models::Detector::Lower => "lower".into(),
    })
}

#[pyfunction]
fn smeared_interval_probability(a: f64, b: f64, c: f64, d: f64, sigma: f64) -> f64 {
    classical::smeared_interval_probability(a, b, c, d, sigma)
}

/// The documented qubit instance where the quantum Markov sum fails.
#[pyfunction]
fn lsw_demo() -> (f64, f64, f64) {
    let r = classical::lsw_demo();
    (r.direct, r.summed, r.violation)
}

/// Runs a scenario from config text (key=value lines or JSON) without writing files.
#[pyfunction]
fn execute(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let cfg = parse_config(config).map_err(err)?;
    let out = runner::execute(&cfg).map_err(err)?;
    to_py(
        py,
        &serde_json::json!({ "columns": out.table.columns, "rows": out.table.rows, "headline": out.headline }),
    )
}

/// Runs a scenario and writes its data and summary files into `out_dir`.
#[pyfunction]
fn run_scenario(config: &str, out_dir: PathBuf) -> PyResult<(String, String)> {
    let cfg = parse_config(config).map_err(err)?;
    let a = runner::run(&cfg, &out_dir).map_err(err)?;
    Ok((a.data_file.display().to_string(), a.summary_file.display().to_string()))
}

#[pymodule]
fn ethsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyAlgebra>()?;
    m.add_function(wrap_pyfunction!(finest_event, m)?)?;
    m.add_function(wrap_pyfunction!(eth_step, m)?)?;
    m.add_function(wrap_pyfunction!(history_probability, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_lindblad, m)?)?;
    m.add_function(wrap_pyfunction!(fluorescence_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(photomultiplier, m)?)?;
    m.add_function(wrap_pyfunction!(check_pdp, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(stern_gerlach, m)?)?;
    m.add_function(wrap_pyfunction!(smeared_interval_probability, m)?)?;
    m.add_function(wrap_pyfunction!(lsw_demo, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
