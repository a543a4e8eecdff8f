//! Python bindings for the completion solver. Matrices cross the boundary
//! as plain nested lists; the classes wrap their Rust counterparts and keep
//! the same names.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nalgebra::DMatrix;

fn core_err(e: r2rils::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Sparse set of observed entries of an m-by-n matrix.
#[pyclass(name = "ObservedMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyObservedMatrix {
    inner: r2rils::ObservedMatrix,
}

#[pymethods]
impl PyObservedMatrix {
    #[new]
    fn new(m: usize, n: usize, entries: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: r2rils::ObservedMatrix::new(m, n, entries).map_err(core_err)?,
        })
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.inner.entries().to_vec()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.to_dense())
    }

    fn __repr__(&self) -> String {
        format!(
            "ObservedMatrix({}x{}, nnz={})",
            self.inner.nrows(),
            self.inner.ncols(),
            self.inner.nnz()
        )
    }
}

/// Solver knobs; `variant` is "standard" or "naive", `init` is "svd" or
/// "random".
#[pyclass(name = "SolverConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: r2rils::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    fn new(rank: usize) -> Self {
        Self {
            inner: r2rils::SolverConfig::new(rank),
        }
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    #[getter]
    fn get_t_max(&self) -> usize {
        self.inner.t_max
    }

    #[setter]
    fn set_t_max(&mut self, v: usize) {
        self.inner.t_max = v;
    }

    #[getter]
    fn get_lsqr_max_iter(&self) -> usize {
        self.inner.lsqr_max_iter
    }

    #[setter]
    fn set_lsqr_max_iter(&mut self, v: usize) {
        self.inner.lsqr_max_iter = v;
    }

    #[getter]
    fn get_lsqr_tol(&self) -> f64 {
        self.inner.lsqr_tol
    }

    #[setter]
    fn set_lsqr_tol(&mut self, v: f64) {
        self.inner.lsqr_tol = v;
    }

    #[getter]
    fn get_eps_exact(&self) -> f64 {
        self.inner.eps_exact
    }

    #[setter]
    fn set_eps_exact(&mut self, v: f64) {
        self.inner.eps_exact = v;
    }

    #[getter]
    fn get_eps_step(&self) -> f64 {
        self.inner.eps_step
    }

    #[setter]
    fn set_eps_step(&mut self, v: f64) {
        self.inner.eps_step = v;
    }

    #[getter]
    fn get_delta_rel(&self) -> f64 {
        self.inner.delta_rel
    }

    #[setter]
    fn set_delta_rel(&mut self, v: f64) {
        self.inner.delta_rel = v;
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn get_normalize_ls_columns(&self) -> bool {
        self.inner.normalize_ls_columns
    }

    #[setter]
    fn set_normalize_ls_columns(&mut self, v: bool) {
        self.inner.normalize_ls_columns = v;
    }

    #[getter]
    fn get_variant(&self) -> &'static str {
        match self.inner.update_variant {
            r2rils::UpdateVariant::Standard => "standard",
            r2rils::UpdateVariant::Naive => "naive",
            r2rils::UpdateVariant::Weighted { .. } => "weighted",
            r2rils::UpdateVariant::NonMinimal { .. } => "non_minimal",
        }
    }

    #[setter]
    fn set_variant(&mut self, v: &str) -> PyResult<()> {
        self.inner.update_variant = match v {
            "standard" => r2rils::UpdateVariant::Standard,
            "naive" => r2rils::UpdateVariant::Naive,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown variant {other:?} (expected standard or naive)"
                )))
            }
        };
        Ok(())
    }

    #[getter]
    fn get_init(&self) -> &'static str {
        match self.inner.init_mode {
            r2rils::InitMode::Svd => "svd",
            r2rils::InitMode::Random => "random",
            r2rils::InitMode::Explicit(_) => "explicit",
        }
    }

    #[setter]
    fn set_init(&mut self, v: &str) -> PyResult<()> {
        self.inner.init_mode = match v {
            "svd" => r2rils::InitMode::Svd,
            "random" => r2rils::InitMode::Random,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown init {other:?} (expected svd or random)"
                )))
            }
        };
        Ok(())
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(core_err)
    }
}

/// Rank-r factorization returned by the solver, with its iteration trace.
#[pyclass(name = "CompletionResult")]
struct PyCompletionResult {
    inner: r2rils::CompletionResult,
}

#[pymethods]
impl PyCompletionResult {
    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.u)
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.s.iter().copied().collect()
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.v)
    }

    #[getter]
    fn best_iteration(&self) -> usize {
        self.inner.best_iteration
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.trace.len()
    }

    #[getter]
    fn stop_reason(&self) -> &'static str {
        self.inner.stop_reason.as_str()
    }

    #[getter]
    fn lifted_singular_values(&self) -> Vec<f64> {
        self.inner.lifted_singular_values.clone()
    }

    /// Per-iteration records as (iter, rmse_obs, step_norm, lsqr_iters,
    /// attenuated) tuples.
    fn trace(&self) -> Vec<(usize, f64, f64, usize, bool)> {
        self.inner
            .trace
            .records
            .iter()
            .map(|r| (r.iter, r.rmse_obs, r.step_norm, r.lsqr_iters, r.attenuated))
            .collect()
    }

    fn value_at(&self, i: usize, j: usize) -> f64 {
        self.inner.value_at(i, j)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.to_dense())
    }

    fn observed_rmse(&self, obs: &PyObservedMatrix) -> PyResult<f64> {
        self.inner.observed_rmse(&obs.inner).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "CompletionResult(rank={}, iterations={}, stop_reason={})",
            self.inner.s.len(),
            self.inner.trace.len(),
            self.inner.stop_reason.as_str()
        )
    }
}

/// Synthetic ground truth held in factored form.
#[pyclass(name = "GroundTruth", skip_from_py_object)]
#[derive(Clone)]
struct PyGroundTruth {
    inner: r2rils::datagen::GroundTruth,
}

#[pymethods]
impl PyGroundTruth {
    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.s.iter().copied().collect()
    }

    fn value_at(&self, i: usize, j: usize) -> f64 {
        self.inner.value_at(i, j)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.to_dense())
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn observe(&self, indices: Vec<(usize, usize)>) -> PyResult<PyObservedMatrix> {
        Ok(PyObservedMatrix {
            inner: self.inner.observe(&indices).map_err(core_err)?,
        })
    }
}

#[pyfunction]
fn complete(obs: &PyObservedMatrix, cfg: &PySolverConfig) -> PyResult<PyCompletionResult> {
    Ok(PyCompletionResult {
        inner: r2rils::complete(&obs.inner, &cfg.inner).map_err(core_err)?,
    })
}

#[pyfunction]
fn generate_uniform(
    m: usize,
    n: usize,
    rank: usize,
    spectrum: Vec<f64>,
    seed: u64,
) -> PyResult<PyGroundTruth> {
    Ok(PyGroundTruth {
        inner: r2rils::datagen::generate_uniform(m, n, rank, &spectrum, seed).map_err(core_err)?,
    })
}

#[pyfunction]
fn generate_power_law(
    m: usize,
    n: usize,
    rank: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<PyGroundTruth> {
    Ok(PyGroundTruth {
        inner: r2rils::datagen::generate_power_law(m, n, rank, alpha, seed).map_err(core_err)?,
    })
}

#[pyfunction]
fn sample_omega(
    m: usize,
    n: usize,
    rank: usize,
    rho: f64,
    seed: u64,
) -> PyResult<Vec<(usize, usize)>> {
    Ok(r2rils::datagen::sample_omega(m, n, rank, rho, seed)
        .map_err(core_err)?
        .indices()
        .to_vec())
}

#[pyfunction]
fn sample_fixed_count(
    m: usize,
    n: usize,
    rank: usize,
    count: usize,
    seed: u64,
) -> PyResult<Vec<(usize, usize)>> {
    Ok(r2rils::datagen::sample_fixed_count(m, n, rank, count, seed)
        .map_err(core_err)?
        .indices()
        .to_vec())
}

#[pyfunction]
fn add_noise(obs: &PyObservedMatrix, eta0: f64, seed: u64) -> PyResult<PyObservedMatrix> {
    Ok(PyObservedMatrix {
        inner: r2rils::datagen::add_noise(&obs.inner, eta0, seed).map_err(core_err)?,
    })
}

#[pyfunction]
fn rel_rmse_unobserved(
    result: &PyCompletionResult,
    truth: &PyGroundTruth,
    obs: &PyObservedMatrix,
) -> PyResult<f64> {
    r2rils::metrics::rel_rmse_unobserved(&result.inner, &truth.inner, &obs.inner).map_err(core_err)
}

#[pyfunction]
fn rel_frobenius_full(result: &PyCompletionResult, truth: &PyGroundTruth) -> PyResult<f64> {
    r2rils::metrics::rel_frobenius_full(&result.inner, &truth.inner).map_err(core_err)
}

#[pyfunction]
fn is_success(rel_rmse: f64) -> bool {
    r2rils::metrics::is_success(rel_rmse)
}

#[pyfunction]
fn read_triplets(path: std::path::PathBuf) -> PyResult<PyObservedMatrix> {
    Ok(PyObservedMatrix {
        inner: r2rils::io::read_triplets(&path).map_err(core_err)?,
    })
}

#[pyfunction]
fn write_triplets(obs: &PyObservedMatrix, path: std::path::PathBuf) -> PyResult<()> {
    r2rils::io::write_triplets(&obs.inner, &path).map_err(core_err)
}

#[pyfunction]
fn contraction_factor(eps: f64, delta: f64) -> PyResult<f64> {
    r2rils::contraction_factor(eps, delta).map_err(core_err)
}

#[pyfunction]
fn contraction_bound() -> f64 {
    r2rils::rank1::contraction_bound()
}

#[pymodule]
fn r2rils_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObservedMatrix>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyCompletionResult>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(generate_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(generate_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(sample_omega, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fixed_count, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(rel_rmse_unobserved, m)?)?;
    m.add_function(wrap_pyfunction!(rel_frobenius_full, m)?)?;
    m.add_function(wrap_pyfunction!(is_success, m)?)?;
    m.add_function(wrap_pyfunction!(read_triplets, m)?)?;
    m.add_function(wrap_pyfunction!(write_triplets, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_factor, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_bound, m)?)?;
    m.add("SUCCESS_THRESHOLD", r2rils::metrics::SUCCESS_THRESHOLD)?;
    Ok(())
}
