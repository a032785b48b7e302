//! Python bindings. Matrices cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use toepcomp::cli::{exit_code, EXIT_SOLVER, EXIT_USAGE};
use toepcomp::oracle::{EntryDist, GenSpec};
use toepcomp::problem::instance_from_mask;
use toepcomp::{
    Atom, AtomicMeasure, CertifyTols, CompletionInstance, CompletionResult, Error, ObservedEntry,
    SilpOptions, SymToeplitz, Toeplitz,
};

create_exception!(toepcomp, CertificationError, PyException);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match exit_code(&e) {
        EXIT_USAGE => PyValueError::new_err(msg),
        EXIT_SOLVER => PyRuntimeError::new_err(msg),
        _ => CertificationError::new_err(msg),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn measure(atoms: Vec<(f64, f64)>) -> PyResult<AtomicMeasure> {
    AtomicMeasure::new(atoms.into_iter().map(|(t, w)| Atom { t, w }), 0.0).map_err(to_py)
}

/// Linear constraints `B x = d` on the first row of a symmetric Toeplitz matrix.
#[pyclass(name = "Instance", module = "toepcomp", frozen)]
struct PyInstance {
    inner: CompletionInstance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(b: Vec<Vec<f64>>, d: Vec<f64>) -> PyResult<Self> {
        let b = matrix_from_rows(&b)?;
        Ok(Self {
            inner: CompletionInstance::new(b, d).map_err(to_py)?,
        })
    }

    /// Observed entries as 1-based `(row, col, value)` triples.
    #[staticmethod]
    fn from_mask(n: usize, entries: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let entries: Vec<ObservedEntry> = entries
            .into_iter()
            .map(|(row, col, value)| ObservedEntry { row, col, value })
            .collect();
        Ok(Self {
            inner: instance_from_mask(n, &entries).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CompletionInstance::from_json_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n_min, n_max, m_min, m_max, seed, count, index, dist = "gaussian"))]
    #[allow(clippy::too_many_arguments)]
    fn random(
        n_min: usize,
        n_max: usize,
        m_min: usize,
        m_max: usize,
        seed: u64,
        count: usize,
        index: usize,
        dist: &str,
    ) -> PyResult<Self> {
        let mut g = GenSpec::new((n_min, n_max), (m_min, m_max), seed, count);
        g.dist = match dist {
            "gaussian" => EntryDist::Gaussian,
            "uniform" => EntryDist::Uniform,
            other => return Err(PyValueError::new_err(format!("unknown dist {other:?}"))),
        };
        Ok(Self {
            inner: toepcomp::random_instance(&g, index).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        rows_from_matrix(self.inner.b())
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.inner.d().to_vec()
    }

    fn residual(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.n() {
            return Err(PyValueError::new_err("x has the wrong length"));
        }
        Ok(self.inner.residual_inf(&x))
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

#[pyclass(name = "CompletionResult", module = "toepcomp", frozen)]
struct PyResult_ {
    inner: CompletionResult,
}

#[pymethods]
impl PyResult_ {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CompletionResult::from_json_str(text).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    #[getter]
    fn rank_bound(&self) -> usize {
        self.inner.rank_bound
    }

    #[getter]
    fn predicted_rank(&self) -> usize {
        self.inner.predicted_rank
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn support_size(&self) -> usize {
        self.inner.diagnostics.support_size
    }

    /// Upper-side atoms as `(t, w)` pairs.
    #[getter]
    fn atoms1(&self) -> Vec<(f64, f64)> {
        self.inner.atoms1.iter().map(|a| (a.t, a.w)).collect()
    }

    #[getter]
    fn atoms2(&self) -> Vec<(f64, f64)> {
        self.inner.atoms2.iter().map(|a| (a.t, a.w)).collect()
    }

    /// Dense `T(x)`.
    fn toeplitz(&self) -> Vec<Vec<f64>> {
        rows_from_matrix(&self.inner.toeplitz().to_dense())
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "CompletionResult(n={}, m={}, rank={}, bound={})",
            self.inner.n, self.inner.m, self.inner.rank, self.inner.rank_bound
        )
    }
}

/// Solves and certifies; raises `CertificationError` if a check fails.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (inst, *, tol_lp = None, tol_rank = None, feas_tol = None, merge_tol = None, grid = None, max_iters = None))]
fn complete(
    py: Python<'_>,
    inst: &PyInstance,
    tol_lp: Option<f64>,
    tol_rank: Option<f64>,
    feas_tol: Option<f64>,
    merge_tol: Option<f64>,
    grid: Option<usize>,
    max_iters: Option<usize>,
) -> PyResult<PyResult_> {
    let mut o = SilpOptions::default();
    let mut c = CertifyTols::default();
    if let Some(v) = tol_lp {
        o.price_tol = v;
    }
    if let Some(v) = tol_rank {
        c.rank_tol = v;
    }
    if let Some(v) = feas_tol {
        o.feas_tol_rel = v;
        c.feas_tol_rel = v;
    }
    if let Some(v) = merge_tol {
        o.merge_tol = v;
    }
    if let Some(v) = grid {
        o.coarse_grid = v;
    }
    if let Some(v) = max_iters {
        o.max_iters = v;
    }
    let inner = py
        .detach(|| toepcomp::complete(&inst.inner, &o, &c))
        .map_err(to_py)?;
    Ok(PyResult_ { inner })
}

/// Independent re-check; returns `(name, passed, measured, limit)` tuples.
#[pyfunction]
fn verify(inst: &PyInstance, result: &PyResult_) -> Vec<(String, bool, f64, f64)> {
    toepcomp::verify_result(&inst.inner, &result.inner, &CertifyTols::default())
        .checks
        .into_iter()
        .map(|c| (c.name, c.passed, c.measured, c.limit))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (matrix, tol = 1e-7))]
fn numerical_rank(matrix: Vec<Vec<f64>>, tol: f64) -> PyResult<usize> {
    toepcomp::toeplitz::numerical_rank(&matrix_from_rows(&matrix)?, tol).map_err(to_py)
}

#[pyfunction]
fn min_eigenvalue(matrix: Vec<Vec<f64>>) -> PyResult<f64> {
    toepcomp::toeplitz::min_eigenvalue(&matrix_from_rows(&matrix)?).map_err(to_py)
}

/// Dense symmetric Toeplitz matrix with first row `x`.
#[pyfunction]
fn toeplitz(x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows_from_matrix(&SymToeplitz::new(x).map_err(to_py)?.to_dense()))
}

/// First row of the moment Toeplitz matrix of `sum w delta_t`.
#[pyfunction]
fn moments_from_measure(atoms: Vec<(f64, f64)>, n: usize) -> PyResult<Vec<f64>> {
    let mu = measure(atoms)?;
    Ok(toepcomp::toeplitz::moments_from_measure(&mu, n)
        .map_err(to_py)?
        .into_first_row())
}

#[pyfunction]
fn chebyshev_coeff_matrix(n: usize) -> Vec<Vec<f64>> {
    rows_from_matrix(&toepcomp::trigpoly::chebyshev_coeff_matrix(n))
}

/// `min c'z` s.t. `A z = b`, `z >= 0`; returns `(z, y, objective)`.
#[pyfunction]
fn solve_finite_lp(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let s = toepcomp::lp::solve_finite_lp(&matrix_from_rows(&a)?, &b, &c).map_err(to_py)?;
    Ok((s.z, s.y, s.objective))
}

#[pymodule(name = "toepcomp")]
fn toepcomp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyResult_>()?;
    m.add("CertificationError", m.py().get_type::<CertificationError>())?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(numerical_rank, m)?)?;
    m.add_function(wrap_pyfunction!(min_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz, m)?)?;
    m.add_function(wrap_pyfunction!(moments_from_measure, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_coeff_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(solve_finite_lp, m)?)?;
    Ok(())
}
