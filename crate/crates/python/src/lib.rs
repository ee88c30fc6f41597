//! Python bindings for `hbvm`.

use hbvm::legendre::{eval_legendre, LobattoRule};
use hbvm::{ButcherTableau, CanonicalSystem, HbvmError, SolverMode, SolverOptions};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: HbvmError) -> PyErr {
    if e.is_solver_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn solver_options(solver: Option<&str>, tol: f64, max_iter: usize, problem: &str) -> PyResult<SolverOptions> {
    let mode = match solver {
        Some("fixed-point") => SolverMode::FixedPoint,
        Some("newton") => SolverMode::NewtonLike,
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "unknown solver '{other}' (expected 'fixed-point' or 'newton')"
            )))
        }
        None if problem == "fpu" => SolverMode::NewtonLike,
        None => SolverMode::FixedPoint,
    };
    let opts = SolverOptions { mode, tolerance: tol, max_iterations: max_iter };
    opts.validate().map_err(to_py)?;
    Ok(opts)
}

/// Butcher tableau of an HBVM(k,s) method.
#[pyclass(name = "Tableau", frozen)]
struct PyTableau {
    inner: ButcherTableau,
}

#[pymethods]
impl PyTableau {
    #[new]
    fn new(k: usize, s: usize) -> PyResult<Self> {
        Ok(Self { inner: ButcherTableau::hbvm(k, s).map_err(to_py)? })
    }

    /// The Lobatto IIIA collocation tableau on s+1 nodes.
    #[staticmethod]
    fn lobatto_iiia(s: usize) -> PyResult<Self> {
        Ok(Self { inner: ButcherTableau::lobatto_iiia(s).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ButcherTableau::from_json(text).map_err(to_py)? })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn s(&self) -> usize {
        self.inner.s()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Row-major coefficient matrix.
    #[getter]
    fn coeffs(&self) -> Vec<Vec<f64>> {
        let c = self.inner.coeffs();
        c.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn symmetry_residual(&self) -> f64 {
        self.inner.symmetry_residual()
    }

    /// `(B, C, D)` simplifying-assumption orders.
    fn simplifying_conditions(&self) -> (usize, usize, usize) {
        let o = self.inner.simplifying_conditions();
        (o.b_order, o.c_order, o.d_order)
    }

    fn stability(&self, z: Complex64) -> PyResult<Complex64> {
        self.inner.stability_function(z).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!("Tableau(k={}, s={})", self.inner.k(), self.inner.s())
    }
}

/// One of the packaged Hamiltonian problems: "fhp", "fpu", "biot" or "harmonic".
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: Box<dyn CanonicalSystem>,
}

#[pymethods]
impl PyProblem {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self { inner: hbvm::problem_by_name(name).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.inner.initial_state()
    }

    fn energy(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.energy(&y).map_err(to_py)
    }

    fn gradient(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&y).map_err(to_py)
    }

    fn vector_field(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.vector_field(&y).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Problem('{}')", self.inner.name())
    }
}

/// Nodes and weights of the (k+1)-point Gauss-Lobatto rule on [0, 1].
#[pyfunction]
fn lobatto_rule(k: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rule = LobattoRule::new(k).map_err(to_py)?;
    Ok((rule.nodes().to_vec(), rule.weights().to_vec()))
}

/// Shifted Legendre polynomial `P_n(x)` on [0, 1].
#[pyfunction]
fn legendre(n: usize, x: f64) -> f64 {
    eval_legendre(n, x)
}

#[pyfunction]
#[pyo3(signature = (tableau, problem, h, steps, y0=None, solver=None, tol=1e-13, max_iter=100))]
#[allow(clippy::too_many_arguments)]
fn integrate<'py>(
    py: Python<'py>,
    tableau: &PyTableau,
    problem: &PyProblem,
    h: f64,
    steps: usize,
    y0: Option<Vec<f64>>,
    solver: Option<&str>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = solver_options(solver, tol, max_iter, problem.inner.name())?;
    let y0 = y0.unwrap_or_else(|| problem.inner.initial_state());
    let (tab, sys) = (&tableau.inner, problem.inner.as_ref());
    let traj = py.detach(|| hbvm::integrate(tab, sys, &y0, h, steps, &opts)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("times", traj.times)?;
    out.set_item("states", traj.states)?;
    out.set_item("energy_error", traj.energy_error)?;
    out.set_item("iterations", traj.solver_iterations)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (tableau, problem, h0, levels, t_end, y0=None, solver=None, tol=1e-13, max_iter=100))]
#[allow(clippy::too_many_arguments)]
fn convergence_study<'py>(
    py: Python<'py>,
    tableau: &PyTableau,
    problem: &PyProblem,
    h0: f64,
    levels: usize,
    t_end: f64,
    y0: Option<Vec<f64>>,
    solver: Option<&str>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = solver_options(solver, tol, max_iter, problem.inner.name())?;
    let y0 = y0.unwrap_or_else(|| problem.inner.initial_state());
    let (tab, sys) = (&tableau.inner, problem.inner.as_ref());
    let rep = py
        .detach(|| hbvm::convergence_study(tab, sys, &y0, h0, levels, t_end, &opts))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("stepsizes", rep.stepsizes)?;
    out.set_item("errors", rep.errors)?;
    out.set_item("orders", rep.orders)?;
    out.set_item("t_end", rep.t_end)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (tableau, problem, h, steps, y0=None, solver=None, tol=1e-13, max_iter=100))]
#[allow(clippy::too_many_arguments)]
fn drift_experiment<'py>(
    py: Python<'py>,
    tableau: &PyTableau,
    problem: &PyProblem,
    h: f64,
    steps: usize,
    y0: Option<Vec<f64>>,
    solver: Option<&str>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = solver_options(solver, tol, max_iter, problem.inner.name())?;
    let y0 = y0.unwrap_or_else(|| problem.inner.initial_state());
    let (tab, sys) = (&tableau.inner, problem.inner.as_ref());
    let rep = py.detach(|| hbvm::drift_experiment(tab, sys, &y0, h, steps, &opts)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("times", rep.times)?;
    out.set_item("deviation", rep.deviation)?;
    out.set_item("slope", rep.slope)?;
    out.set_item("max_abs_deviation", rep.max_abs_deviation)?;
    Ok(out)
}

#[pymodule]
fn hbvm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTableau>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(lobatto_rule, m)?)?;
    m.add_function(wrap_pyfunction!(legendre, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(drift_experiment, m)?)?;
    Ok(())
}
