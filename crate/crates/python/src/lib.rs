//! Python bindings for fracwave-core.

use fracwave_core::cli::config::load_scenario;
use fracwave_core::cli::run_scenario as run_core_scenario;
use fracwave_core::direct::{self, Field as CoreField, ProblemSpec};
use fracwave_core::fracops::{self, FracOrder, TimeGrid, TimeSeries};
use fracwave_core::inverse::{self, Ip1Data, Ip2Data};
use fracwave_core::spectral::{eigenpairs, Operator1d, OperatorSpec};
use fracwave_core::{mlf, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

fn err(e: Error) -> PyErr {
    match e {
        Error::Convergence(_) | Error::Resolution(_) | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid(t_final: f64, steps: usize) -> PyResult<TimeGrid> {
    TimeGrid::new(t_final, steps).map_err(err)
}

fn series(t_final: f64, values: Vec<f64>) -> PyResult<TimeSeries> {
    if values.len() < 2 {
        return Err(PyValueError::new_err("need at least two time samples"));
    }
    TimeSeries::new(grid(t_final, values.len() - 1)?, values).map_err(err)
}

/// Interval problem on (0, length) with -u'' as the spatial operator.
struct Setup {
    spec: ProblemSpec,
}

impl Setup {
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha: f64,
        t_final: f64,
        steps: usize,
        modes: usize,
        points: usize,
        length: f64,
        phi: Option<Vec<f64>>,
        psi: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let zeros = || vec![0.0; points + 1];
        Ok(Self {
            spec: ProblemSpec {
                order: FracOrder::new(alpha).map_err(err)?,
                grid: grid(t_final, steps)?,
                op: OperatorSpec::Interval(Operator1d::laplacian(length)),
                n_modes: modes,
                points,
                phi: phi.unwrap_or_else(zeros),
                psi: psi.unwrap_or_else(zeros),
                f: None,
                h: None,
            },
        })
    }
}

/// E_{α,β}(z) for real z.
#[pyfunction]
fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> PyResult<f64> {
    mlf::mittag_leffler(alpha, beta, z).map_err(err)
}

/// Riemann-Liouville integral of order mu in (0, 1) of uniform samples on [0, t_final].
#[pyfunction]
#[pyo3(signature = (values, mu, t_final = 1.0))]
fn rl_integral(values: Vec<f64>, mu: f64, t_final: f64) -> PyResult<Vec<f64>> {
    Ok(fracops::rl_integral(&series(t_final, values)?, mu)
        .map_err(err)?
        .into_values())
}

/// Caputo derivative of order alpha in (1, 2) of uniform samples on [0, t_final].
#[pyfunction]
#[pyo3(signature = (values, alpha, t_final = 1.0))]
fn caputo_derivative(values: Vec<f64>, alpha: f64, t_final: f64) -> PyResult<Vec<f64>> {
    let order = FracOrder::new(alpha).map_err(err)?;
    Ok(fracops::caputo_deriv_high(&series(t_final, values)?, order)
        .map_err(err)?
        .into_values())
}

/// Dirichlet eigenvalues of -u'' on (0, length) and the sample points of the basis.
#[pyfunction]
#[pyo3(signature = (modes, points, length = 1.0))]
fn eigenvalues(modes: usize, points: usize, length: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let b = eigenpairs(
        &OperatorSpec::Interval(Operator1d::laplacian(length)),
        modes,
        points,
    )
    .map_err(err)?;
    let x = (0..b.n_points()).map(|k| b.grid().point(k).0).collect();
    Ok((b.lambdas().to_vec(), x))
}

#[pyclass(name = "Field", frozen)]
struct PyField {
    inner: CoreField,
}

#[pymethods]
impl PyField {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.grid().nodes()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        let g = self.inner.basis().grid();
        (0..g.len()).map(|k| g.point(k).0).collect()
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.basis().lambdas().to_vec()
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    /// u(t_i, ·) on the spatial grid.
    fn u(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check_step(i)?;
        Ok(self.inner.u_at(i))
    }

    /// u_t(t_i, ·) on the spatial grid.
    fn ut(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check_step(i)?;
        Ok(self.inner.ut_at(i))
    }

    /// Coefficient u_n(t) of mode n (0-based) at every time node.
    fn modal(&self, n: usize) -> PyResult<Vec<f64>> {
        if n >= self.inner.n_modes() {
            return Err(PyValueError::new_err(format!("mode {n} out of range")));
        }
        Ok(self.inner.modal(n).to_vec())
    }

    /// g(t) = ∫ h u dx.
    fn observe_g(&self, h: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(direct::observe_g(&self.inner, &h)
            .map_err(err)?
            .into_values())
    }

    /// ω(x) = ∫ f u_t dt.
    fn observe_omega(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = TimeSeries::new(*self.inner.grid(), f).map_err(err)?;
        direct::observe_omega(&self.inner, &f).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(alpha={}, steps={}, modes={}, points={})",
            self.inner.order().alpha(),
            self.inner.grid().steps(),
            self.inner.n_modes(),
            self.inner.basis().n_points()
        )
    }
}

impl PyField {
    fn check_step(&self, i: usize) -> PyResult<()> {
        if i > self.inner.grid().steps() {
            return Err(PyValueError::new_err(format!(
                "time index {i} out of range"
            )));
        }
        Ok(())
    }
}

/// Solve the direct problem; spatial arrays have points + 1 samples, f has steps + 1.
#[pyfunction]
#[pyo3(signature = (alpha, f, h, modes, points, phi = None, psi = None, t_final = 1.0, length = 1.0))]
#[allow(clippy::too_many_arguments)]
fn solve_direct(
    py: Python<'_>,
    alpha: f64,
    f: Vec<f64>,
    h: Vec<f64>,
    modes: usize,
    points: usize,
    phi: Option<Vec<f64>>,
    psi: Option<Vec<f64>>,
    t_final: f64,
    length: f64,
) -> PyResult<PyField> {
    let steps = f.len().saturating_sub(1);
    let mut s = Setup::new(alpha, t_final, steps, modes, points, length, phi, psi)?;
    s.spec.f = Some(series(t_final, f)?);
    s.spec.h = Some(h);
    let inner = py.detach(|| direct::direct_solve(&s.spec)).map_err(err)?;
    Ok(PyField { inner })
}

/// Recover f(t) from g(t) = ∫ h u dx. Returns (f, diagnostics).
#[pyfunction]
#[pyo3(signature = (alpha, g, h, modes, points, phi = None, psi = None, t_final = 1.0, length = 1.0, tol_compat = None))]
#[allow(clippy::too_many_arguments)]
fn solve_ip1<'py>(
    py: Python<'py>,
    alpha: f64,
    g: Vec<f64>,
    h: Vec<f64>,
    modes: usize,
    points: usize,
    phi: Option<Vec<f64>>,
    psi: Option<Vec<f64>>,
    t_final: f64,
    length: f64,
    tol_compat: Option<f64>,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let steps = g.len().saturating_sub(1);
    let mut s = Setup::new(alpha, t_final, steps, modes, points, length, phi, psi)?;
    s.spec.h = Some(h);
    let d = Ip1Data {
        g: series(t_final, g)?,
        spec: s.spec,
        tol_compat,
    };
    let (f, diag) = py.detach(|| inverse::ip1_solve(&d)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("compat_residual", diag.compat_residual)?;
    out.set_item("tail_bound", diag.tail_bound)?;
    out.set_item("hnorm2", diag.hnorm2)?;
    out.set_item("forward_residual", diag.forward_residual)?;
    out.set_item("g_sup", diag.g_sup)?;
    Ok((f.into_values(), out))
}

/// Recover h(x) from ω(x) = ∫ f u_t dt. Returns (h, diagnostics).
#[pyfunction]
#[pyo3(signature = (alpha, omega, f, modes, points, phi = None, psi = None, t_final = 1.0, length = 1.0))]
#[allow(clippy::too_many_arguments)]
fn solve_ip2<'py>(
    py: Python<'py>,
    alpha: f64,
    omega: Vec<f64>,
    f: Vec<f64>,
    modes: usize,
    points: usize,
    phi: Option<Vec<f64>>,
    psi: Option<Vec<f64>>,
    t_final: f64,
    length: f64,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let steps = f.len().saturating_sub(1);
    let mut s = Setup::new(alpha, t_final, steps, modes, points, length, phi, psi)?;
    s.spec.f = Some(series(t_final, f)?);
    let d = Ip2Data {
        spec: s.spec,
        omega,
    };
    let (h, diag) = py.detach(|| inverse::ip2_solve(&d)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("sensitivity", diag.sensitivity)?;
    out.set_item("coeffs", diag.coeffs)?;
    out.set_item("excluded", diag.excluded)?;
    out.set_item("threshold", diag.threshold)?;
    Ok((h, out))
}

/// Run a scenario file like the command-line tool. Returns (exit code, report dict).
#[pyfunction]
#[pyo3(signature = (config, out, task = None, overrides = Vec::new()))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: PathBuf,
    out: PathBuf,
    task: Option<String>,
    overrides: Vec<String>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let mut sets = overrides;
    if let Some(t) = task {
        sets.push(format!("task={t}"));
    }
    let sc = load_scenario(&config, &sets).map_err(err)?;
    let (rep, code) = py.detach(|| run_core_scenario(&sc, &out));
    let text = serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let report = py.import("json")?.call_method1("loads", (text,))?;
    Ok((code, report))
}

#[pymodule]
pub fn fracwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(rl_integral, m)?)?;
    m.add_function(wrap_pyfunction!(caputo_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(solve_direct, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ip1, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ip2, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
