//! Python bindings: closed-form constants, eigenvalue, minimizer and mass on
//! log-uniform ball grids.

use std::sync::Arc;

use frachs::extremal::{cutoff, lambda_1 as first_eigenvalue, minimize_mu, MinimizeOptions};
use frachs::mass::{compute_mass, mass_criterion, MassFitOptions};
use frachs::radialops::{assemble, power_law_residual as residual};
use frachs::{specfun, AssembledForms, Error, ProblemParams, RadialGrid};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(m) => PyArithmeticError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn ball(params: &ProblemParams, count: usize, r_min: f64, r_max: f64) -> PyResult<AssembledForms> {
    let grid = Arc::new(RadialGrid::new(params.n(), r_min, r_max, count).map_err(py_err)?);
    assemble(grid, params).map_err(py_err)
}

#[pyfunction]
fn hardy_constant(n: f64, alpha: f64) -> PyResult<f64> {
    specfun::hardy_constant(n, alpha).map_err(py_err)
}

#[pyfunction]
fn psi(n: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    specfun::psi(n, alpha, beta).map_err(py_err)
}

/// `(beta_minus, beta_plus)`.
#[pyfunction]
fn beta_pm(n: f64, alpha: f64, gamma: f64) -> PyResult<(f64, f64)> {
    specfun::beta_pm(n, alpha, gamma).map_err(py_err)
}

#[pyfunction]
fn gamma_crit(n: f64, alpha: f64) -> PyResult<f64> {
    specfun::gamma_crit(n, alpha).map_err(py_err)
}

#[pyfunction]
fn crit_exponent(n: f64, alpha: f64, s: f64) -> PyResult<f64> {
    specfun::crit_exponent(n, alpha, s).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (n, alpha, beta, count=400, r_min=1e-6, r_max=1.0))]
fn power_law_residual(n: f64, alpha: f64, beta: f64, count: usize, r_min: f64, r_max: f64) -> PyResult<f64> {
    let p = ProblemParams::new(n, alpha, 0.0, 0.0, 0.0).map_err(py_err)?;
    let grid = RadialGrid::new(n, r_min, r_max, count).map_err(py_err)?;
    residual(&grid, &p, beta).map_err(py_err)
}

/// First Dirichlet eigenvalue of `(−Δ)^{α/2} − γ/|x|^α` on the ball.
#[pyfunction]
#[pyo3(signature = (n, alpha, gamma, count=400, r_min=1e-6, r_max=1.0))]
fn lambda_1(n: f64, alpha: f64, gamma: f64, count: usize, r_min: f64, r_max: f64) -> PyResult<f64> {
    let p = ProblemParams::new(n, alpha, 0.0, gamma, 0.0).map_err(py_err)?;
    let forms = ball(&p, count, r_min, r_max)?;
    Ok(first_eigenvalue(&forms, &p).map_err(py_err)?.0)
}

/// Minimize the Hardy-Sobolev quotient on the ball; returns a dict with
/// `mu`, `kappa`, `r`, `u` and the fitted exponents.
#[pyfunction]
#[pyo3(signature = (n, alpha, s, gamma, lam=0.0, count=400, r_min=1e-6, r_max=1.0))]
#[allow(clippy::too_many_arguments)]
fn minimize<'py>(
    py: Python<'py>,
    n: f64,
    alpha: f64,
    s: f64,
    gamma: f64,
    lam: f64,
    count: usize,
    r_min: f64,
    r_max: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = ProblemParams::new(n, alpha, s, gamma, lam).map_err(py_err)?;
    let forms = ball(&p, count, r_min, r_max)?;
    let res = py.detach(|| minimize_mu(&forms, &p, None, &MinimizeOptions::default())).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mu", res.mu)?;
    d.set_item("kappa", res.kappa)?;
    d.set_item("r", forms.grid().nodes().to_vec())?;
    d.set_item("u", res.field.values().to_vec())?;
    d.set_item("fitted_beta0", res.fitted_beta0)?;
    d.set_item("fitted_betainf", res.fitted_betainf)?;
    d.set_item("iterations", res.iterations)?;
    Ok(d)
}

/// Mass of the ball at `λ = lambda_fraction·λ₁`; returns a dict with `mass`,
/// `uncertainty`, `trusted`, `lambda_1` and the verdict string.
#[pyfunction]
#[pyo3(signature = (n, alpha, s, gamma, lambda_fraction, count=400, r_min=1e-6, r_max=1.0, cutoff_fraction=0.25))]
#[allow(clippy::too_many_arguments)]
fn mass<'py>(
    py: Python<'py>,
    n: f64,
    alpha: f64,
    s: f64,
    gamma: f64,
    lambda_fraction: f64,
    count: usize,
    r_min: f64,
    r_max: f64,
    cutoff_fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = ProblemParams::new(n, alpha, s, gamma, 0.0).map_err(py_err)?;
    let forms = ball(&p, count, r_min, r_max)?;
    let (l1, _) = first_eigenvalue(&forms, &p).map_err(py_err)?;
    let q = p.with_lambda(lambda_fraction * l1).map_err(py_err)?;
    let eta = cutoff(forms.grid(), cutoff_fraction * r_max).map_err(py_err)?;
    let res = compute_mass(&forms, &q, &eta, &MassFitOptions::default()).map_err(py_err)?;
    let crit = mass_criterion(&q, &res).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mass", res.mass)?;
    d.set_item("uncertainty", res.uncertainty)?;
    d.set_item("trusted", res.trusted())?;
    d.set_item("lambda_1", l1)?;
    d.set_item("verdict", crit.verdict.as_str())?;
    Ok(d)
}

#[pymodule]
fn pyfrachs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hardy_constant, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(beta_pm, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_crit, m)?)?;
    m.add_function(wrap_pyfunction!(crit_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(power_law_residual, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_1, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(mass, m)?)?;
    Ok(())
}
