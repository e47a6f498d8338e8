use std::sync::Arc;

use nalgebra::DVector;

use super::forms::{apply_operator, form_matrix, kernel_for, AssembledForms, Extension};
use super::grid::{RadialField, RadialGrid};
use crate::error::{Error, Result};
use crate::specfun::{self, ProblemParams};

/// Maximum relative deviation of the discrete `(−Δ)^{α/2} r^{−β}` from
/// `Ψ(β) r^{−α−β}` over the middle half of the grid, with the power law
/// continued analytically on both sides of the grid.
pub fn power_law_residual(grid: &RadialGrid, params: &ProblemParams, beta: f64) -> Result<f64> {
    let (n, alpha) = (params.n(), params.alpha());
    if !(beta > 0.0 && beta < n - alpha) {
        return Err(Error::domain(format!("need 0 < beta < n - alpha = {}, got {beta}", n - alpha)));
    }
    let kernel = kernel_for(grid, alpha)?;
    let u: Vec<f64> = grid.nodes().iter().map(|r| r.powf(-beta)).collect();
    let au = apply_operator(grid, &kernel, &u, &Extension::power_law(beta))?;
    let target = specfun::psi(n, alpha, beta)?;
    let window = grid.window(0.25, 0.75);
    let worst = window
        .map(|k| {
            let want = target * grid.nodes()[k].powf(-alpha - beta);
            ((au[k] - want) / want).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// The three terms of the ground-state representation of `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateTerms {
    /// `⟨u, u⟩`.
    pub form: f64,
    /// `∫ u²/|x|^α`.
    pub hardy: f64,
    /// `(C/2)∬ (v(x)−v(y))² |x|^{−β}|y|^{−β}/|x−y|^{n+α}` with `v = |x|^β u`.
    pub weighted: f64,
}

/// Evaluate both sides of `⟨u,u⟩ = Ψ(β)∫u²/|x|^α + weighted form of |x|^β u`.
pub fn ground_state_terms(grid: &RadialGrid, params: &ProblemParams, beta: f64, u: &RadialField) -> Result<GroundStateTerms> {
    let (n, alpha) = (params.n(), params.alpha());
    if !(beta >= 0.0 && beta < 0.5 * (n - alpha)) {
        return Err(Error::domain(format!("need 0 <= beta < (n - alpha)/2, got {beta}")));
    }
    if u.values().len() != grid.len() {
        return Err(Error::Configuration("field does not live on the grid".into()));
    }
    let kernel = kernel_for(grid, alpha)?;
    let a = params.scaling_exponent();
    let uv = DVector::from_column_slice(u.values());
    let g = form_matrix(grid, &kernel, a);
    let form = (&g * &uv).dot(&uv);
    let sn = specfun::sphere_area(n);
    let hardy: f64 =
        grid.nodes().iter().zip(u.values()).map(|(r, v)| sn * grid.h() * r.powf(n - alpha) * v * v).sum();
    let v = DVector::from_iterator(grid.len(), grid.nodes().iter().zip(u.values()).map(|(r, x)| r.powf(beta) * x));
    let gw = form_matrix(grid, &kernel, a - beta);
    let weighted = (&gw * &v).dot(&v);
    Ok(GroundStateTerms { form, hardy, weighted })
}

/// Relative gap `|⟨u,u⟩ − Ψ(β)∫u²/|x|^α − weighted| / ⟨u,u⟩`.
pub fn ground_state_identity_gap(grid: &RadialGrid, params: &ProblemParams, beta: f64, u: &RadialField) -> Result<f64> {
    let t = ground_state_terms(grid, params, beta, u)?;
    let psi = if beta == 0.0 { 0.0 } else { params.psi(beta)? };
    Ok((t.form - psi * t.hardy - t.weighted).abs() / t.form.abs())
}

fn check_cutoff(eta: &RadialField) -> Result<()> {
    if let Some(v) = eta.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("cutoff values must lie in [0, 1], found {v}")));
    }
    Ok(())
}

/// `B_η(φ, ψ) = ⟨ηφ, ψ⟩ − ⟨φ, ηψ⟩` through the assembled form.
pub fn b_eta_form(forms: &AssembledForms, eta: &RadialField, phi: &RadialField, psi_f: &RadialField) -> Result<f64> {
    check_cutoff(eta)?;
    let e = eta.values();
    let ephi: Vec<f64> = e.iter().zip(phi.values()).map(|(a, b)| a * b).collect();
    let epsi: Vec<f64> = e.iter().zip(psi_f.values()).map(|(a, b)| a * b).collect();
    Ok(forms.inner(&ephi, psi_f.values()) - forms.inner(phi.values(), &epsi))
}

/// `(C/2)∬ (η(x)−η(y))(φ(y)ψ(x) − φ(x)ψ(y))/|x−y|^{n+α}` as a pairwise lattice sum.
pub fn b_eta_double_integral(
    forms: &AssembledForms,
    eta: &RadialField,
    phi: &RadialField,
    psi_f: &RadialField,
) -> Result<f64> {
    check_cutoff(eta)?;
    pair_sum(forms, |k, j| {
        let (e, p, q) = (eta.values(), phi.values(), psi_f.values());
        (e[k] - e[j]) * (p[j] * q[k] - p[k] * q[j])
    })
}

/// `(C/2)∬ (η(x)−η(y))² φ(x)φ(y)/|x−y|^{n+α}` as a pairwise lattice sum.
pub fn cutoff_cross_energy(forms: &AssembledForms, eta: &RadialField, phi: &RadialField) -> Result<f64> {
    check_cutoff(eta)?;
    pair_sum(forms, |k, j| {
        let (e, p) = (eta.values(), phi.values());
        (e[k] - e[j]).powi(2) * p[k] * p[j]
    })
}

// Σ over unordered in-grid pairs with the same weights as the assembled form;
// exterior nodes carry zero and drop out of every antisymmetric combination.
fn pair_sum(forms: &AssembledForms, f: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let grid = forms.grid();
    let kernel = forms.kernel();
    let params = forms.params();
    let (h, len) = (grid.h(), grid.len());
    let a = params.scaling_exponent();
    let pref = specfun::sphere_area(params.n()) * params.c_n_alpha();
    let t: Vec<f64> = (0..len as i64).map(|k| grid.log_node(k)).collect();
    let mut acc = 0.0;
    for k in 0..len {
        for j in (k + 1)..len {
            acc += pref * h * h * (a * (t[k] + t[j])).exp() * kernel.get(j - k) * f(k, j);
        }
    }
    let corr = pref * kernel.omega() * h.powf(1.0 - params.alpha());
    for (k, tk) in t.iter().enumerate().take(len - 1) {
        acc += corr * (2.0 * a * (tk + 0.5 * h)).exp() * f(k, k + 1);
    }
    Ok(acc)
}

/// Fractional Kelvin transform `w(r) = r^{α−n} u(1/r)` on the reflected grid.
pub fn kelvin_transform(u: &RadialField, params: &ProblemParams) -> Result<RadialField> {
    let grid = Arc::new(u.grid().reflected());
    let len = grid.len();
    let power = params.alpha() - params.n();
    let values = grid.nodes().iter().enumerate().map(|(i, r)| r.powf(power) * u.values()[len - 1 - i]).collect();
    RadialField::new(grid, values)
}
