//! The singular profile `H = η r^{−β+} + g`, its mass (the coefficient of
//! `r^{−β−}` in `g`), and the mass-based existence criterion.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{bubble, lambda_1, rayleigh_quotient, ExistenceVerdict, FitWindows};
use crate::radialops::{AssembledForms, Extension, KernelTable, PowerLaw, RadialField, RadialGrid};
use crate::specfun::{bisect_increasing, ProblemParams};

/// Roots of the lattice symbol `Ψ_h(β) = γ`.
///
/// On a lattice the pure power laws `r^{−β}` solving the discrete equation are
/// those of `Ψ_h`, not of `Ψ`; using them keeps the corrector free of a
/// spurious resonant `r^{−β+}` component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteExponents {
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl DiscreteExponents {
    pub fn gap(&self) -> f64 {
        self.beta_plus - self.beta_minus
    }
}

pub fn discrete_exponents(kernel: &KernelTable, gamma: f64) -> Result<DiscreteExponents> {
    let a = 0.5 * (kernel.dim() - kernel.alpha());
    let top = kernel.symbol(a);
    if !(gamma >= 0.0 && gamma < top) {
        return Err(Error::domain(format!("gamma = {gamma} is outside [0, {top}) for the lattice symbol")));
    }
    let bm = if gamma == 0.0 { 0.0 } else { bisect_increasing(|b| kernel.symbol(b), gamma, 0.0, a) };
    Ok(DiscreteExponents { beta_minus: bm, beta_plus: 2.0 * a - bm })
}

fn require_critical(params: &ProblemParams) -> Result<()> {
    if !(params.gamma() > params.gamma_crit()) {
        return Err(Error::precondition(format!(
            "the mass needs gamma > gamma_crit = {}, got {}",
            params.gamma_crit(),
            params.gamma()
        )));
    }
    Ok(())
}

fn check_eta(forms: &AssembledForms, eta: &RadialField) -> Result<()> {
    let v = eta.values();
    if v.len() != forms.grid().len() {
        return Err(Error::Configuration("cutoff does not live on the forms' grid".into()));
    }
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain("cutoff values must lie in [0, 1]"));
    }
    if v[0] != 1.0 || v[v.len() - 1] != 0.0 {
        return Err(Error::precondition("cutoff must equal 1 at r_min and 0 at R"));
    }
    Ok(())
}

/// `(A − γ r^{−α} − λ)` applied to grid values continued by `ext`.
fn apply_shifted(forms: &AssembledForms, params: &ProblemParams, values: &[f64], ext: &Extension) -> Result<Vec<f64>> {
    let av = forms.apply_operator(values, ext)?;
    let alpha = params.alpha();
    Ok(forms
        .grid()
        .nodes()
        .iter()
        .zip(values)
        .zip(av)
        .map(|((r, v), a)| a - (params.gamma() * r.powf(-alpha) + params.lambda()) * v)
        .collect())
}

/// `f = −(L − λ)(η r^{−β+})` with `η r^{−β+}` continued as the pure power
/// law into the hole and by zero beyond `R`.
pub fn singular_rhs(forms: &AssembledForms, params: &ProblemParams, eta: &RadialField) -> Result<RadialField> {
    require_critical(params)?;
    check_eta(forms, eta)?;
    let bp = discrete_exponents(forms.kernel(), params.gamma())?.beta_plus;
    let grid = forms.grid();
    let v: Vec<f64> = grid.nodes().iter().zip(eta.values()).map(|(r, e)| e * r.powf(-bp)).collect();
    let ext = Extension { inner: Some(PowerLaw { coef: 1.0, exponent: bp }), outer: None };
    let lv = apply_shifted(forms, params, &v, &ext)?;
    RadialField::new(grid.clone(), lv.into_iter().map(|x| -x).collect())
}

/// Linear solver used for the corrector equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorSolver {
    Cholesky,
    /// Conjugate gradients with a Jacobi preconditioner.
    Pcg,
}

/// Solve `(G − γ·hardy − λ·mass) g = mass ∘ f` with the default solver.
pub fn solve_corrector(forms: &AssembledForms, params: &ProblemParams, f: &RadialField) -> Result<RadialField> {
    solve_corrector_with(forms, params, f, CorrectorSolver::Cholesky, 1e-10)
}

/// As [`solve_corrector`], choosing the solver and (for PCG) the relative residual target.
pub fn solve_corrector_with(
    forms: &AssembledForms,
    params: &ProblemParams,
    f: &RadialField,
    solver: CorrectorSolver,
    rel_tol: f64,
) -> Result<RadialField> {
    let grid = forms.grid();
    if f.values().len() != grid.len() {
        return Err(Error::Configuration("right-hand side does not live on the forms' grid".into()));
    }
    let q = forms.operator_matrix(params.gamma(), params.lambda());
    let b = forms.mass().component_mul(&DVector::from_column_slice(f.values()));
    let chol = Cholesky::new(q.clone());
    if chol.is_none() {
        return Err(Error::precondition(format!(
            "L - lambda is not coercive on this grid at lambda = {}",
            params.lambda()
        )));
    }
    let g = match solver {
        CorrectorSolver::Cholesky => chol.map(|c| c.solve(&b)).unwrap_or(b),
        CorrectorSolver::Pcg => pcg(&q, &b, rel_tol)?,
    };
    RadialField::new(grid.clone(), g.as_slice().to_vec())
}

fn pcg(q: &nalgebra::DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    let len = b.len();
    let dinv = DVector::from_iterator(len, (0..len).map(|k| 1.0 / q[(k, k)]));
    let bnorm = b.norm();
    let mut x = DVector::zeros(len);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z = r.component_mul(&dinv);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let max_iter = 20 * len;
    for _ in 0..max_iter {
        let qp = q * &p;
        let step = rz / p.dot(&qp);
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &qp, 1.0);
        if r.norm() <= rel_tol * bnorm {
            return Ok(x);
        }
        z = r.component_mul(&dinv);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    Err(Error::numerical(format!(
        "conjugate gradients stalled at relative residual {:.3e}",
        r.norm() / bnorm
    )))
}

/// Options for [`fit_mass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassFitOptions {
    /// Fit window as fractions of the log-range.
    pub window: (f64, f64),
    /// Fit the `(r_min/r)^{β+−β−}` term left by the zero-extended hole.
    pub hole_term: bool,
    /// Number of remainder terms: `(r/R)^{α−(β+−β−)}` (driven by `λ r^{−β+}`),
    /// then `(r/R)^{α}`.
    pub remainder_terms: usize,
    /// Largest accepted relative drift of the mass across the nested windows.
    pub max_drift: f64,
    pub min_r2: f64,
}

impl Default for MassFitOptions {
    fn default() -> Self {
        Self { window: (0.2, 0.4), hole_term: true, remainder_terms: 2, max_drift: 0.05, min_r2: 0.99 }
    }
}

/// Mass fitted from a corrector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassFit {
    pub mass: f64,
    /// Larger of the window drift and the least-squares standard error.
    pub uncertainty: f64,
    pub fit_window: Range<usize>,
    /// Coefficient of determination of the model against `g` on the window.
    pub fit_r2: f64,
    /// Largest relative change of the mass over the three nested windows.
    pub drift: f64,
    /// Coefficient of the hole term (zero when not fitted).
    pub hole_coef: f64,
    pub remainder_coef: Vec<f64>,
    pub trusted: bool,
}

struct LinearFit {
    coef: Vec<f64>,
    stderr0: f64,
    r2: f64,
}

/// Least squares for `y ≈ Σ c_j φ_j` on `g = y r^{−β−}`, weighting by `r^{−β−}`
/// cancelled: the fit runs on `y` (relative error) and `r2` is reported on `g`.
fn fit_window(
    grid: &RadialGrid,
    g: &[f64],
    exps: &DiscreteExponents,
    alpha: f64,
    range: Range<usize>,
    opts: &MassFitOptions,
) -> Result<LinearFit> {
    let d = exps.gap();
    let (rmin, rmax) = (grid.r_min(), grid.r_max());
    let mut cols: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(|_| 1.0)];
    if opts.hole_term {
        cols.push(Box::new(move |r: f64| (rmin / r).powf(d)));
    }
    for e in [alpha - d, alpha].into_iter().take(opts.remainder_terms) {
        cols.push(Box::new(move |r: f64| (r / rmax).powf(e)));
    }
    let m = range.len();
    let p = cols.len();
    if m < p + 2 {
        return Err(Error::domain(format!("mass window {range:?} is too short for {p} terms")));
    }
    let mut a = nalgebra::DMatrix::zeros(m, p);
    let mut y = DVector::zeros(m);
    for (i, k) in range.clone().enumerate() {
        let r = grid.nodes()[k];
        for (j, c) in cols.iter().enumerate() {
            a[(i, j)] = c(r);
        }
        y[i] = g[k] * r.powf(exps.beta_minus);
    }
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-14).map_err(|e| Error::numerical(format!("mass least squares: {e}")))?;
    let resid = &y - &a * &coef;
    let sigma2 = resid.norm_squared() / (m - p) as f64;
    let ata_inv = (a.transpose() * &a).try_inverse();
    let stderr0 = ata_inv.map_or(f64::INFINITY, |inv| (sigma2 * inv[(0, 0)]).sqrt());
    // r2 on g itself
    let idx: Vec<usize> = range.collect();
    let gs: Vec<f64> = idx.iter().map(|&k| g[k]).collect();
    let model: Vec<f64> = idx
        .iter()
        .enumerate()
        .map(|(i, &k)| (a.row(i) * &coef)[0] * grid.nodes()[k].powf(-exps.beta_minus))
        .collect();
    let mean = gs.iter().sum::<f64>() / m as f64;
    let ss_tot: f64 = gs.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = gs.iter().zip(&model).map(|(v, w)| (v - w).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    Ok(LinearFit { coef: coef.as_slice().to_vec(), stderr0, r2 })
}

/// Fit `g r^{β−} = m + c₁(r_min/r)^{d} + c₂(r/R)^{α−d} + c₃(r/R)^{α}`,
/// `d = β+ − β−`, on a window and on two nested shrinkings of it toward the origin.
pub fn fit_mass(g: &RadialField, exps: &DiscreteExponents, alpha: f64, opts: &MassFitOptions) -> Result<MassFit> {
    let grid = g.grid();
    let range = grid.window(opts.window.0, opts.window.1);
    let main = fit_window(grid, g.values(), exps, alpha, range.clone(), opts)?;
    let mass = main.coef[0];
    let mut drift: f64 = 0.0;
    for frac in [2.0 / 3.0, 1.0 / 3.0] {
        let len = ((range.len() as f64) * frac).round() as usize;
        let sub = fit_window(grid, g.values(), exps, alpha, range.start..range.start + len, opts)?;
        drift = drift.max(((sub.coef[0] - mass) / mass).abs());
    }
    let mut rest = main.coef[1..].iter().copied();
    let hole_coef = if opts.hole_term { rest.next().unwrap_or(0.0) } else { 0.0 };
    let remainder_coef: Vec<f64> = rest.collect();
    let uncertainty = (drift * mass.abs()).max(main.stderr0);
    let trusted = main.r2 >= opts.min_r2 && drift <= opts.max_drift && drift.is_finite();
    Ok(MassFit { mass, uncertainty, fit_window: range, fit_r2: main.r2, drift, hole_coef, remainder_coef, trusted })
}

/// Mass of the grid's ball for `(γ, λ)` with every intermediate field.
#[derive(Debug, Clone)]
pub struct MassResult {
    pub mass: f64,
    pub uncertainty: f64,
    pub corrector: RadialField,
    /// `H = η r^{−β+} + g`.
    pub profile: RadialField,
    pub rhs: RadialField,
    pub fit: MassFit,
    pub exponents: DiscreteExponents,
    pub lambda_used: f64,
    pub lambda_1: f64,
    pub coercive: bool,
}

impl MassResult {
    pub fn trusted(&self) -> bool {
        self.fit.trusted && self.coercive
    }
}

/// Full pipeline: right-hand side, corrector, profile and mass fit.
pub fn compute_mass(forms: &AssembledForms, params: &ProblemParams, eta: &RadialField, opts: &MassFitOptions) -> Result<MassResult> {
    require_critical(params)?;
    let (lam1, _) = lambda_1(forms, params)?;
    if !(params.lambda() < lam1) {
        return Err(Error::precondition(format!("lambda = {} is not below lambda_1 = {lam1}", params.lambda())));
    }
    let exponents = discrete_exponents(forms.kernel(), params.gamma())?;
    let rhs = singular_rhs(forms, params, eta)?;
    let g = solve_corrector(forms, params, &rhs)?;
    let fit = fit_mass(&g, &exponents, params.alpha(), opts)?;
    let profile = singular_profile(eta, &g, exponents.beta_plus)?;
    Ok(MassResult {
        mass: fit.mass,
        uncertainty: fit.uncertainty,
        corrector: g,
        profile,
        rhs,
        fit,
        exponents,
        lambda_used: params.lambda(),
        lambda_1: lam1,
        coercive: true,
    })
}

fn singular_profile(eta: &RadialField, g: &RadialField, beta_plus: f64) -> Result<RadialField> {
    let vals = eta
        .grid()
        .nodes()
        .iter()
        .zip(eta.values())
        .zip(g.values())
        .map(|((r, e), gv)| e * r.powf(-beta_plus) + gv)
        .collect();
    RadialField::new(g.grid().clone(), vals)
}

/// `H > 0` at every node of `(2 r_min, R(1 − boundary))`.
pub fn positivity_check(h: &RadialField, boundary: f64) -> bool {
    let grid = h.grid();
    let (lo, hi) = (2.0 * grid.r_min(), grid.r_max() * (1.0 - boundary));
    grid.nodes().iter().zip(h.values()).filter(|(r, _)| **r > lo && **r < hi).all(|(_, v)| *v > 0.0)
}

/// Verdict of the mass criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassVerdict {
    MassPositiveExtremalsExist,
    MassNonpositiveInconclusive,
    UntrustedFit,
}

impl MassVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            MassVerdict::MassPositiveExtremalsExist => "MASS_POSITIVE_EXTREMALS_EXIST",
            MassVerdict::MassNonpositiveInconclusive => "MASS_NONPOSITIVE_INCONCLUSIVE",
            MassVerdict::UntrustedFit => "UNTRUSTED_FIT",
        }
    }
}

/// Verdict and the margin `mass / uncertainty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassCriterion {
    pub verdict: MassVerdict,
    pub margin: f64,
}

/// Positive mass beyond its uncertainty, with `0 ≤ λ < λ₁`, means extremals exist.
pub fn mass_criterion(params: &ProblemParams, result: &MassResult) -> Result<MassCriterion> {
    require_critical(params)?;
    if !(params.lambda() < result.lambda_1) || params.lambda() != result.lambda_used {
        return Err(Error::precondition(format!(
            "the mass criterion needs the mass at lambda < lambda_1 = {}, got {}",
            result.lambda_1,
            params.lambda()
        )));
    }
    Ok(classify_mass(result.mass, result.uncertainty, result.trusted()))
}

/// Verdict for a mass with its uncertainty: positive needs `mass > uncertainty`.
pub fn classify_mass(mass: f64, uncertainty: f64, trusted: bool) -> MassCriterion {
    let margin = if uncertainty > 0.0 { mass / uncertainty } else { mass.signum() * f64::INFINITY };
    let verdict = if !trusted {
        MassVerdict::UntrustedFit
    } else if margin > 1.0 {
        MassVerdict::MassPositiveExtremalsExist
    } else {
        MassVerdict::MassNonpositiveInconclusive
    };
    MassCriterion { verdict, margin }
}

/// Planted-solution check of the corrector pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedReport {
    pub planted: f64,
    pub recovered: f64,
    pub rel_error: f64,
    /// Largest relative nodal error of the recovered field on the fit window.
    pub field_error: f64,
}

/// Plant `g* = c η̃ r^{−β−}` (continued as `c r^{−β−}` into the hole), form
/// `f* = (L − λ)g*`, solve with the zero-extended hole and refit the mass.
pub fn manufactured_check(
    forms: &AssembledForms,
    params: &ProblemParams,
    eta: &RadialField,
    planted: f64,
    opts: &MassFitOptions,
) -> Result<ManufacturedReport> {
    check_eta(forms, eta)?;
    let exps = discrete_exponents(forms.kernel(), params.gamma())?;
    let grid = forms.grid();
    let bm = exps.beta_minus;
    let gstar: Vec<f64> = grid.nodes().iter().zip(eta.values()).map(|(r, e)| planted * e * r.powf(-bm)).collect();
    let ext = Extension { inner: Some(PowerLaw { coef: planted, exponent: bm }), outer: None };
    let f = RadialField::new(grid.clone(), apply_shifted(forms, params, &gstar, &ext)?)?;
    let g = solve_corrector(forms, params, &f)?;
    let fit = fit_mass(&g, &exps, params.alpha(), opts)?;
    let field_error = fit
        .fit_window
        .clone()
        .map(|k| ((g.values()[k] - gstar[k]) / gstar[k]).abs())
        .fold(0.0, f64::max);
    Ok(ManufacturedReport {
        planted,
        recovered: fit.mass,
        rel_error: ((fit.mass - planted) / planted).abs(),
        field_error,
    })
}

/// Largest difference of two correctors relative to the peak of `|g| r^{β−}`,
/// both weighted by `r^{β−}`.
pub fn corrector_agreement(a: &RadialField, b: &RadialField, beta_minus: f64) -> f64 {
    let nodes = a.grid().nodes();
    let scale = nodes.iter().zip(a.values()).map(|(r, v)| (v * r.powf(beta_minus)).abs()).fold(0.0, f64::max);
    nodes
        .iter()
        .zip(a.values().iter().zip(b.values()))
        .map(|(r, (x, y))| ((x - y) * r.powf(beta_minus)).abs())
        .fold(0.0, f64::max)
        / scale
}

/// `J_λ(T_ε)` for `T_ε = η u_ε + ε^{(β+−β−)/2} g` against the expansion
/// `J = μ(ℝⁿ) + D ε^{β+−β−} + o(ε^{β+−β−})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassExpansionFit {
    /// Mean of the local coefficients.
    pub coefficient: f64,
    /// `(J(T_ε) − μ(ℝⁿ)) / ε^{β+−β−}` for each scale.
    pub local_coefficients: Vec<f64>,
    pub energies: Vec<f64>,
    /// Whether every local coefficient has the sign of `coefficient`.
    pub consistent_sign: bool,
}

/// Energies of the mass test functions. `U` is rescaled so that `r^{β+} U → 1`,
/// which makes `T_ε/ε^{(β+−β−)/2}` tend to `H` away from the origin; `mu_rn`
/// is `J(U)`, the limit of the expansion.
///
/// The zero-extended hole costs about `(r_min/ε)^{β+−β−}`, the same order as
/// the mass term, so useful scales sit well inside the grid's log-range.
#[allow(clippy::too_many_arguments)]
pub fn test_function_with_mass(
    forms: &AssembledForms,
    params: &ProblemParams,
    u: &RadialField,
    mu_rn: f64,
    g: &RadialField,
    eta: &RadialField,
    eps_list: &[f64],
    windows: &FitWindows,
) -> Result<MassExpansionFit> {
    if eps_list.is_empty() {
        return Err(Error::domain("need at least one scale"));
    }
    let exps = discrete_exponents(forms.kernel(), params.gamma())?;
    let d = exps.gap();
    let tail_level = tail_constant(u, exps.beta_plus, windows)?;
    let grid: &Arc<RadialGrid> = forms.grid();
    let energies = eps_list
        .iter()
        .map(|&eps| {
            let ue = bubble(grid, u, eps, params, windows)?;
            let shift = eps.powf(0.5 * d);
            let v: Vec<f64> = ue
                .values()
                .iter()
                .zip(eta.values())
                .zip(g.values())
                .map(|((b, e), gv)| e * b / tail_level + shift * gv)
                .collect();
            rayleigh_quotient(forms, params, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let local: Vec<f64> = eps_list.iter().zip(&energies).map(|(e, j)| (j - mu_rn) / e.powf(d)).collect();
    let coefficient = local.iter().sum::<f64>() / local.len() as f64;
    let consistent_sign = local.iter().all(|c| c.signum() == coefficient.signum());
    Ok(MassExpansionFit { coefficient, local_coefficients: local, energies, consistent_sign })
}

/// Mean of `r^{β+} U` over the tail window.
fn tail_constant(u: &RadialField, beta_plus: f64, windows: &FitWindows) -> Result<f64> {
    let grid = u.grid();
    let range = grid.window(windows.tail.0, windows.tail.1);
    if range.is_empty() {
        return Err(Error::domain("empty tail window"));
    }
    let len = range.len() as f64;
    let sum: f64 = range.map(|k| grid.nodes()[k].powf(beta_plus) * u.values()[k]).sum();
    Ok(sum / len)
}

/// Row of the existence table: the coupling regime of `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `γ ≤ γ_crit`: existence for every `0 < λ < λ₁`.
    Subcritical,
    /// `γ > γ_crit`: existence when the mass is positive.
    Critical,
}

impl Regime {
    pub fn of(params: &ProblemParams) -> Regime {
        if params.gamma() <= params.gamma_crit() {
            Regime::Subcritical
        } else {
            Regime::Critical
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
        }
    }
}

/// Existence verdict from the table: subcritical rows need `0 < λ < λ₁`,
/// critical rows a trusted positive mass (computed at `λ < λ₁`).
pub fn table_verdict(params: &ProblemParams, lambda_1: f64, mass: Option<MassVerdict>) -> ExistenceVerdict {
    let below = params.lambda() < lambda_1;
    let exists = match Regime::of(params) {
        Regime::Subcritical => below && params.lambda() > 0.0,
        Regime::Critical => below && mass == Some(MassVerdict::MassPositiveExtremalsExist),
    };
    if exists {
        ExistenceVerdict::ExtremalsExist
    } else {
        ExistenceVerdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::cutoff;
    use crate::radialops::assemble;
    use approx::assert_relative_eq;

    fn setup(lambda_frac: f64) -> (AssembledForms, ProblemParams, RadialField) {
        let base = ProblemParams::new(3.0, 1.0, 0.5, 0.0, 0.0).unwrap();
        let p = base.with_gamma(0.5 * (base.gamma_crit() + base.hardy_constant())).unwrap();
        let grid = Arc::new(RadialGrid::new(3.0, 1e-6, 1.0, 200).unwrap());
        let forms = assemble(grid.clone(), &p).unwrap();
        let (l1, _) = lambda_1(&forms, &p).unwrap();
        let p = p.with_lambda(lambda_frac * l1).unwrap();
        (forms, p, cutoff(&grid, 0.25).unwrap())
    }

    #[test]
    fn discrete_exponents_solve_lattice_symbol() {
        let (forms, p, _) = setup(0.0);
        let e = discrete_exponents(forms.kernel(), p.gamma()).unwrap();
        assert_relative_eq!(forms.kernel().symbol(e.beta_minus), p.gamma(), max_relative = 1e-10);
        assert_relative_eq!(e.beta_minus + e.beta_plus, 2.0, max_relative = 1e-14);
        let (bm, _) = p.beta_pm();
        assert!((e.beta_minus - bm).abs() < 1e-3);
        assert!(discrete_exponents(forms.kernel(), 10.0).is_err());
    }

    #[test]
    fn rhs_requires_critical_coupling() {
        let (forms, p, eta) = setup(0.0);
        let sub = p.with_gamma(0.5 * p.gamma_crit()).unwrap();
        assert!(matches!(singular_rhs(&forms, &sub, &eta), Err(Error::Precondition(_))));
    }

    #[test]
    fn rhs_is_small_where_cutoff_is_one() {
        let (forms, p, eta) = setup(0.0);
        let f = singular_rhs(&forms, &p, &eta).unwrap();
        let bp = discrete_exponents(forms.kernel(), p.gamma()).unwrap().beta_plus;
        for (r, v) in forms.grid().nodes().iter().zip(f.values()) {
            if *r < 0.25 / 4.0 {
                assert!(v.abs() <= 0.02 * r.powf(-1.0 - bp), "f({r}) = {v}");
            }
        }
        // with lambda the inner region carries exactly lambda r^{-beta+}
        let (forms, p, eta) = setup(0.5);
        let f = singular_rhs(&forms, &p, &eta).unwrap();
        let r = forms.grid().nodes()[10];
        assert_relative_eq!(f.values()[10] * r.powf(bp), p.lambda(), max_relative = 1e-6);
    }

    #[test]
    fn corrector_is_linear_and_zero_for_zero_data() {
        let (forms, p, eta) = setup(0.3);
        let grid = forms.grid().clone();
        let zero = RadialField::new(grid.clone(), vec![0.0; grid.len()]).unwrap();
        assert!(solve_corrector(&forms, &p, &zero).unwrap().values().iter().all(|v| *v == 0.0));
        let f1 = singular_rhs(&forms, &p, &eta).unwrap();
        let f2 = RadialField::from_fn(grid.clone(), |r| (1.0 - r).max(0.0)).unwrap();
        let sum = f1.with_values(f1.values().iter().zip(f2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let (g1, g2, g) = (
            solve_corrector(&forms, &p, &f1).unwrap(),
            solve_corrector(&forms, &p, &f2).unwrap(),
            solve_corrector(&forms, &p, &sum).unwrap(),
        );
        let scale = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..grid.len() {
            assert!((g.values()[k] - g1.values()[k] - g2.values()[k]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn solver_paths_agree() {
        let (forms, p, eta) = setup(0.5);
        let f = singular_rhs(&forms, &p, &eta).unwrap();
        let a = solve_corrector(&forms, &p, &f).unwrap();
        let b = solve_corrector_with(&forms, &p, &f, CorrectorSolver::Pcg, 1e-13).unwrap();
        let bm = discrete_exponents(forms.kernel(), p.gamma()).unwrap().beta_minus;
        assert!(corrector_agreement(&a, &b, bm) < 1e-8);
    }

    #[test]
    fn coercivity_gate() {
        let (forms, p, eta) = setup(0.0);
        let (l1, _) = lambda_1(&forms, &p).unwrap();
        let f = singular_rhs(&forms, &p, &eta).unwrap();
        assert!(solve_corrector(&forms, &p.with_lambda(0.99 * l1).unwrap(), &f).is_ok());
        let bad = p.with_lambda(1.01 * l1).unwrap();
        assert!(matches!(solve_corrector(&forms, &bad, &f), Err(Error::Precondition(_))));
        assert!(matches!(compute_mass(&forms, &bad, &eta, &MassFitOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn pure_power_law_fits_exactly() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-6, 1.0, 200).unwrap());
        let exps = DiscreteExponents { beta_minus: 0.6, beta_plus: 1.4 };
        let g = RadialField::from_fn(grid.clone(), |r| 2.5 * r.powf(-0.6)).unwrap();
        let fit = fit_mass(&g, &exps, 1.0, &MassFitOptions::default()).unwrap();
        assert_relative_eq!(fit.mass, 2.5, max_relative = 1e-10);
        assert_relative_eq!(fit.fit_r2, 1.0, max_relative = 1e-12);
        assert!(fit.trusted);
        // planted hole and remainder terms are separated from the mass
        let g = RadialField::from_fn(grid, |r| r.powf(-0.6) * (2.5 - 3.0 * (1e-6 / r).powf(0.8) + 0.4 * r.powf(0.2))).unwrap();
        let fit = fit_mass(&g, &exps, 1.0, &MassFitOptions::default()).unwrap();
        assert_relative_eq!(fit.mass, 2.5, max_relative = 1e-9);
        assert_relative_eq!(fit.hole_coef, -3.0, max_relative = 1e-8);
    }

    #[test]
    fn mass_approaches_constant_as_window_moves_in() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-12, 1.0, 300).unwrap());
        let exps = DiscreteExponents { beta_minus: 0.6, beta_plus: 1.4 };
        let g = RadialField::from_fn(grid, |r| 2.0 * r.powf(-0.6) + 0.5 * r.powf(0.4)).unwrap();
        let opts = |w| MassFitOptions { window: w, hole_term: false, remainder_terms: 0, ..Default::default() };
        let outer = fit_mass(&g, &exps, 1.0, &opts((0.6, 0.8))).unwrap().mass;
        let inner = fit_mass(&g, &exps, 1.0, &opts((0.1, 0.3))).unwrap().mass;
        assert!((inner - 2.0).abs() < (outer - 2.0).abs());
        assert!((inner - 2.0).abs() < 1e-6);
    }

    #[test]
    fn manufactured_coefficient_is_recovered() {
        let (forms, p, eta) = setup(0.5);
        let rep = manufactured_check(&forms, &p, &eta, 0.7, &MassFitOptions::default()).unwrap();
        assert!(rep.rel_error < 0.01, "{rep:?}");
    }

    #[test]
    fn profile_is_positive_and_flip_is_caught() {
        let (forms, p, eta) = setup(0.5);
        let res = compute_mass(&forms, &p, &eta, &MassFitOptions::default()).unwrap();
        assert!(res.trusted());
        assert!(positivity_check(&res.profile, 0.05));
        let mut v = res.profile.values().to_vec();
        v[100] = -v[100];
        assert!(!positivity_check(&res.profile.with_values(v).unwrap(), 0.05));
        for (k, h) in res.profile.values().iter().enumerate() {
            let r = forms.grid().nodes()[k];
            let expect = eta.values()[k] * r.powf(-res.exponents.beta_plus) + res.corrector.values()[k];
            assert_relative_eq!(*h, expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn mass_does_not_depend_on_cutoff() {
        let (forms, p, _) = setup(0.5);
        let grid = forms.grid().clone();
        let m1 = compute_mass(&forms, &p, &cutoff(&grid, 0.25).unwrap(), &MassFitOptions::default()).unwrap().mass;
        let m2 = compute_mass(&forms, &p, &cutoff(&grid, 0.1).unwrap(), &MassFitOptions::default()).unwrap().mass;
        assert_relative_eq!(m1, m2, max_relative = 1e-8);
    }

    #[test]
    fn verdict_logic() {
        assert_eq!(classify_mass(0.3, 0.01, true).verdict, MassVerdict::MassPositiveExtremalsExist);
        assert_eq!(classify_mass(-0.2, 0.01, true).verdict, MassVerdict::MassNonpositiveInconclusive);
        assert_eq!(classify_mass(0.005, 0.01, true).verdict, MassVerdict::MassNonpositiveInconclusive);
        assert_eq!(classify_mass(0.3, 0.01, false).verdict, MassVerdict::UntrustedFit);
        assert_relative_eq!(classify_mass(0.3, 0.01, true).margin, 30.0, max_relative = 1e-12);
    }

    #[test]
    fn criterion_uses_the_mass_lambda() {
        let (forms, p, eta) = setup(0.0);
        let res = compute_mass(&forms, &p, &eta, &MassFitOptions::default()).unwrap();
        // a ball at lambda = 0 has negative mass
        assert_eq!(mass_criterion(&p, &res).unwrap().verdict, MassVerdict::MassNonpositiveInconclusive);
        let other = p.with_lambda(0.1).unwrap();
        assert!(matches!(mass_criterion(&other, &res), Err(Error::Precondition(_))));
    }

    #[test]
    fn regime_table() {
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.0, 0.3).unwrap();
        let gc = p.gamma_crit();
        let sub = p.with_gamma(0.5 * gc).unwrap();
        let crit = p.with_gamma(0.5 * (gc + p.hardy_constant())).unwrap();
        assert_eq!(Regime::of(&sub), Regime::Subcritical);
        assert_eq!(Regime::of(&p.with_gamma(gc).unwrap()), Regime::Subcritical);
        assert_eq!(Regime::of(&crit), Regime::Critical);
        assert_eq!(table_verdict(&sub, 1.0, None), ExistenceVerdict::ExtremalsExist);
        assert_eq!(table_verdict(&sub.with_lambda(0.0).unwrap(), 1.0, None), ExistenceVerdict::Inconclusive);
        assert_eq!(table_verdict(&crit, 1.0, None), ExistenceVerdict::Inconclusive);
        assert_eq!(
            table_verdict(&crit, 1.0, Some(MassVerdict::MassPositiveExtremalsExist)),
            ExistenceVerdict::ExtremalsExist
        );
        assert_eq!(table_verdict(&crit, 1.0, Some(MassVerdict::UntrustedFit)), ExistenceVerdict::Inconclusive);
        // n < 2α: gamma_crit = -1, every gamma is critical
        let low = ProblemParams::new(1.0, 0.75, 0.2, 0.0, 0.1).unwrap();
        assert_eq!(Regime::of(&low), Regime::Critical);
    }

    #[test]
    fn verdict_strings_are_closed() {
        let all = [
            MassVerdict::MassPositiveExtremalsExist,
            MassVerdict::MassNonpositiveInconclusive,
            MassVerdict::UntrustedFit,
        ];
        let names: Vec<_> = all.iter().map(|v| v.as_str()).collect();
        assert_eq!(names, ["MASS_POSITIVE_EXTREMALS_EXIST", "MASS_NONPOSITIVE_INCONCLUSIVE", "UNTRUSTED_FIT"]);
    }
}
