//! Hardy–Sobolev minimization, the first eigenvalue, decay-exponent fits and
//! bubble test functions.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radialops::{AssembledForms, RadialField, RadialGrid};
use crate::specfun::{sphere_area, ProblemParams};

/// Fit windows as fractions of the grid's log-range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindows {
    pub head: (f64, f64),
    pub tail: (f64, f64),
}

impl Default for FitWindows {
    fn default() -> Self {
        Self { head: (0.2, 0.3), tail: (0.7, 0.8) }
    }
}

/// Least-squares line through `(ln r, ln u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fit `ln u = intercept + slope·ln r` over the nodes `range`.
pub fn log_linear_fit(grid: &RadialGrid, values: &[f64], range: std::ops::Range<usize>) -> Result<LogLinearFit> {
    if range.len() < 2 || range.end > values.len() {
        return Err(Error::domain(format!("fit window {range:?} needs at least two nodes")));
    }
    let mut xs = Vec::with_capacity(range.len());
    let mut ys = Vec::with_capacity(range.len());
    for k in range {
        if !(values[k] > 0.0) {
            return Err(Error::domain(format!("field is not positive at node {k} of the fit window")));
        }
        xs.push(grid.nodes()[k].ln());
        ys.push(values[k].ln());
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LogLinearFit { slope, intercept, r2 })
}

/// Head and tail power laws `u ≈ λ₀ r^{−β₀}` and `u ≈ λ_∞ r^{−β_∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub beta0: f64,
    pub betainf: f64,
    pub lambda0: f64,
    pub lambdainf: f64,
    /// Smaller of the two coefficients of determination.
    pub fit_r2: f64,
}

pub fn fit_exponents(u: &RadialField, head_window: (f64, f64), tail_window: (f64, f64)) -> Result<ExponentFit> {
    let grid = u.grid();
    let head = log_linear_fit(grid, u.values(), grid.window(head_window.0, head_window.1))?;
    let tail = log_linear_fit(grid, u.values(), grid.window(tail_window.0, tail_window.1))?;
    Ok(ExponentFit {
        beta0: -head.slope,
        betainf: -tail.slope,
        lambda0: head.intercept.exp(),
        lambdainf: tail.intercept.exp(),
        fit_r2: head.r2.min(tail.r2),
    })
}

fn sobolev_weights(grid: &RadialGrid, s: f64) -> DVector<f64> {
    let sn = sphere_area(grid.dim());
    DVector::from_iterator(grid.len(), grid.nodes().iter().map(|r| sn * r.powf(grid.dim() - s) * grid.h()))
}

fn check_forms(forms: &AssembledForms, params: &ProblemParams) -> Result<()> {
    let fp = forms.params();
    if fp.n() != params.n() || fp.alpha() != params.alpha() {
        return Err(Error::Configuration("forms were assembled for a different (n, alpha)".into()));
    }
    Ok(())
}

fn factor(q: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(q).ok_or_else(|| Error::precondition(format!("{what} is not positive definite on this grid")))
}

/// Smallest generalized eigenvalue of `(G − γ·hardy, mass)` by inverse iteration,
/// with its eigenfield normalized to unit `L²` norm and positive peak.
pub fn lambda_1(forms: &AssembledForms, params: &ProblemParams) -> Result<(f64, RadialField)> {
    check_forms(forms, params)?;
    let chol = factor(forms.operator_matrix(params.gamma(), 0.0), "G - gamma*hardy")?;
    let m = forms.mass();
    let len = m.len();
    let mut x = DVector::from_element(len, 1.0);
    let mut lam = f64::INFINITY;
    const MAX_ITER: usize = 20_000;
    for it in 0..MAX_ITER {
        let y = chol.solve(&m.component_mul(&x));
        let norm = y.dot(&m.component_mul(&y)).sqrt();
        let y = y / norm;
        // Rayleigh quotient: y·Qy with Qy = M x / norm
        let new = m.component_mul(&x).dot(&y) / norm;
        let converged = ((new - lam) / new).abs() < 1e-14 || (it > 50 && (x.clone() - &y).norm() < 1e-12);
        x = y;
        lam = new;
        if converged {
            break;
        }
        if it == MAX_ITER - 1 {
            return Err(Error::numerical(format!("inverse iteration did not converge (last estimate {lam})")));
        }
    }
    let peak = x.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if peak < 0.0 {
        x = -x;
    }
    let field = RadialField::new(forms.grid().clone(), x.as_slice().to_vec())?;
    Ok((lam, field))
}

/// Stopping rules for [`minimize_mu`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub windows: FitWindows,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 5000, rel_tol: 1e-10, grad_tol: 1e-8, windows: FitWindows::default() }
    }
}

/// Minimizer of the Hardy–Sobolev quotient and its diagnostics.
#[derive(Debug, Clone)]
pub struct ExtremalResult {
    pub mu: f64,
    /// Minimizer normalized by `∫|u|^{2*}/|x|^s = 1`.
    pub field: RadialField,
    /// Euler–Lagrange constant `κ` in `Qu = κ|u|^{2*−2}u/|x|^s`.
    pub kappa: f64,
    pub fitted_beta0: f64,
    pub fitted_betainf: f64,
    pub lambda0: f64,
    pub lambdainf: f64,
    pub fit_r2: f64,
    pub iterations: usize,
    /// Final preconditioned gradient norm, relative to `√A(u)`.
    pub residual: f64,
    /// Relative Euler–Lagrange residual `|Qu − κ w| / |Qu|`.
    pub el_residual: f64,
    /// `J` after every accepted step.
    pub history: Vec<f64>,
}

/// `J(u) = A(u) / B(u)^{2/2*}` with `A = u·Q·u`, `B = ∫|u|^{2*}/|x|^s`.
pub fn rayleigh_quotient(forms: &AssembledForms, params: &ProblemParams, u: &[f64]) -> Result<f64> {
    check_forms(forms, params)?;
    let q = forms.operator_matrix(params.gamma(), params.lambda());
    let uv = DVector::from_column_slice(u);
    let a = (&q * &uv).dot(&uv);
    let b = sobolev_norm(&sobolev_weights(forms.grid(), params.s()), &uv, params.crit_exponent());
    Ok(a / b.powf(2.0 / params.crit_exponent()))
}

fn sobolev_norm(weights: &DVector<f64>, u: &DVector<f64>, p: f64) -> f64 {
    weights.iter().zip(u.iter()).map(|(w, v)| w * v.abs().powf(p)).sum()
}

/// Default initial field `1 / (r^{β−} + r^{β+})`.
pub fn default_profile(grid: &Arc<RadialGrid>, params: &ProblemParams) -> Result<RadialField> {
    let (bm, bp) = params.beta_pm();
    let center = (grid.r_min() * grid.r_max()).sqrt();
    RadialField::from_fn(grid.clone(), |r| {
        let x = r / center;
        1.0 / (x.powf(bm) + x.powf(bp))
    })
}

/// Minimize `J` by a normalized gradient flow preconditioned with `Q⁻¹`,
/// keeping iterates in the nonnegative cone.
pub fn minimize_mu(
    forms: &AssembledForms,
    params: &ProblemParams,
    init: Option<&RadialField>,
    opts: &MinimizeOptions,
) -> Result<ExtremalResult> {
    check_forms(forms, params)?;
    if !(params.s() < params.alpha()) {
        return Err(Error::precondition("minimization requires s < alpha"));
    }
    let (lam1, _) = lambda_1(forms, params)?;
    if !(params.lambda() < lam1) {
        return Err(Error::precondition(format!("lambda = {} is not below lambda_1 = {lam1}", params.lambda())));
    }
    let grid = forms.grid().clone();
    let q = forms.operator_matrix(params.gamma(), params.lambda());
    let chol = factor(q.clone(), "G - gamma*hardy - lambda*mass")?;
    let w = sobolev_weights(&grid, params.s());
    let p = params.crit_exponent();

    let start = match init {
        Some(f) => f.clone(),
        None => default_profile(&grid, params)?,
    };
    if start.values().len() != grid.len() {
        return Err(Error::Configuration("initial field does not live on the forms' grid".into()));
    }
    let normalize = |v: DVector<f64>| -> Option<DVector<f64>> {
        let v = v.map(|x| x.max(0.0));
        let b = sobolev_norm(&w, &v, p);
        (b > 0.0 && b.is_finite()).then(|| v / b.powf(1.0 / p))
    };
    let mut u = normalize(DVector::from_column_slice(start.values()))
        .ok_or_else(|| Error::precondition("initial field has no positive part"))?;
    let energy = |v: &DVector<f64>| (&q * v).dot(v);
    let mut j = energy(&u);
    let mut history = vec![j];
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let qu = &q * &u;
        let pw = w.zip_map(&u, |wk, uk| wk * uk.powf(p - 1.0));
        let z = chol.solve(&pw);
        let d = &u - &z * j;
        residual = (d.dot(&(&qu - &pw * j)).max(0.0) / j).sqrt();
        if residual < opts.grad_tol {
            break;
        }
        let mut accepted = None;
        let mut tau = (2.0 * step).min(1.0);
        while tau > 1e-10 {
            if let Some(cand) = normalize(&u - &d * tau) {
                let jc = energy(&cand);
                if jc <= j {
                    accepted = Some((cand, jc));
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some((cand, jc)) = accepted else {
            if residual < 1e3 * opts.grad_tol {
                break;
            }
            return Err(Error::numerical(format!(
                "descent stalled at iteration {it}: J = {j}, gradient norm = {residual}"
            )));
        };
        step = tau;
        let change = (j - jc) / j;
        u = cand;
        j = jc;
        history.push(j);
        if change < opts.rel_tol {
            break;
        }
    }
    let qu = &q * &u;
    let pw = w.zip_map(&u, |wk, uk| wk * uk.powf(p - 1.0));
    let kappa = qu.dot(&u) / pw.dot(&u);
    let el_residual = (&qu - &pw * kappa).norm() / qu.norm();
    let field = RadialField::new(grid, u.as_slice().to_vec())?;
    let fit = fit_exponents(&field, opts.windows.head, opts.windows.tail)?;
    Ok(ExtremalResult {
        mu: j,
        field,
        kappa,
        fitted_beta0: fit.beta0,
        fitted_betainf: fit.betainf,
        lambda0: fit.lambda0,
        lambdainf: fit.lambdainf,
        fit_r2: fit.fit_r2,
        iterations,
        residual,
        el_residual,
        history,
    })
}

/// `u_ε(r) = ε^{−(n−α)/2} U(r/ε)` sampled on `grid`.
///
/// `U` is trusted on the span of `windows` (head start to tail end); beyond it
/// the fitted head and tail power laws continue it, anchored at the junctions.
/// `ln U` is interpolated linearly in `ln r`, so lattice-aligned `ε` are exact shifts.
pub fn bubble(
    grid: &Arc<RadialGrid>,
    u: &RadialField,
    eps: f64,
    params: &ProblemParams,
    windows: &FitWindows,
) -> Result<RadialField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("bubble scale must be positive, got {eps}")));
    }
    let src = u.grid();
    let lo = src.window(windows.head.0, windows.head.1).start;
    let hi = src.window(windows.tail.0, windows.tail.1).end - 1;
    let fit = fit_exponents(u, windows.head, windows.tail)?;
    let (t_lo, t_hi) = (src.nodes()[lo].ln(), src.nodes()[hi].ln());
    let (v_lo, v_hi) = (u.values()[lo].ln(), u.values()[hi].ln());
    let log_eps = eps.ln();
    let covered = grid.nodes().iter().any(|r| {
        let t = r.ln() - log_eps;
        t >= t_lo && t <= t_hi
    });
    if !covered {
        return Err(Error::domain(format!("bubble scale {eps} moves the profile off the resolvable range")));
    }
    let scale = eps.powf(-params.scaling_exponent());
    let values = grid
        .nodes()
        .iter()
        .map(|r| {
            let t = r.ln() - log_eps;
            let ln_u = if t <= t_lo {
                v_lo - fit.beta0 * (t - t_lo)
            } else if t >= t_hi {
                v_hi - fit.betainf * (t - t_hi)
            } else {
                let x = src.index_of(t.exp()).clamp(lo as f64, hi as f64);
                let k = (x.floor() as usize).min(hi - 1);
                let frac = x - k as f64;
                let (a, b) = (u.values()[k], u.values()[k + 1]);
                if a > 0.0 && b > 0.0 {
                    (1.0 - frac) * a.ln() + frac * b.ln()
                } else {
                    ((1.0 - frac) * a + frac * b).max(f64::MIN_POSITIVE).ln()
                }
            };
            scale * ln_u.exp()
        })
        .collect();
    RadialField::new(grid.clone(), values)
}

/// Node where the dilation-invariant profile `r^{(n−α)/2} u(r)` peaks.
pub fn profile_center(u: &RadialField, params: &ProblemParams) -> f64 {
    let a = params.scaling_exponent();
    let (mut best, mut at) = (f64::NEG_INFINITY, u.grid().nodes()[0]);
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        let x = r.powf(a) * v;
        if x > best {
            best = x;
            at = *r;
        }
    }
    at
}

/// Cutoff `η`: 1 on `[0, δ]`, 0 beyond `2δ`, smooth in between.
pub fn cutoff(grid: &Arc<RadialGrid>, delta: f64) -> Result<RadialField> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("cutoff radius must be positive, got {delta}")));
    }
    let bump = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    RadialField::from_fn(grid.clone(), |r| {
        let x = (2.0 * delta - r) / delta;
        if x >= 1.0 {
            1.0
        } else if x <= 0.0 {
            0.0
        } else {
            bump(x) / (bump(x) + bump(1.0 - x))
        }
    })
}

/// Result of fitting `J = J_∞ + D ε^d` to a sequence of test-function energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    /// Fitted exponent `d`.
    pub slope: f64,
    /// Extrapolated limit `J_∞`.
    pub mu_limit: f64,
    /// Coefficient `D`.
    pub coefficient: f64,
    /// `J` at each `ε` of the input list.
    pub energies: Vec<f64>,
    /// Root-mean-square fit residual relative to `J_∞`.
    pub rel_rms: f64,
    /// Whether `J` moves monotonically toward the limit as `ε` decreases.
    pub monotone: bool,
}

/// Linear least squares of `J = c₀ + c₁ x` returning `(c₀, c₁, rss)`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = my - c1 * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - c0 - c1 * a).powi(2)).sum();
    (c0, c1, rss)
}

/// Fit `J(ε) = J_∞ + D ε^d`: `J_∞` and `D` by linear least squares for each
/// trial `d`, `d` by golden-section search on the residual.
pub fn fit_expansion(eps: &[f64], energies: &[f64]) -> Result<ExpansionFit> {
    if eps.len() < 3 || eps.len() != energies.len() {
        return Err(Error::domain("expansion fit needs at least three (eps, J) pairs"));
    }
    let rss = |d: f64| {
        let x: Vec<f64> = eps.iter().map(|e| e.powf(d)).collect();
        affine_fit(&x, energies).2
    };
    // coarse scan, then golden refinement around the best bracket
    let grid: Vec<f64> = (1..=80).map(|i| 0.05 * i as f64).collect();
    let best = grid.iter().copied().min_by(|a, b| rss(*a).total_cmp(&rss(*b))).unwrap_or(1.0);
    let (mut lo, mut hi) = ((best - 0.05).max(1e-3), best + 0.05);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if rss(x1) < rss(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let d = 0.5 * (lo + hi);
    let x: Vec<f64> = eps.iter().map(|e| e.powf(d)).collect();
    let (c0, c1, res) = affine_fit(&x, energies);
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    let gaps: Vec<f64> = order.iter().map(|&i| (energies[i] - c0).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    Ok(ExpansionFit {
        slope: d,
        mu_limit: c0,
        coefficient: c1,
        energies: energies.to_vec(),
        rel_rms: (res / eps.len() as f64).sqrt() / c0.abs(),
        monotone,
    })
}

/// `J₀(η u_ε)` over `eps_list` on the domain of `forms`, fitted by [`fit_expansion`].
pub fn energy_expansion_check(
    forms: &AssembledForms,
    params: &ProblemParams,
    u: &RadialField,
    eta: &RadialField,
    eps_list: &[f64],
    windows: &FitWindows,
) -> Result<ExpansionFit> {
    let p0 = params.with_lambda(0.0)?;
    let grid = forms.grid();
    let energies = eps_list
        .iter()
        .map(|&eps| {
            let ue = bubble(grid, u, eps, params, windows)?;
            let v: Vec<f64> = ue.values().iter().zip(eta.values()).map(|(a, b)| a * b).collect();
            rayleigh_quotient(forms, &p0, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    fit_expansion(eps_list, &energies)
}

/// Verdict of the strict-inequality existence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExistenceVerdict {
    ExtremalsExist,
    Inconclusive,
}

/// `ExtremalsExist` when `mu_domain < mu_rn·(1 − rel_tol)`.
pub fn existence_test(mu_domain: f64, mu_rn: f64, rel_tol: f64) -> ExistenceVerdict {
    if mu_domain < mu_rn * (1.0 - rel_tol) {
        ExistenceVerdict::ExtremalsExist
    } else {
        ExistenceVerdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialops::assemble;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    #[test]
    fn exact_power_law_fits_perfectly() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-3, 1e3, 200).unwrap());
        let u = RadialField::from_fn(grid, |r| 2.5 * r.powf(-0.7)).unwrap();
        let f = fit_exponents(&u, (0.2, 0.3), (0.7, 0.8)).unwrap();
        assert_relative_eq!(f.beta0, 0.7, max_relative = 1e-12);
        assert_relative_eq!(f.betainf, 0.7, max_relative = 1e-12);
        assert_relative_eq!(f.lambda0, 2.5, max_relative = 1e-10);
        assert_relative_eq!(f.fit_r2, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn two_power_profile_exponents_emerge_at_extremes() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-8, 1e8, 400).unwrap());
        let u = RadialField::from_fn(grid, |r| 1.0 / (r.powf(0.3) + r.powf(1.7))).unwrap();
        let mid = fit_exponents(&u, (0.3, 0.4), (0.6, 0.7)).unwrap();
        let far = fit_exponents(&u, (0.0, 0.1), (0.9, 1.0)).unwrap();
        assert!((far.beta0 - 0.3).abs() < (mid.beta0 - 0.3).abs());
        assert!((far.betainf - 1.7).abs() < (mid.betainf - 1.7).abs());
        assert!((far.beta0 - 0.3).abs() < 1e-5);
    }

    #[test]
    fn fit_rejects_nonpositive_values() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-3, 1.0, 50).unwrap());
        let u = RadialField::from_fn(grid, |r| r - 0.01).unwrap();
        assert!(fit_exponents(&u, (0.0, 0.3), (0.7, 0.8)).is_err());
    }

    #[test]
    fn lambda_1_matches_dense_eigensolver() {
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.2, 0.0).unwrap();
        let grid = Arc::new(RadialGrid::new(3.0, 1e-2, 1.0, 20).unwrap());
        let forms = assemble(grid, &p).unwrap();
        let (lam, field) = lambda_1(&forms, &p).unwrap();
        let q = forms.operator_matrix(p.gamma(), 0.0);
        let s = forms.mass().map(|m| 1.0 / m.sqrt());
        let sym = DMatrix::from_fn(20, 20, |i, j| s[i] * q[(i, j)] * s[j]);
        let eig = SymmetricEigen::new(sym);
        assert_relative_eq!(lam, eig.eigenvalues.min(), max_relative = 1e-10);
        assert!(field.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn lambda_1_decreases_in_gamma() {
        let p = ProblemParams::new(2.0, 1.0, 0.5, 0.0, 0.0).unwrap();
        let grid = Arc::new(RadialGrid::new(2.0, 1e-4, 1.0, 120).unwrap());
        let forms = assemble(grid, &p).unwrap();
        let gh = p.hardy_constant();
        let lams: Vec<f64> =
            [0.0, 0.3, 0.6, 0.9].iter().map(|f| lambda_1(&forms, &p.with_gamma(f * gh).unwrap()).unwrap().0).collect();
        assert!(lams.windows(2).all(|w| w[1] < w[0]) && lams[3] > 0.0);
    }

    #[test]
    fn minimizer_descends_and_satisfies_euler_lagrange() {
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.2, 0.0).unwrap();
        let grid = Arc::new(RadialGrid::new(3.0, 1e-4, 1e4, 240).unwrap());
        let forms = assemble(grid, &p).unwrap();
        let res = minimize_mu(&forms, &p, None, &MinimizeOptions::default()).unwrap();
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.mu > 0.0);
        assert_relative_eq!(res.kappa, res.mu, max_relative = 1e-8);
        assert!(res.el_residual < 1e-3, "EL residual {}", res.el_residual);
        let w = sobolev_weights(forms.grid(), p.s());
        let b: f64 = sobolev_norm(&w, &DVector::from_column_slice(res.field.values()), p.crit_exponent());
        assert_relative_eq!(b, 1.0, max_relative = 1e-10);
        assert!(res.field.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn minimizer_rejects_bad_preconditions() {
        let p = ProblemParams::new(3.0, 1.0, 1.0, 0.2, 0.0).unwrap();
        let grid = Arc::new(RadialGrid::new(3.0, 1e-2, 1.0, 40).unwrap());
        let forms = assemble(grid, &p).unwrap();
        assert!(matches!(minimize_mu(&forms, &p, None, &MinimizeOptions::default()), Err(Error::Precondition(_))));
        let p = p.with_s(0.5).unwrap();
        let (lam1, _) = lambda_1(&forms, &p).unwrap();
        let p = p.with_lambda(1.01 * lam1).unwrap();
        assert!(matches!(minimize_mu(&forms, &p, None, &MinimizeOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn unit_bubble_is_identity() {
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.2, 0.0).unwrap();
        let grid = Arc::new(RadialGrid::new(3.0, 1e-3, 1e3, 100).unwrap());
        let u = default_profile(&grid, &p).unwrap();
        let windows = FitWindows { head: (0.0, 0.1), tail: (0.9, 1.0) };
        let b = bubble(&grid, &u, 1.0, &p, &windows).unwrap();
        for (x, y) in u.values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
        assert!(bubble(&grid, &u, 1e-30, &p, &windows).is_err());
    }

    #[test]
    fn expansion_fit_recovers_planted_law() {
        let eps: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        let j: Vec<f64> = eps.iter().map(|e| 3.0 + 0.7 * e.powf(1.3)).collect();
        let fit = fit_expansion(&eps, &j).unwrap();
        assert_relative_eq!(fit.slope, 1.3, max_relative = 1e-6);
        assert_relative_eq!(fit.mu_limit, 3.0, max_relative = 1e-9);
        assert_relative_eq!(fit.coefficient, 0.7, max_relative = 1e-6);
        assert!(fit.monotone);
    }

    #[test]
    fn existence_threshold_logic() {
        assert_eq!(existence_test(0.9, 1.0, 0.01), ExistenceVerdict::ExtremalsExist);
        assert_eq!(existence_test(1.0 - 1e-4, 1.0, 0.01), ExistenceVerdict::Inconclusive);
    }

    #[test]
    fn cutoff_shape() {
        let grid = Arc::new(RadialGrid::new(3.0, 1e-3, 1.0, 100).unwrap());
        let eta = cutoff(&grid, 0.2).unwrap();
        for (r, v) in grid.nodes().iter().zip(eta.values()) {
            assert!((0.0..=1.0).contains(v));
            if *r <= 0.2 {
                assert_eq!(*v, 1.0);
            }
            if *r >= 0.4 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
