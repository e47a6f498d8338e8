//! The five subcommands.

use std::path::PathBuf;
use std::sync::Arc;

use frachs::extremal::{cutoff, existence_test, lambda_1, minimize_mu, ExistenceVerdict};
use frachs::mass::{
    compute_mass, corrector_agreement, manufactured_check, mass_criterion, positivity_check, solve_corrector_with,
    table_verdict, CorrectorSolver, DiscreteExponents, MassFit, MassVerdict, Regime,
};
use frachs::radialops::{ground_state_identity_gap, kernel_for, power_law_residual};
use frachs::{specfun, AssembledForms, ProblemParams, RadialField};
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::load_or_assemble;
use crate::config::Domain;
use crate::output::{num, opt, OutDir};
use crate::{CliError, Command, RunConfig};

pub struct RunOptions {
    pub manufactured: bool,
    /// `None` disables the forms cache.
    pub cache_dir: Option<PathBuf>,
}

pub const CONSTANTS_HEADER: [&str; 9] =
    ["n", "alpha", "s", "gamma", "gamma_H", "gamma_crit", "beta_minus", "beta_plus", "crit_exponent"];

pub const SCAN_HEADER: [&str; 14] = [
    "gamma_fraction",
    "lambda_fraction",
    "gamma",
    "lambda",
    "regime",
    "lambda_1",
    "mu_domain",
    "mu_rn",
    "mass",
    "mass_uncertainty",
    "mass_verdict",
    "verdict",
    "strict_inequality",
    "error",
];

pub fn dispatch(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<String>, CliError> {
    let mut out = OutDir::create(&cfg.output.dir)?;
    let lines = match cmd {
        Command::Constants => constants(cfg, &mut out)?,
        Command::Solve => solve(cfg, opts, &mut out)?,
        Command::Mass => mass(cfg, opts, &mut out)?,
        Command::Scan => scan(cfg, opts, &mut out)?,
        Command::KernelSelftest => kernel_selftest(cfg, &mut out)?,
    };
    out.finish(cmd.name(), cfg)?;
    Ok(lines)
}

fn ball_forms(cfg: &RunConfig, opts: &RunOptions, params: &ProblemParams) -> Result<AssembledForms, CliError> {
    let grid = Arc::new(cfg.grid.build(params.n())?);
    Ok(load_or_assemble(opts.cache_dir.as_deref(), grid, params)?)
}

fn rn_forms(cfg: &RunConfig, opts: &RunOptions, params: &ProblemParams) -> Result<AssembledForms, CliError> {
    let grid = Arc::new(cfg.rn_grid.build(params.n())?);
    Ok(load_or_assemble(opts.cache_dir.as_deref(), grid, params)?)
}

fn constants(cfg: &RunConfig, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let p = cfg.params;
    let cases = if cfg.constants.cases.is_empty() { vec![(p.n(), p.alpha())] } else { cfg.constants.cases.clone() };
    let gammas = if cfg.constants.gammas.is_empty() { vec![p.gamma()] } else { cfg.constants.gammas.clone() };
    let mut rows = Vec::new();
    for &(n, alpha) in &cases {
        for &gamma in &gammas {
            let q = ProblemParams::new(n, alpha, p.s(), gamma, 0.0)?;
            let (bm, bp) = q.beta_pm();
            rows.push(
                [n, alpha, q.s(), gamma, q.hardy_constant(), q.gamma_crit(), bm, bp, q.crit_exponent()].map(num).to_vec(),
            );
        }
    }
    let count = rows.len();
    out.csv("constants.csv", &CONSTANTS_HEADER, rows)?;
    Ok(vec![format!("constants: {count} rows")])
}

#[derive(Serialize)]
struct SolveSummary {
    domain: Domain,
    params: ProblemParams,
    nodes: usize,
    r_min: f64,
    r_max: f64,
    lambda_1: f64,
    mu: f64,
    kappa: f64,
    beta_minus: f64,
    beta_plus: f64,
    fitted_beta0: f64,
    fitted_betainf: f64,
    lambda0: f64,
    lambdainf: f64,
    fit_r2: f64,
    iterations: usize,
    residual: f64,
    el_residual: f64,
}

fn solve(cfg: &RunConfig, opts: &RunOptions, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let p = cfg.params;
    let forms = match cfg.solve.domain {
        Domain::Ball => ball_forms(cfg, opts, &p)?,
        Domain::Rn => rn_forms(cfg, opts, &p)?,
    };
    let (lam1, _) = lambda_1(&forms, &p)?;
    let res = minimize_mu(&forms, &p, None, &cfg.solve.options())?;
    let grid = forms.grid();
    let (bm, bp) = p.beta_pm();
    let summary = SolveSummary {
        domain: cfg.solve.domain,
        params: p,
        nodes: grid.len(),
        r_min: grid.r_min(),
        r_max: grid.r_max(),
        lambda_1: lam1,
        mu: res.mu,
        kappa: res.kappa,
        beta_minus: bm,
        beta_plus: bp,
        fitted_beta0: res.fitted_beta0,
        fitted_betainf: res.fitted_betainf,
        lambda0: res.lambda0,
        lambdainf: res.lambdainf,
        fit_r2: res.fit_r2,
        iterations: res.iterations,
        residual: res.residual,
        el_residual: res.el_residual,
    };
    let rows = grid.nodes().iter().zip(res.field.values()).map(|(&r, &u)| vec![num(r), num(u)]);
    out.csv("solution.csv", &["r", "u"], rows)?;
    out.json("summary.json", &summary)?;
    Ok(vec![format!("mu = {}", num(res.mu))])
}

#[derive(Serialize)]
struct MassSummary {
    params: ProblemParams,
    nodes: usize,
    r_min: f64,
    r_max: f64,
    cutoff_radius: f64,
    mass: f64,
    uncertainty: f64,
    verdict: &'static str,
    margin: f64,
    trusted: bool,
    positive_profile: bool,
    lambda_1: f64,
    exponents: DiscreteExponents,
    fit: MassFit,
    /// Relative difference between the Cholesky and conjugate-gradient correctors.
    solver_agreement: f64,
}

fn mass(cfg: &RunConfig, opts: &RunOptions, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let p = cfg.params;
    let forms = ball_forms(cfg, opts, &p)?;
    let grid = forms.grid().clone();
    let delta = cfg.mass.cutoff * grid.r_max();
    let eta = cutoff(&grid, delta)?;
    let fit_opts = cfg.mass.fit_options();
    let res = compute_mass(&forms, &p, &eta, &fit_opts)?;
    let crit = mass_criterion(&p, &res)?;
    let pcg = solve_corrector_with(&forms, &p, &res.rhs, CorrectorSolver::Pcg, cfg.mass.pcg_tol)?;
    let summary = MassSummary {
        params: p,
        nodes: grid.len(),
        r_min: grid.r_min(),
        r_max: grid.r_max(),
        cutoff_radius: delta,
        mass: res.mass,
        uncertainty: res.uncertainty,
        verdict: crit.verdict.as_str(),
        margin: crit.margin,
        trusted: res.trusted(),
        positive_profile: positivity_check(&res.profile, cfg.mass.boundary),
        lambda_1: res.lambda_1,
        exponents: res.exponents,
        fit: res.fit.clone(),
        solver_agreement: corrector_agreement(&res.corrector, &pcg, res.exponents.beta_minus),
    };
    let rows = (0..grid.len()).map(|k| {
        vec![
            num(grid.nodes()[k]),
            num(eta.values()[k]),
            num(res.rhs.values()[k]),
            num(res.corrector.values()[k]),
            num(res.profile.values()[k]),
        ]
    });
    out.csv("mass_profile.csv", &["r", "eta", "rhs", "corrector", "profile"], rows)?;
    out.json("mass.json", &summary)?;
    let mut lines = Vec::new();
    if opts.manufactured {
        let rep = manufactured_check(&forms, &p, &eta, cfg.mass.planted, &fit_opts)?;
        out.json("manufactured.json", &rep)?;
        lines.push(format!(
            "manufactured: planted {} recovered {} rel_error {:.3e}",
            num(rep.planted),
            num(rep.recovered),
            rep.rel_error
        ));
    }
    lines.push(format!("mass = {} +/- {:.3e}", num(res.mass), res.uncertainty));
    lines.push(crit.verdict.as_str().to_string());
    Ok(lines)
}

/// One `(γ, λ)` cell of the scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub gamma_fraction: f64,
    pub lambda_fraction: f64,
    pub gamma: f64,
    pub lambda: Option<f64>,
    pub regime: Regime,
    pub lambda_1: Option<f64>,
    pub mu_domain: Option<f64>,
    pub mu_rn: Option<f64>,
    pub mass: Option<f64>,
    pub mass_uncertainty: Option<f64>,
    pub mass_verdict: Option<MassVerdict>,
    pub verdict: Option<ExistenceVerdict>,
    pub strict_inequality: Option<ExistenceVerdict>,
    pub error: Option<String>,
}

pub fn verdict_str(v: ExistenceVerdict) -> &'static str {
    match v {
        ExistenceVerdict::ExtremalsExist => "EXTREMALS_EXIST",
        ExistenceVerdict::Inconclusive => "INCONCLUSIVE",
    }
}

impl ScanRow {
    fn record(&self) -> Vec<String> {
        vec![
            num(self.gamma_fraction),
            num(self.lambda_fraction),
            num(self.gamma),
            opt(self.lambda),
            self.regime.as_str().into(),
            opt(self.lambda_1),
            opt(self.mu_domain),
            opt(self.mu_rn),
            opt(self.mass),
            opt(self.mass_uncertainty),
            self.mass_verdict.map(|v| v.as_str().to_string()).unwrap_or_default(),
            self.verdict.map(|v| verdict_str(v).to_string()).unwrap_or_default(),
            self.strict_inequality.map(|v| verdict_str(v).to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

struct GammaColumn {
    params: ProblemParams,
    lambda_1: f64,
    mu_rn: f64,
}

/// Every row of the scan, in `γ`-major order. Failures stay inside their rows.
pub fn scan_rows(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<ScanRow>, CliError> {
    let base = cfg.params.with_lambda(0.0)?;
    let ball = ball_forms(cfg, opts, &base)?;
    let rn = rn_forms(cfg, opts, &base)?;
    let gh = base.hardy_constant();
    let sc = &cfg.scan;
    let columns: Vec<(f64, frachs::Result<GammaColumn>)> = sc
        .gamma_fractions
        .par_iter()
        .map(|&gf| {
            let col = (|| {
                let params = base.with_gamma(gf * gh)?;
                let (lambda_1, _) = lambda_1(&ball, &params)?;
                let mu_rn = minimize_mu(&rn, &params, None, &cfg.solve.options())?.mu;
                Ok(GammaColumn { params, lambda_1, mu_rn })
            })();
            (gf, col)
        })
        .collect();
    let cells: Vec<(usize, f64)> =
        (0..columns.len()).flat_map(|i| sc.lambda_fractions.iter().map(move |&lf| (i, lf))).collect();
    let eta = cutoff(ball.grid(), cfg.mass.cutoff * ball.grid().r_max())?;
    let rows = cells
        .par_iter()
        .map(|&(i, lf)| {
            let (gf, col) = &columns[i];
            let gamma = gf * gh;
            let mut row = ScanRow {
                gamma_fraction: *gf,
                lambda_fraction: lf,
                gamma,
                lambda: None,
                regime: Regime::Subcritical,
                lambda_1: None,
                mu_domain: None,
                mu_rn: None,
                mass: None,
                mass_uncertainty: None,
                mass_verdict: None,
                verdict: None,
                strict_inequality: None,
                error: None,
            };
            let col = match col {
                Ok(c) => c,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            row.regime = Regime::of(&col.params);
            row.lambda_1 = Some(col.lambda_1);
            row.mu_rn = Some(col.mu_rn);
            if let Err(e) = fill_row(&mut row, cfg, &ball, &eta, col, lf) {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    Ok(rows)
}

fn fill_row(
    row: &mut ScanRow,
    cfg: &RunConfig,
    ball: &AssembledForms,
    eta: &RadialField,
    col: &GammaColumn,
    lf: f64,
) -> frachs::Result<()> {
    let p = col.params.with_lambda(lf * col.lambda_1)?;
    row.lambda = Some(p.lambda());
    let mass_verdict = match row.regime {
        // the subcritical branch of the table never needs the mass
        Regime::Subcritical => None,
        Regime::Critical => {
            let res = compute_mass(ball, &p, eta, &cfg.mass.fit_options())?;
            row.mass = Some(res.mass);
            row.mass_uncertainty = Some(res.uncertainty);
            Some(mass_criterion(&p, &res)?.verdict)
        }
    };
    row.mass_verdict = mass_verdict;
    row.verdict = Some(table_verdict(&p, col.lambda_1, mass_verdict));
    let mu = minimize_mu(ball, &p, None, &cfg.solve.options())?.mu;
    row.mu_domain = Some(mu);
    row.strict_inequality = Some(existence_test(mu, col.mu_rn, cfg.scan.existence_rel_tol));
    Ok(())
}

fn scan(cfg: &RunConfig, opts: &RunOptions, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let rows = scan_rows(cfg, opts)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let total = rows.len();
    out.csv("scan.csv", &SCAN_HEADER, rows.iter().map(ScanRow::record))?;
    if total > 0 && failed == total {
        return Err(CliError::Failed(format!("scan: all {total} rows failed")));
    }
    Ok(vec![format!("scan: {total} rows, {failed} failed")])
}

/// One line of the self-test.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl SelfTestCheck {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Power-law residuals at `β±(γ)`, lattice symbol against `Ψ`, and the
/// ground-state identity for a smooth bump, all on the configured ball.
pub fn selftest_checks(cfg: &RunConfig) -> Result<Vec<SelfTestCheck>, CliError> {
    let p = cfg.params;
    let grid = cfg.grid.build(p.n())?;
    let kernel = kernel_for(&grid, p.alpha())?;
    let gh = p.hardy_constant();
    let mut checks = Vec::new();
    for f in [0.25, 0.5, 0.75] {
        let q = p.with_gamma(f * gh)?;
        let (bm, bp) = q.beta_pm();
        for (label, beta) in [("beta_minus", bm), ("beta_plus", bp)] {
            checks.push(SelfTestCheck {
                name: format!("power_law_residual {label} gamma={f}*gamma_H"),
                value: power_law_residual(&grid, &q, beta)?,
                tolerance: 1e-2,
            });
            let psi = specfun::psi(q.n(), q.alpha(), beta)?;
            checks.push(SelfTestCheck {
                name: format!("lattice_symbol {label} gamma={f}*gamma_H"),
                value: ((kernel.symbol(beta) - psi) / psi).abs(),
                tolerance: 1e-2,
            });
        }
    }
    let q = p.with_gamma(0.5 * gh)?;
    let beta = q.beta_pm().0;
    let g = Arc::new(grid.clone());
    let mid = (g.r_min() * g.r_max()).sqrt().ln();
    let half = 0.25 * (g.r_max() / g.r_min()).ln();
    let bump = RadialField::from_fn(g.clone(), |r| {
        let x = (r.ln() - mid) / half;
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    })?;
    checks.push(SelfTestCheck {
        name: "ground_state_identity gamma=0.5*gamma_H".into(),
        value: ground_state_identity_gap(&grid, &q, beta, &bump)?,
        tolerance: 1e-2,
    });
    Ok(checks)
}

fn kernel_selftest(cfg: &RunConfig, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let checks = selftest_checks(cfg)?;
    let lines: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {} {:.3e} (tol {:.0e})", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance))
        .collect();
    let rows = checks.iter().map(|c| vec![c.name.clone(), num(c.value), num(c.tolerance), c.passed().to_string()]);
    out.csv("selftest.csv", &["check", "value", "tolerance", "passed"], rows)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        for l in &lines {
            eprintln!("{l}");
        }
        return Err(CliError::Failed(format!("kernel-selftest: {failed} of {} checks failed", checks.len())));
    }
    Ok(lines)
}
