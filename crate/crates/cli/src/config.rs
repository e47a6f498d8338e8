//! Run configuration: JSON on disk, every default materialized on load.

use std::path::Path;

use frachs::extremal::{FitWindows, MinimizeOptions};
use frachs::mass::MassFitOptions;
use frachs::{ProblemParams, RadialGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ProblemParams,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub rn_grid: LatticeSpec,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub mass: MassSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// The ball `B_R`: `count` log-spaced nodes on `[r_min, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { count: 400, r_min: 1e-6, r_max: 1.0 }
    }
}

impl GridSpec {
    pub fn build(&self, n: f64) -> frachs::Result<RadialGrid> {
        RadialGrid::new(n, self.r_min, self.r_max, self.count)
    }
}

/// Large ball standing in for `ℝⁿ`, on a decade lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub r_max: f64,
    pub decades: u32,
    pub per_decade: u32,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { r_max: 1e3, decades: 40, per_decade: 24 }
    }
}

impl LatticeSpec {
    pub fn build(&self, n: f64) -> frachs::Result<RadialGrid> {
        RadialGrid::decade_lattice(n, self.r_max, self.decades, self.per_decade)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The ball of `grid`.
    Ball,
    /// The `rn_grid` truncation of `ℝⁿ`.
    Rn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub domain: Domain,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub head_window: (f64, f64),
    pub tail_window: (f64, f64),
}

impl Default for SolveSpec {
    fn default() -> Self {
        let m = MinimizeOptions::default();
        Self {
            domain: Domain::Ball,
            max_iter: m.max_iter,
            rel_tol: m.rel_tol,
            grad_tol: m.grad_tol,
            head_window: m.windows.head,
            tail_window: m.windows.tail,
        }
    }
}

impl SolveSpec {
    pub fn windows(&self) -> FitWindows {
        FitWindows { head: self.head_window, tail: self.tail_window }
    }

    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions { max_iter: self.max_iter, rel_tol: self.rel_tol, grad_tol: self.grad_tol, windows: self.windows() }
    }
}

/// Rows of the constants table: every `(n, α)` case crossed with every `γ`.
/// Empty lists fall back to the values in `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub cases: Vec<(f64, f64)>,
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSpec {
    /// Cutoff radius `δ` as a fraction of `R` (`η = 1` on `[0, δ]`, `0` beyond `2δ`).
    pub cutoff: f64,
    pub window: (f64, f64),
    pub hole_term: bool,
    pub remainder_terms: usize,
    pub max_drift: f64,
    pub min_r2: f64,
    /// Relative boundary layer excluded from the positivity check.
    pub boundary: f64,
    /// Coefficient planted by the manufactured-solution check.
    pub planted: f64,
    /// Relative residual target of the conjugate-gradient cross-check.
    pub pcg_tol: f64,
}

impl Default for MassSpec {
    fn default() -> Self {
        let f = MassFitOptions::default();
        Self {
            cutoff: 0.25,
            window: f.window,
            hole_term: f.hole_term,
            remainder_terms: f.remainder_terms,
            max_drift: f.max_drift,
            min_r2: f.min_r2,
            boundary: 0.05,
            planted: 0.7,
            pcg_tol: 1e-12,
        }
    }
}

impl MassSpec {
    pub fn fit_options(&self) -> MassFitOptions {
        MassFitOptions {
            window: self.window,
            hole_term: self.hole_term,
            remainder_terms: self.remainder_terms,
            max_drift: self.max_drift,
            min_r2: self.min_r2,
        }
    }
}

/// `γ` values as fractions of `γ_H`, `λ` values as fractions of `λ₁(γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub gamma_fractions: Vec<f64>,
    pub lambda_fractions: Vec<f64>,
    /// Relative margin for the `μ(Ω) < μ(ℝⁿ)` comparison column.
    pub existence_rel_tol: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            gamma_fractions: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            lambda_fractions: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            existence_rel_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "frachs-out".into() }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with every field present.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
