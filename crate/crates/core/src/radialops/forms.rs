use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::grid::{RadialField, RadialGrid};
use super::kernel::KernelTable;
use crate::error::{Error, Result};
use crate::specfun::{self, sphere_area, ProblemParams};

/// Pure power law `coef · r^{−exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

/// How a field continues outside `[r_min, R]` when the operator is applied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Extension {
    /// Values on the hole `(0, r_min)`.
    pub inner: Option<PowerLaw>,
    /// Values beyond `R`.
    pub outer: Option<PowerLaw>,
}

impl Extension {
    pub const ZERO: Extension = Extension { inner: None, outer: None };

    pub fn power_law(exponent: f64) -> Self {
        let p = Some(PowerLaw { coef: 1.0, exponent });
        Extension { inner: p, outer: p }
    }

    fn value(&self, grid: &RadialGrid, k: i64) -> f64 {
        let law = if k < 0 { self.inner } else { self.outer };
        law.map_or(0.0, |p| p.coef * (-p.exponent * grid.log_node(k)).exp())
    }
}

/// Discrete forms on a grid: `u·G·u ≈ (C/2)∬(u(x)−u(y))²/|x−y|^{n+α}`
/// (zero extension), and diagonal weights for `∫u²/|x|^α`, `∫u²` and `∫|u|^p/|x|^s`.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    grid: Arc<RadialGrid>,
    params: ProblemParams,
    kernel: Arc<KernelTable>,
    gagliardo: DMatrix<f64>,
    hardy: DVector<f64>,
    mass: DVector<f64>,
    sobolev_weight: DVector<f64>,
}

/// Kernel table matching a grid's spacing.
pub fn kernel_for(grid: &RadialGrid, alpha: f64) -> Result<KernelTable> {
    KernelTable::new(grid.dim(), alpha, grid.h(), grid.len())
}

/// Assemble all forms for `grid` and the order/weights of `params`.
pub fn assemble(grid: Arc<RadialGrid>, params: &ProblemParams) -> Result<AssembledForms> {
    check_dim(&grid, params)?;
    let kernel = Arc::new(kernel_for(&grid, params.alpha())?);
    let a = params.scaling_exponent();
    let gagliardo = form_matrix(&grid, &kernel, a);
    let hardy = diag_weight(&grid, params.n() - params.alpha());
    let mass = diag_weight(&grid, params.n());
    AssembledForms::from_parts(grid, params, kernel, gagliardo, hardy, mass)
}

fn check_dim(grid: &RadialGrid, params: &ProblemParams) -> Result<()> {
    if grid.dim() != params.n() {
        return Err(Error::Configuration(format!(
            "grid dimension {} does not match params dimension {}",
            grid.dim(),
            params.n()
        )));
    }
    Ok(())
}

/// `S_n r_k^{power} h`: trapezoid weights in `ln r`.
fn diag_weight(grid: &RadialGrid, power: f64) -> DVector<f64> {
    let sn = sphere_area(grid.dim());
    DVector::from_iterator(grid.len(), grid.nodes().iter().map(|r| sn * r.powf(power) * grid.h()))
}

/// Form matrix for `(C S_n / 2)∬ e^{e(t+s)} κ(t−s) (v(t)−v(s))² dt ds` with `v = 0`
/// off the grid. `e = (n−α)/2` gives the Gagliardo form itself.
pub(crate) fn form_matrix(grid: &RadialGrid, kernel: &KernelTable, e: f64) -> DMatrix<f64> {
    let (n, alpha, h) = (grid.dim(), kernel.alpha(), grid.h());
    let len = grid.len();
    let pref = sphere_area(n) * specfun::c_n_alpha(n, alpha).expect("validated order");
    let t: Vec<f64> = (0..len as i64).map(|k| grid.log_node(k)).collect();
    let half_weight = |k: i64| (2.0 * e * (grid.log_node(k) + 0.5 * h)).exp();
    let corr = pref * kernel.omega() * h.powf(1.0 - alpha);
    let rows: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|k| {
            let mut row = vec![0.0; len];
            let mut diag = 0.0;
            for l in 0..len {
                if l != k {
                    let v = pref * h * h * (e * (t[k] + t[l])).exp() * kernel.get(k.abs_diff(l));
                    row[l] = -v;
                    diag += v;
                }
            }
            let exterior = kernel.weighted_sum(e, len - k) + kernel.weighted_sum(-e, k + 1);
            diag += pref * h * (2.0 * e * t[k]).exp() * exterior;
            let (up, down) = (half_weight(k as i64), half_weight(k as i64 - 1));
            diag += corr * (up + down);
            if k + 1 < len {
                row[k + 1] -= corr * up;
            }
            if k > 0 {
                row[k - 1] -= corr * down;
            }
            row[k] = diag;
            row
        })
        .collect();
    // row-major data of a symmetric matrix is also its column-major data
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let mut m = DMatrix::from_vec(len, len, data);
    for i in 0..len {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

impl AssembledForms {
    fn from_parts(
        grid: Arc<RadialGrid>,
        params: &ProblemParams,
        kernel: Arc<KernelTable>,
        gagliardo: DMatrix<f64>,
        hardy: DVector<f64>,
        mass: DVector<f64>,
    ) -> Result<Self> {
        let sobolev_weight = diag_weight(&grid, params.n() - params.s());
        Ok(Self { grid, params: *params, kernel, gagliardo, hardy, mass, sobolev_weight })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn gagliardo(&self) -> &DMatrix<f64> {
        &self.gagliardo
    }

    pub fn hardy(&self) -> &DVector<f64> {
        &self.hardy
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn sobolev_weight(&self) -> &DVector<f64> {
        &self.sobolev_weight
    }

    /// Reuse the matrices with different `s`, `γ` or `λ` (same `n`, `α`).
    pub fn with_params(&self, params: &ProblemParams) -> Result<Self> {
        if params.n() != self.params.n() || params.alpha() != self.params.alpha() {
            return Err(Error::Configuration("forms can only be reused for the same (n, alpha)".into()));
        }
        Self::from_parts(
            self.grid.clone(),
            params,
            self.kernel.clone(),
            self.gagliardo.clone(),
            self.hardy.clone(),
            self.mass.clone(),
        )
    }

    /// `Q = G − γ·hardy − λ·mass`.
    pub fn operator_matrix(&self, gamma: f64, lambda: f64) -> DMatrix<f64> {
        let mut q = self.gagliardo.clone();
        for k in 0..q.nrows() {
            q[(k, k)] -= gamma * self.hardy[k] + lambda * self.mass[k];
        }
        q
    }

    /// Bilinear Gagliardo form `⟨u, v⟩`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        (&self.gagliardo * u).dot(&v)
    }

    /// Nodal values of `(−Δ)^{α/2}u` for the grid values continued by `ext`.
    pub fn apply_operator(&self, values: &[f64], ext: &Extension) -> Result<Vec<f64>> {
        apply_operator(&self.grid, &self.kernel, values, ext)
    }

    /// Write forms as CSV: header `r,hardy,mass,g0,…`, then one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["r".to_string(), "hardy".into(), "mass".into()];
        header.extend((0..self.grid.len()).map(|j| format!("g{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.grid.len() {
            let mut rec = vec![self.grid.nodes()[k].to_string(), self.hardy[k].to_string(), self.mass[k].to_string()];
            rec.extend(self.gagliardo.row(k).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read forms written by [`AssembledForms::write_csv`] for the same grid.
    pub fn read_csv<R: Read>(input: R, grid: Arc<RadialGrid>, params: &ProblemParams) -> Result<Self> {
        check_dim(&grid, params)?;
        let len = grid.len();
        let mut rdr = csv::Reader::from_reader(input);
        let mut gag = DMatrix::zeros(len, len);
        let mut hardy = DVector::zeros(len);
        let mut mass = DVector::zeros(len);
        let mut rows = 0;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if k >= len || rec.len() != len + 3 {
                return Err(Error::Parse(format!("form table row {k} has the wrong shape")));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| Error::Parse(format!("row {k} column {i}: {e}")))
            };
            let r = num(0)?;
            if (r - grid.nodes()[k]).abs() > 1e-12 * r {
                return Err(Error::Parse(format!("form table node {k} does not match the grid")));
            }
            hardy[k] = num(1)?;
            mass[k] = num(2)?;
            for j in 0..len {
                gag[(k, j)] = num(j + 3)?;
            }
            rows += 1;
        }
        if rows != len {
            return Err(Error::Parse(format!("form table has {rows} rows, expected {len}")));
        }
        let kernel = Arc::new(kernel_for(&grid, params.alpha())?);
        Self::from_parts(grid, params, kernel, gag, hardy, mass)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Lattice collocation of `(−Δ)^{α/2}` at the grid nodes.
pub(crate) fn apply_operator(grid: &RadialGrid, kernel: &KernelTable, values: &[f64], ext: &Extension) -> Result<Vec<f64>> {
    let len = grid.len();
    if values.len() != len {
        return Err(Error::Configuration("field length does not match grid".into()));
    }
    let (n, alpha, h) = (grid.dim(), kernel.alpha(), grid.h());
    if let Some(p) = ext.inner {
        if !(p.exponent < n) {
            return Err(Error::domain(format!("inner power law r^-{} is not locally integrable", p.exponent)));
        }
    }
    if let Some(p) = ext.outer {
        if !(p.exponent > -alpha) {
            return Err(Error::domain(format!("outer power law r^-{} grows too fast", p.exponent)));
        }
    }
    let a = 0.5 * (n - alpha);
    let p = 0.5 * (n + alpha);
    let c = specfun::c_n_alpha(n, alpha)?;
    let omega = kernel.omega();
    let t: Vec<f64> = (0..len as i64).map(|k| grid.log_node(k)).collect();
    let ea: Vec<f64> = t.iter().map(|&tk| (a * tk).exp()).collect();
    let at = |j: i64| -> f64 {
        if j < 0 || j >= len as i64 {
            ext.value(grid, j)
        } else {
            values[j as usize]
        }
    };
    let out = (0..len)
        .into_par_iter()
        .map(|k| {
            let uk = values[k];
            let mut acc = 0.0;
            for j in 0..len {
                if j != k {
                    acc += (uk - values[j]) * ea[j] * kernel.get(k.abs_diff(j));
                }
            }
            acc *= h;
            acc += uk * ea[k] * (kernel.weighted_sum(a, len - k) + kernel.weighted_sum(-a, k + 1));
            if let Some(pl) = ext.outer {
                let e = a - pl.exponent;
                acc -= pl.coef * (e * t[k]).exp() * kernel.weighted_sum(e, len - k);
            }
            if let Some(pl) = ext.inner {
                let e = a - pl.exponent;
                acc -= pl.coef * (e * t[k]).exp() * kernel.weighted_sum(-e, k + 1);
            }
            let ki = k as i64;
            let up = (2.0 * a * (t[k] + 0.5 * h)).exp();
            let down = (2.0 * a * (t[k] - 0.5 * h)).exp();
            let lap = up * (at(ki + 1) - uk) - down * (uk - at(ki - 1));
            acc -= omega * h.powf(-alpha) * lap / ea[k];
            c * (-p * t[k]).exp() * acc
        })
        .collect();
    Ok(out)
}

/// `w(r) = ∫_{ρ ∉ cells} K(r, ρ) ρ^{n−1} dρ`: the interaction of each node with the
/// complement of the grid's cells `[r_min e^{−h/2}, R e^{h/2}]`, as used by the assembler.
pub fn exterior_potential(grid: Arc<RadialGrid>, alpha: f64) -> Result<RadialField> {
    let kernel = kernel_for(&grid, alpha)?;
    let a = 0.5 * (grid.dim() - alpha);
    let len = grid.len();
    let values = (0..len)
        .map(|k| {
            let r = grid.nodes()[k];
            r.powf(-alpha) * (kernel.weighted_sum(a, len - k) + kernel.weighted_sum(-a, k + 1))
        })
        .collect();
    RadialField::new(grid, values)
}
