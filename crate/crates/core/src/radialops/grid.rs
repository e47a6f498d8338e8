use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-uniform radial nodes `r_k = r_min·e^{kh}`, `k = 0..N`, with `r_{N-1} = R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n: f64,
    log_r_min: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Grid on `[r_min, r_max]` with `count` nodes.
    pub fn new(n: f64, r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::Configuration(format!("need 0 < r_min < R, got r_min = {r_min}, R = {r_max}")));
        }
        if count < 3 {
            return Err(Error::Configuration(format!("need at least 3 nodes, got {count}")));
        }
        let h = (r_max / r_min).ln() / (count - 1) as f64;
        Self::from_spacing(n, r_min, h, count)
    }

    /// Grid ending at `r_max` with spacing `ln 10 / per_decade` over `decades`
    /// decades. Two such grids with equal `per_decade` whose `r_max` differ by a
    /// power of ten share one lattice, so dilations by lattice steps are exact shifts.
    pub fn decade_lattice(n: f64, r_max: f64, decades: u32, per_decade: u32) -> Result<Self> {
        if decades == 0 || per_decade == 0 {
            return Err(Error::Configuration("decade lattice needs positive decades and points per decade".into()));
        }
        let h = std::f64::consts::LN_10 / per_decade as f64;
        let steps = (decades * per_decade) as usize;
        let r_min = (r_max.ln() - steps as f64 * h).exp();
        Self::from_spacing(n, r_min, h, steps + 1)
    }

    /// Grid with `count` nodes starting at `r_min` with log-spacing `h`.
    pub fn from_spacing(n: f64, r_min: f64, h: f64, count: usize) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::Configuration(format!("dimension must be >= 1, got {n}")));
        }
        if !(r_min > 0.0) || !(h > 0.0) || !h.is_finite() || count < 3 {
            return Err(Error::Configuration(format!(
                "invalid grid: r_min = {r_min}, h = {h}, N = {count}"
            )));
        }
        let log_r_min = r_min.ln();
        let nodes: Vec<f64> = (0..count).map(|k| (log_r_min + k as f64 * h).exp()).collect();
        let weights = product_weights(n, log_r_min, h, count);
        Ok(Self { n, log_r_min, h, nodes, weights })
    }

    pub fn dim(&self) -> f64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Spacing in `ln r`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `w_k` with `Σ w_k f(r_k) ≈ ∫_{r_min}^R f(r) r^{n-1} dr`, exact for
    /// nodal interpolants that are piecewise linear in `ln r`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `ln r` at lattice index `k` (any integer, inside the grid or not).
    pub fn log_node(&self, k: i64) -> f64 {
        self.log_r_min + k as f64 * self.h
    }

    /// Fractional lattice index of radius `r`.
    pub fn index_of(&self, r: f64) -> f64 {
        (r.ln() - self.log_r_min) / self.h
    }

    /// Node range `[lo, hi)` covering the fractions `[f0, f1]` of the log-range.
    pub fn window(&self, f0: f64, f1: f64) -> std::ops::Range<usize> {
        let last = (self.len() - 1) as f64;
        let lo = (f0.clamp(0.0, 1.0) * last).ceil() as usize;
        let hi = ((f1.clamp(0.0, 1.0) * last).floor() as usize + 1).min(self.len());
        lo..hi.max(lo)
    }

    /// The grid reflected by `r ↦ 1/r`.
    pub fn reflected(&self) -> RadialGrid {
        let r_min = 1.0 / self.r_max();
        Self::from_spacing(self.n, r_min, self.h, self.len()).expect("reflection of a valid grid")
    }

    /// Same lattice restricted to nodes `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<RadialGrid> {
        if range.end > self.len() || range.len() < 3 {
            return Err(Error::Configuration(format!("invalid grid slice {range:?}")));
        }
        Self::from_spacing(self.n, self.nodes[range.start], self.h, range.len())
    }
}

fn product_weights(n: f64, log_r_min: f64, h: f64, count: usize) -> Vec<f64> {
    let x = n * h;
    // ∫ hat_k(t) e^{nt} dt for the hat functions of the log lattice
    let interior = if x < 1e-4 { h * (1.0 + x * x / 12.0) } else { (2.0 * x.cosh() - 2.0) / (n * n * h) };
    let first = if x < 1e-4 { h * (0.5 + x / 6.0) } else { (x.exp_m1() - x) / (n * n * h) };
    let last = if x < 1e-4 { h * (0.5 - x / 6.0) } else { ((-x).exp_m1() + x) / (n * n * h) };
    (0..count)
        .map(|k| {
            let c = if k == 0 {
                first
            } else if k == count - 1 {
                last
            } else {
                interior
            };
            c * (n * (log_r_min + k as f64 * h)).exp()
        })
        .collect()
}

/// Values of a radial function at the nodes of a grid; zero outside `[r_min, R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Configuration(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite field value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    /// Nodewise map.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        self.with_values(values)
    }

    /// `∫ u(|x|) dx` over the grid's annulus.
    pub fn integral(&self) -> f64 {
        crate::specfun::sphere_area(self.grid.dim())
            * self.grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_reproduce_shell_volume() {
        for &n in &[1.0, 2.0, 2.5, 3.0, 7.0] {
            let g = RadialGrid::new(n, 1e-6, 2.0, 400).unwrap();
            let sum: f64 = g.weights().iter().sum();
            let exact = (2f64.powf(n) - 1e-6f64.powf(n)) / n;
            assert_relative_eq!(sum, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn endpoints_and_spacing() {
        let g = RadialGrid::new(3.0, 1e-3, 1e3, 101).unwrap();
        assert_relative_eq!(g.r_min(), 1e-3, max_relative = 1e-14);
        assert_relative_eq!(g.r_max(), 1e3, max_relative = 1e-12);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = RadialGrid::new(2.0, 1e-2, 5.0, 50).unwrap();
        let back = g.reflected().reflected();
        for (a, b) in g.nodes().iter().zip(back.nodes()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn window_covers_requested_fraction() {
        let g = RadialGrid::new(3.0, 1e-3, 1e3, 401).unwrap();
        let w = g.window(0.2, 0.3);
        assert_eq!(w, 80..121);
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = Arc::new(RadialGrid::new(3.0, 0.1, 1.0, 10).unwrap());
        assert!(RadialField::new(g.clone(), vec![0.0; 9]).is_err());
        let mut v = vec![0.0; 10];
        v[3] = f64::NAN;
        assert!(RadialField::new(g, v).is_err());
    }

    #[test]
    fn bad_grids_are_configuration_errors() {
        assert!(matches!(RadialGrid::new(3.0, 0.0, 1.0, 10), Err(Error::Configuration(_))));
        assert!(matches!(RadialGrid::new(3.0, 1.0, 0.5, 10), Err(Error::Configuration(_))));
        assert!(matches!(RadialGrid::new(3.0, 0.1, 1.0, 2), Err(Error::Configuration(_))));
    }
}
