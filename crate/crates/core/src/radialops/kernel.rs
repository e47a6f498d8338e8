//! Radial reduction of the kernel `|x − y|^{−n−α}`.
//!
//! With `t = ln r`, `s = ln ρ` the angular integral factors as
//! `K(r, ρ) = (rρ)^{−(n+α)/2} κ(t − s)` where
//! `κ(τ) = |S^{n−2}| ∫_0^π [4 sinh²(τ/2) + 4 sin²(θ/2)]^{−(n+α)/2} sin^{n−2}θ dθ`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::{self, sphere_area};

/// Beyond this log-distance the kernel is replaced by its exponential asymptote.
pub(crate) const TAU_FAR: f64 = 36.0;

/// `κ(τ)` for `τ ≠ 0`.
pub fn log_kernel(n: f64, alpha: f64, tau: f64) -> f64 {
    let tau = tau.abs();
    let p = 0.5 * (n + alpha);
    let two_sinh = 2.0 * (0.5 * tau).sinh();
    if n == 1.0 {
        return two_sinh.powf(-1.0 - alpha) + (2.0 * (0.5 * tau).cosh()).powf(-1.0 - alpha);
    }
    if n == 3.0 {
        // (2 sinh)^{-1-α} − (2 cosh)^{-1-α} = (2 sinh)^{-1-α} (1 − tanh^{1+α})
        let q = 1.0 + alpha;
        let x = (-tau).exp();
        let ln_tanh = (-x).ln_1p() - x.ln_1p();
        let one_minus = -(q * ln_tanh).exp_m1();
        return 2.0 * PI / q * two_sinh.powf(-q) * one_minus;
    }
    let sigma = 0.5 * two_sinh;
    sphere_area(n - 1.0) * two_sinh.powf(-2.0 * p) * angular_factor(n, p, sigma)
}

// ∫_0^π (1 + sin²(θ/2)/σ²)^{−p} sin^{n−2}θ dθ
fn angular_factor(n: f64, p: f64, sigma: f64) -> f64 {
    let inv_s2 = 1.0 / (sigma * sigma);
    // θ = (π/2)·v^q flattens the sin^{n−2} endpoint singularity when n < 2;
    // the Jacobian is folded into the weight so that v = 0 stays finite
    let q = if n < 2.0 { 1.0 / (n - 1.0) } else { 1.0 };
    let weight = |v: f64| {
        let th = FRAC_PI_2 * v.powf(q);
        if n < 2.0 {
            let sinc = if th < 1e-8 { 1.0 } else { th.sin() / th };
            (th, sinc.powf(n - 2.0) * FRAC_PI_2.powf(n - 1.0) * q)
        } else {
            (th, th.sin().powf(n - 2.0) * FRAC_PI_2)
        }
    };
    let left = |v: f64| {
        let (th, w) = weight(v);
        let sh = (0.5 * th).sin();
        (1.0 + sh * sh * inv_s2).powf(-p) * w
    };
    // reflected half: θ = π − θ', sin²(θ/2) = cos²(θ'/2)
    let right = |v: f64| {
        let (th, w) = weight(v);
        let ch = (0.5 * th).cos();
        (1.0 + ch * ch * inv_s2).powf(-p) * w
    };
    let mut breaks = vec![0.0];
    let mut b = 2.0 * sigma;
    while b < FRAC_PI_2 {
        breaks.push((b / FRAC_PI_2).powf(1.0 / q));
        b *= 4.0;
    }
    breaks.push(1.0);
    let tol = 1e-13;
    quad::integrate_pieces(left, &breaks, 0.0, tol) + quad::integrate(right, 0.0, 1.0, 0.0, tol)
}

/// Bare angular integral `K(r, ρ) = ∫_{S^{n−1}} |r e − ρ ω|^{−(n+α)} dσ(ω)`.
pub fn angular_kernel(n: f64, alpha: f64, r: f64, rho: f64) -> Result<f64> {
    if !(r > 0.0) || !(rho > 0.0) {
        return Err(Error::domain(format!("radii must be positive, got r = {r}, rho = {rho}")));
    }
    if r == rho {
        return Err(Error::domain("angular kernel is singular on the diagonal r = rho"));
    }
    let tau = (r / rho).ln();
    Ok((r * rho).powf(-0.5 * (n + alpha)) * log_kernel(n, alpha, tau))
}

/// Leading coefficient `c₀` in `κ(τ) ~ c₀|τ|^{−1−α}` as `τ → 0`.
pub fn diagonal_coefficient(n: f64, alpha: f64) -> f64 {
    let lg = |x: f64| specfun::log_gamma(x).expect("positive argument");
    (0.5 * (n - 1.0) * PI.ln() + lg(0.5 * (1.0 + alpha)) - lg(0.5 * (n + alpha))).exp()
}

/// `κ(mh)` on the lattice `m = 0, 1, …` together with exact tail sums.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: f64,
    alpha: f64,
    h: f64,
    values: Vec<f64>,
    far: f64,
    omega: f64,
}

impl KernelTable {
    /// Tabulate `κ(mh)` for `1 ≤ m ≤ max(min_len, TAU_FAR/h)`.
    pub fn new(n: f64, alpha: f64, h: f64, min_len: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || !(n >= 1.0) {
            return Err(Error::domain(format!("kernel needs n >= 1 and 0 < alpha < 2, got n = {n}, alpha = {alpha}")));
        }
        if !(h > 0.0) || h > 0.5 {
            return Err(Error::Configuration(format!(
                "log-spacing h = {h} is too coarse for the diagonal correction (need 0 < h <= 0.5)"
            )));
        }
        let m_max = ((TAU_FAR / h).ceil() as usize).max(min_len);
        let mut values: Vec<f64> = (0..=m_max)
            .into_par_iter()
            .map(|m| if m == 0 { f64::NAN } else { log_kernel(n, alpha, m as f64 * h) })
            .collect();
        values[0] = f64::NAN;
        if let Some(m) = values.iter().skip(1).position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::numerical(format!("kernel evaluation failed at tau = {}", (m + 1) as f64 * h)));
        }
        let zeta = specfun::zeta(alpha - 1.0)?;
        let omega = -zeta * diagonal_coefficient(n, alpha);
        Ok(Self { n, alpha, h, values, far: sphere_area(n), omega })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> f64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Weight `ω = −ζ(α−1)c₀ > 0` of the second-difference correction that
    /// turns the punctured lattice sum into a consistent quadrature.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn m_max(&self) -> usize {
        self.values.len() - 1
    }

    /// `κ(mh)` for `m ≥ 1`.
    pub fn get(&self, m: usize) -> f64 {
        if m <= self.m_max() {
            self.values[m]
        } else {
            self.far * (-0.5 * (self.n + self.alpha) * m as f64 * self.h).exp()
        }
    }

    /// `h Σ_{m ≥ start} e^{e·mh} κ(mh)`, requires `e < (n+α)/2`.
    pub fn weighted_sum(&self, e: f64, start: usize) -> f64 {
        let start = start.max(1);
        let h = self.h;
        let mut acc = 0.0;
        for m in start..=self.m_max() {
            acc += (e * m as f64 * h).exp() * self.values[m];
        }
        let first_far = start.max(self.m_max() + 1);
        let rate = 0.5 * (self.n + self.alpha) - e;
        debug_assert!(rate > 0.0);
        acc += self.far * (-rate * first_far as f64 * h).exp() / -(-rate * h).exp_m1();
        h * acc
    }

    /// Lattice symbol `Ψ_h(b)`: the exact action of the discrete operator on `r^{−b}`.
    pub fn symbol(&self, b: f64) -> f64 {
        let (n, alpha, h) = (self.n, self.alpha, self.h);
        let a = 0.5 * (n - alpha);
        let c = specfun::c_n_alpha(n, alpha).expect("validated order");
        let mut acc = 0.0;
        for m in 1..=self.m_max() {
            let tau = m as f64 * h;
            acc += 4.0 * self.values[m] * (0.5 * (2.0 * a - b) * tau).sinh() * (0.5 * b * tau).sinh();
        }
        // asymptotic tail: S_n e^{−pτ}(e^{aτ} + e^{−aτ} − e^{(a−b)τ} − e^{(b−a)τ})
        let p = 0.5 * (n + alpha);
        let m0 = (self.m_max() + 1) as f64;
        let geo = |e: f64| (-(p - e) * m0 * h).exp() / -(-(p - e) * h).exp_m1();
        acc += self.far * (geo(a) + geo(-a) - geo(a - b) - geo(b - a));
        let d = (2.0 * ((a - b) * h).cosh() - 2.0 * (a * h).cosh()) / (h * h);
        c * (h * acc - self.omega * h.powf(2.0 - alpha) * d)
    }
}
