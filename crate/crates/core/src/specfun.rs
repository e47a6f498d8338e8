//! Closed-form spectral arithmetic: Gamma and zeta values, the Hardy constant,
//! the Gagliardo normalization, the power-law symbol `Ψ_{n,α}` and the
//! exponents and thresholds derived from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

fn ln_gamma_lanczos(x: f64) -> f64 {
    // g = 671/128, 14 terms.
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    let mut y = x;
    for c in LANCZOS_COEFFS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Natural logarithm of `Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma needs a finite x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        (PI / (PI * x).sin()).ln() - ln_gamma_lanczos(1.0 - x)
    } else {
        ln_gamma_lanczos(x)
    }
}

/// `Γ(x)` for any real `x` that is not a non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || (x <= 0.0 && x == x.floor()) {
        return Err(Error::domain(format!("gamma has a pole at {x}")));
    }
    if x > 0.0 {
        Ok(ln_gamma_pos(x).exp())
    } else {
        let s = (PI * x).sin();
        Ok(PI / (s * ln_gamma_pos(1.0 - x).exp()))
    }
}

/// Dirichlet eta function by the Borwein acceleration; accurate for `s > 0`.
fn dirichlet_eta(s: f64) -> f64 {
    const TERMS: usize = 40;
    let n = TERMS as f64;
    let mut d = [0.0f64; TERMS + 1];
    let mut term = 1.0 / n;
    let mut acc = term;
    d[0] = n * acc;
    for i in 0..TERMS {
        let fi = i as f64;
        term *= 4.0 * (n + fi) * (n - fi) / ((2.0 * fi + 1.0) * (2.0 * fi + 2.0));
        acc += term;
        d[i + 1] = n * acc;
    }
    let dn = d[TERMS];
    let mut sum = 0.0;
    for (k, dk) in d.iter().take(TERMS).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - dn) / ((k + 1) as f64).powf(s);
    }
    -sum / dn
}

/// Riemann zeta function for real `s != 1`.
pub fn zeta(s: f64) -> Result<f64> {
    if !s.is_finite() || s == 1.0 {
        return Err(Error::domain(format!("zeta is undefined at {s}")));
    }
    if s == 0.0 {
        return Ok(-0.5);
    }
    if s >= 0.5 {
        return Ok(zeta_right(s, 1.0 - s));
    }
    // functional equation maps s < 1/2 into (1/2, ∞); 1 - t is passed as s
    // itself so that the pole factor keeps full relative precision near s = 0
    let t = 1.0 - s;
    let zt = zeta_right(t, s);
    let g = gamma(t)?;
    Ok(2f64.powf(s) * PI.powf(s - 1.0) * (0.5 * PI * s).sin() * g * zt)
}

fn zeta_right(s: f64, one_minus_s: f64) -> f64 {
    // 1 - 2^{1-s}
    let denom = -((one_minus_s * std::f64::consts::LN_2).exp_m1());
    dirichlet_eta(s) / denom
}

/// Surface area of the unit sphere `S^{n-1}` in `ℝ^n` (2 for `n = 1`).
pub fn sphere_area(n: f64) -> f64 {
    2.0 * PI.powf(0.5 * n) / ln_gamma_pos(0.5 * n).exp()
}

fn check_order(n: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !(alpha < n) || !n.is_finite() {
        return Err(Error::domain(format!("need 0 < alpha < n, got n = {n}, alpha = {alpha}")));
    }
    Ok(())
}

/// Best constant of the fractional Hardy inequality, `2^α Γ²((n+α)/4) / Γ²((n−α)/4)`.
pub fn hardy_constant(n: f64, alpha: f64) -> Result<f64> {
    check_order(n, alpha)?;
    let lg = 2.0 * (ln_gamma_pos(0.25 * (n + alpha)) - ln_gamma_pos(0.25 * (n - alpha)));
    Ok(2f64.powf(alpha) * lg.exp())
}

/// Normalization `C_{n,α}` linking the Fourier and Gagliardo forms of the seminorm.
pub fn c_n_alpha(n: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) || !(n > 0.0) {
        return Err(Error::domain(format!("c_n_alpha needs 0 < alpha < 2 and n > 0, got n = {n}, alpha = {alpha}")));
    }
    let abs_gamma_neg = gamma(-0.5 * alpha)?.abs();
    Ok(2f64.powf(alpha) * ln_gamma_pos(0.5 * (n + alpha)).exp() / (PI.powf(0.5 * n) * abs_gamma_neg))
}

/// The symbol `Ψ_{n,α}(β)` with `(−Δ)^{α/2}|x|^{−β} = Ψ(β)|x|^{−α−β}`.
///
/// Defined on `[0, n − α]`; both endpoints evaluate to 0.
pub fn psi(n: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_order(n, alpha)?;
    let top = n - alpha;
    if !(beta >= 0.0 && beta <= top) {
        return Err(Error::domain(format!("psi needs 0 <= beta <= {top}, got {beta}")));
    }
    if beta == 0.0 || beta == top {
        return Ok(0.0);
    }
    Ok(psi_interior(n, alpha, beta))
}

fn psi_interior(n: f64, alpha: f64, beta: f64) -> f64 {
    let lg = ln_gamma_pos(0.5 * (n - beta)) + ln_gamma_pos(0.5 * (alpha + beta))
        - ln_gamma_pos(0.5 * (n - beta - alpha))
        - ln_gamma_pos(0.5 * beta);
    2f64.powf(alpha) * lg.exp()
}

/// The two roots `β−(γ) ≤ β+(γ)` of `Ψ(β) = γ` in `[0, n − α]`.
///
/// `γ = 0` gives `(0, n − α)` and `γ = γ_H` gives the double root `(n − α)/2`.
pub fn beta_pm(n: f64, alpha: f64, gamma: f64) -> Result<(f64, f64)> {
    let gamma_h = hardy_constant(n, alpha)?;
    if !(gamma >= 0.0 && gamma <= gamma_h) {
        return Err(Error::domain(format!("beta_pm needs 0 <= gamma <= gamma_H = {gamma_h}, got {gamma}")));
    }
    let top = n - alpha;
    let mid = 0.5 * top;
    if gamma == 0.0 {
        return Ok((0.0, top));
    }
    if gamma == gamma_h {
        return Ok((mid, mid));
    }
    let minus = bisect_increasing(|b| psi_interior(n, alpha, b), gamma, 0.0, mid);
    Ok((minus, top - minus))
}

/// Bisection for `f(x) = target` with `f` increasing on `[lo, hi]`, run to
/// floating-point resolution of the bracket.
pub(crate) fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coupling threshold separating the dimension-driven and mass-driven regimes.
///
/// For `n > 2α` this is `Ψ(n/2)`, the coupling at which `β+ = n/2`; it is 0
/// when `n = 2α` and −1 when `n < 2α`.
pub fn gamma_crit(n: f64, alpha: f64) -> Result<f64> {
    check_order(n, alpha)?;
    let twice = 2.0 * alpha;
    if n > twice {
        Ok(psi_interior(n, alpha, 0.5 * n))
    } else if n == twice {
        Ok(0.0)
    } else {
        Ok(-1.0)
    }
}

/// Critical Hardy–Sobolev exponent `2*_α(s) = 2(n − s)/(n − α)`.
pub fn crit_exponent(n: f64, alpha: f64, s: f64) -> Result<f64> {
    check_order(n, alpha)?;
    if !(s >= 0.0 && s <= alpha) {
        return Err(Error::domain(format!("crit_exponent needs 0 <= s <= alpha, got s = {s}")));
    }
    Ok(2.0 * (n - s) / (n - alpha))
}

/// The parameter tuple `(n, α, s, γ, λ)` with its validity invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    n: f64,
    alpha: f64,
    s: f64,
    gamma: f64,
    lambda: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    n: f64,
    alpha: f64,
    s: f64,
    gamma: f64,
    #[serde(default)]
    lambda: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.n, raw.alpha, raw.s, raw.gamma, raw.lambda)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams { n: p.n, alpha: p.alpha, s: p.s, gamma: p.gamma, lambda: p.lambda }
    }
}

impl ProblemParams {
    /// Validates `n ≥ 1`, `0 < α < min(2, n)`, `0 ≤ s ≤ α`, `0 ≤ γ < γ_H(α)` and `λ ≥ 0`.
    pub fn new(n: f64, alpha: f64, s: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::domain(format!("dimension must be a finite real >= 1, got {n}")));
        }
        if !(alpha > 0.0 && alpha < 2.0 && alpha < n) {
            return Err(Error::domain(format!("need 0 < alpha < min(2, n), got alpha = {alpha}, n = {n}")));
        }
        if !(s >= 0.0 && s <= alpha) {
            return Err(Error::domain(format!("need 0 <= s <= alpha, got s = {s}")));
        }
        let gamma_h = hardy_constant(n, alpha)?;
        if !(gamma >= 0.0 && gamma < gamma_h) {
            return Err(Error::domain(format!("need 0 <= gamma < gamma_H = {gamma_h}, got {gamma}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("need a finite lambda >= 0, got {lambda}")));
        }
        Ok(ProblemParams { n, alpha, s, gamma, lambda })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n, self.alpha, self.s, gamma, self.lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.alpha, self.s, self.gamma, lambda)
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(self.n, self.alpha, s, self.gamma, self.lambda)
    }

    /// `(n − α)/2`, the scaling exponent of the bubble `ε^{−(n−α)/2} U(x/ε)`.
    pub fn scaling_exponent(&self) -> f64 {
        0.5 * (self.n - self.alpha)
    }

    pub fn hardy_constant(&self) -> f64 {
        hardy_constant(self.n, self.alpha).expect("validated at construction")
    }

    pub fn c_n_alpha(&self) -> f64 {
        c_n_alpha(self.n, self.alpha).expect("validated at construction")
    }

    pub fn beta_pm(&self) -> (f64, f64) {
        beta_pm(self.n, self.alpha, self.gamma).expect("validated at construction")
    }

    pub fn gamma_crit(&self) -> f64 {
        gamma_crit(self.n, self.alpha).expect("validated at construction")
    }

    pub fn crit_exponent(&self) -> f64 {
        crit_exponent(self.n, self.alpha, self.s).expect("validated at construction")
    }

    pub fn psi(&self, beta: f64) -> Result<f64> {
        psi(self.n, self.alpha, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_gamma_trivial_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(log_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(log_gamma(0.5).unwrap(), PI.sqrt().ln(), max_relative = 1e-14);
    }

    #[test]
    fn log_gamma_against_high_precision() {
        // 40-digit reference values
        let cases = [
            (0.1, 2.252_712_651_734_205_959_869_701_646_368_495),
            (0.7, 0.260_867_246_531_666_514_385_732_417_016_759_6),
            (3.3, 0.987_098_577_894_734_587_878_679_288_615_055),
            (17.25, 31.374_622_313_677_686_480_012_759_697_130_2),
            (150.5, 602.513_954_870_585_411_950_737_877_830_783_1),
        ];
        for (x, want) in cases {
            assert_relative_eq!(log_gamma(x).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_reflection() {
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert!(gamma(-1.0).is_err());
    }

    #[test]
    fn zeta_reference_values() {
        let cases = [
            (0.5, -1.460_354_508_809_586_812_889_499_152_515_298),
            (-0.5, -0.207_886_224_977_354_566_017_306_725_397_049_3),
            (0.25, -0.813_278_405_261_891_656_521_447_820_073_525_6),
            (-0.75, -0.133_642_774_436_584_562_407_614_437_367_983_1),
            (0.9, -9.430_114_019_402_252_372_298_849_787_580_393),
            (0.0, -0.5),
            (2.0, PI * PI / 6.0),
        ];
        for (s, want) in cases {
            assert_relative_eq!(zeta(s).unwrap(), want, max_relative = 1e-12);
        }
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn zeta_continuous_through_zero() {
        let left = zeta(-1e-9).unwrap();
        let right = zeta(1e-9).unwrap();
        assert!((left + 0.5).abs() < 1e-8 && (right + 0.5).abs() < 1e-8, "{left} {right}");
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1.0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2.0), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3.0), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn hardy_constant_values() {
        // 2 Γ²(3/4)/Γ²(1/4), 40-digit reference
        assert_relative_eq!(
            hardy_constant(2.0, 1.0).unwrap(),
            0.228_473_290_522_231_812_687_483_311_273_841_7,
            max_relative = 1e-13
        );
        assert_relative_eq!(hardy_constant(3.0, 1.0).unwrap(), 2.0 / PI, max_relative = 1e-13);
        assert!(hardy_constant(2.0, 2.0).is_err());
        let near = hardy_constant(3.0, 2.0 - 1e-9).unwrap();
        assert!((near - 0.25).abs() < 1e-7);
    }

    #[test]
    fn c_n_alpha_values() {
        assert_relative_eq!(c_n_alpha(1.0, 1.0).unwrap(), 1.0 / PI, max_relative = 1e-13);
        assert_relative_eq!(
            c_n_alpha(3.0, 1.0).unwrap(),
            0.101_321_183_642_337_771_443_879_463_209_727_6,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            c_n_alpha(2.0, 0.5).unwrap(),
            0.083_241_983_875_425_065_488_940_217_818_134_69,
            max_relative = 1e-13
        );
        assert!(c_n_alpha(3.0, 2.0).is_err());
        assert!(c_n_alpha(3.0, 0.0).is_err());
    }

    #[test]
    fn psi_reference_values() {
        assert_relative_eq!(psi(3.0, 1.0, 0.5).unwrap(), 0.5, max_relative = 1e-13);
        assert_relative_eq!(
            psi(3.0, 1.5, 0.3).unwrap(),
            0.290_779_066_718_954_140_787_969_424_622_094_3,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            psi(1.0, 0.5, 0.2).unwrap(),
            0.134_971_208_613_157_972_879_018_361_672_858_1,
            max_relative = 1e-13
        );
    }

    #[test]
    fn psi_endpoints_and_errors() {
        assert_eq!(psi(3.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(psi(3.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(psi(3.0, 1.0, 1e-10).unwrap() < 1e-9);
        assert!(psi(3.0, 1.0, 2.0 - 1e-10).unwrap() < 1e-9);
        assert!(psi(3.0, 1.0, -0.1).is_err());
        assert!(psi(3.0, 1.0, 2.1).is_err());
    }

    #[test]
    fn psi_peak_is_hardy_constant() {
        for &(n, a) in &[(1.0, 0.5), (2.0, 1.0), (3.0, 1.5), (4.0, 0.3), (2.5, 1.9)] {
            let peak = psi(n, a, 0.5 * (n - a)).unwrap();
            assert_relative_eq!(peak, hardy_constant(n, a).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn beta_pm_conventions() {
        assert_eq!(beta_pm(3.0, 1.0, 0.0).unwrap(), (0.0, 2.0));
        let gh = hardy_constant(3.0, 1.0).unwrap();
        assert_eq!(beta_pm(3.0, 1.0, gh).unwrap(), (1.0, 1.0));
        let (bm, bp) = beta_pm(3.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(bm, 0.5, epsilon = 1e-12);
        assert_eq!(bm + bp, 2.0);
        assert!(beta_pm(3.0, 1.0, -0.1).is_err());
        assert!(beta_pm(3.0, 1.0, gh * 1.01).is_err());
    }

    #[test]
    fn gamma_crit_branches() {
        assert_eq!(gamma_crit(2.0, 1.0).unwrap(), 0.0);
        assert_eq!(gamma_crit(1.0, 0.75).unwrap(), -1.0);
        // n = 3, α = 1: Ψ(3/2) = Ψ(1/2) = 2Γ(5/4)/Γ(1/4) = 1/2
        assert_relative_eq!(gamma_crit(3.0, 1.0).unwrap(), 0.5, max_relative = 1e-13);
        let gc = gamma_crit(3.0, 1.0).unwrap();
        let (_, bp) = beta_pm(3.0, 1.0, gc).unwrap();
        assert!((bp - 1.5).abs() < 1e-10);
    }

    #[test]
    fn crit_exponent_values() {
        assert_eq!(crit_exponent(3.0, 1.0, 1.0).unwrap(), 2.0);
        assert_relative_eq!(crit_exponent(3.0, 1.0, 0.0).unwrap(), 3.0);
        assert_relative_eq!(crit_exponent(4.0, 1.0, 0.5).unwrap(), 7.0 / 3.0, max_relative = 1e-15);
        assert!(crit_exponent(3.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(3.0, 1.0, 0.5, 0.3, 0.0).is_ok());
        assert!(ProblemParams::new(3.0, 2.0, 0.5, 0.3, 0.0).is_err());
        assert!(ProblemParams::new(1.0, 1.0, 0.5, 0.0, 0.0).is_err());
        assert!(ProblemParams::new(3.0, 1.0, 1.5, 0.3, 0.0).is_err());
        assert!(ProblemParams::new(3.0, 1.0, 0.5, 0.7, 0.0).is_err());
        assert!(ProblemParams::new(3.0, 1.0, 0.5, 0.3, -1.0).is_err());
        assert!(ProblemParams::new(0.5, 0.25, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn params_json_roundtrip_validates() {
        let p = ProblemParams::new(3.0, 1.0, 0.5, 0.3, 0.1).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: ProblemParams = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
        let bad = text.replace("\"gamma\":0.3", "\"gamma\":0.9");
        assert!(serde_json::from_str::<ProblemParams>(&bad).is_err());
    }
}
