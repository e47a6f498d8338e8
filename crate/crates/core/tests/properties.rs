use std::sync::Arc;

use frachs::radialops::kernel_for;
use frachs::specfun::{beta_pm, crit_exponent, gamma_crit, hardy_constant, log_gamma, psi};
use frachs::{ProblemParams, RadialField, RadialGrid};
use proptest::prelude::*;

/// Valid `(n, α)` with `0 < α < min(2, n)`.
fn order() -> impl Strategy<Value = (f64, f64)> {
    (1.0f64..8.0, 0.02f64..0.98).prop_map(|(n, t)| (n, t * n.min(2.0)))
}

proptest! {
    #[test]
    fn psi_is_symmetric((n, alpha) in order(), t in 0.001f64..0.999) {
        let b = t * (n - alpha);
        let (x, y) = (psi(n, alpha, b).unwrap(), psi(n, alpha, n - alpha - b).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn psi_increases_up_to_the_peak((n, alpha) in order(), t in 0.01f64..0.98) {
        let b = t * 0.5 * (n - alpha);
        let db = 0.01 * 0.5 * (n - alpha);
        prop_assert!(psi(n, alpha, b + db).unwrap() > psi(n, alpha, b).unwrap());
        prop_assert!(psi(n, alpha, b).unwrap() > 0.0);
        prop_assert!(psi(n, alpha, b).unwrap() <= hardy_constant(n, alpha).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn roots_solve_psi((n, alpha) in order(), f in 0.01f64..0.99) {
        let gh = hardy_constant(n, alpha).unwrap();
        let (bm, bp) = beta_pm(n, alpha, f * gh).unwrap();
        prop_assert!((psi(n, alpha, bm).unwrap() - f * gh).abs() <= 1e-10);
        prop_assert!(bm <= 0.5 * (n - alpha) && bp >= 0.5 * (n - alpha));
        prop_assert_eq!(bp, n - alpha - bm);
    }

    #[test]
    fn critical_coupling_is_ordered((n, alpha) in order()) {
        let gc = gamma_crit(n, alpha).unwrap();
        prop_assert!(gc >= -1.0 && gc < hardy_constant(n, alpha).unwrap());
    }

    #[test]
    fn above_critical_coupling_beta_plus_is_below_half_dimension(
        (n, alpha) in (2.5f64..8.0, 0.05f64..0.95).prop_map(|(n, t)| (n, t * 2.0f64.min(n / 2.0))),
        t in 0.01f64..0.99,
    ) {
        let (gc, gh) = (gamma_crit(n, alpha).unwrap(), hardy_constant(n, alpha).unwrap());
        let (_, bp) = beta_pm(n, alpha, gc + t * (gh - gc)).unwrap();
        prop_assert!(bp < 0.5 * n);
    }

    #[test]
    fn crit_exponent_is_at_least_two((n, alpha) in order(), t in 0.0f64..=1.0) {
        prop_assert!(crit_exponent(n, alpha, t * alpha).unwrap() >= 2.0 - 1e-15);
    }

    #[test]
    fn log_gamma_recurrence(x in 0.1f64..150.0) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn params_reject_couplings_at_or_above_hardy((n, alpha) in order(), f in 1.0f64..3.0) {
        let gh = hardy_constant(n, alpha).unwrap();
        prop_assert!(ProblemParams::new(n, alpha, 0.0, f * gh, 0.0).is_err());
    }

    #[test]
    fn grid_weights_reproduce_shell_volume(n in 1.0f64..6.0, lo in -8.0f64..-1.0, count in 3usize..600) {
        let g = RadialGrid::new(n, 10f64.powf(lo), 1.0, count).unwrap();
        let sum: f64 = g.weights().iter().sum();
        let exact = (1.0 - 10f64.powf(lo * n)) / n;
        prop_assert!(((sum - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn grid_weights_integrate_monomials_to_second_order(
        n in 1.0f64..6.0,
        lo in -8.0f64..-1.0,
        count in 200usize..600,
        p in 0.0f64..2.0,
    ) {
        let g = Arc::new(RadialGrid::new(n, 10f64.powf(lo), 1.0, count).unwrap());
        let f = RadialField::from_fn(g.clone(), |r| r.powf(p)).unwrap();
        let sum: f64 = g.weights().iter().zip(f.values()).map(|(w, v)| w * v).sum();
        let exact = (1.0 - 10f64.powf(lo * (n + p))) / (n + p);
        // interpolation error of e^{pt} by hat functions
        let bound = (g.h() * p).powi(2) / 6.0 + 1e-12;
        prop_assert!(((sum - exact) / exact).abs() <= bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lattice_symbol_tracks_psi((n, alpha) in order(), t in 0.05f64..0.95) {
        let g = RadialGrid::new(n, 1e-6, 1.0, 400).unwrap();
        let k = kernel_for(&g, alpha).unwrap();
        let b = t * (n - alpha);
        let exact = psi(n, alpha, b).unwrap();
        prop_assert!(((k.symbol(b) - exact) / exact).abs() < 1e-2);
        prop_assert!((k.symbol(b) - k.symbol(n - alpha - b)).abs() <= 1e-10 * exact.max(1.0));
    }
}
