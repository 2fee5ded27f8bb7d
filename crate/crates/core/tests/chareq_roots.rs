mod common;

use common::{cubic_roots, max_matching_distance, modal_determinant, undelayed_coeffs};
use delaytherm::chareq::{count_roots, find_roots, refine_root, rightmost_root, spectral_abscissa, ModeSystem, Rect};
use delaytherm::model::{SystemSpec, Variant};
use num_complex::Complex64;
use proptest::prelude::*;

fn spec(v: Variant, beta: f64, alpha: f64, a: f64, kappa: f64, tau: f64) -> SystemSpec {
    let xi = match v {
        Variant::DelayElastic => 2.0 * tau / a,
        Variant::DelayHeat => tau * a,
    };
    SystemSpec::new(v, beta, alpha, a, kappa, tau, xi).unwrap()
}

#[test]
fn chi_matches_modal_determinant() {
    for (v, heat) in [(Variant::DelayElastic, false), (Variant::DelayHeat, true)] {
        let sp = spec(v, 0.3, 0.8, 1.7, 0.6, 0.9);
        let m = ModeSystem::new(sp, 6.5).unwrap();
        for s in [Complex64::new(0.2, 3.0), Complex64::new(-1.5, -0.4), Complex64::new(4.0, 11.0)] {
            let d = modal_determinant(heat, 6.5, 0.3, 0.8, 1.7, 0.6, 0.9, s);
            assert!((m.char_fn(s) - d).norm() <= 1e-12 * d.norm(), "{v} {s}");
        }
    }
}

#[test]
fn tiny_delay_roots_match_cubic() {
    let cases = [
        (Variant::DelayHeat, true, 1.0, 0.5, 1.0, 1.5, 0.5),
        (Variant::DelayElastic, false, 4.0, 0.5, 0.5, 1.0, 1.0),
        (Variant::DelayElastic, false, 30.0, 0.25, 0.75, 2.0, 1.0),
        (Variant::DelayHeat, true, 10.0, 0.0, 0.5, 2.0, 1.0),
    ];
    for (v, heat, lam, beta, alpha, a, kappa) in cases {
        let sp = spec(v, beta, alpha, a, kappa, 1e-8);
        let m = ModeSystem::new(sp, lam).unwrap();
        let [c2, c1, c0] = undelayed_coeffs(heat, lam, beta, alpha, a, kappa);
        let cubic = cubic_roots(c2, c1, c0);
        let r = cubic.iter().map(|z| z.norm()).fold(0.0, f64::max) + 1.0;
        let rect = Rect::new(-r - 0.37, r + 0.41, -r - 0.29, r + 0.33);
        assert_eq!(count_roots(&m, rect).unwrap(), 3);
        let set = find_roots(&m, rect).unwrap();
        let got: Vec<Complex64> = set.roots.iter().map(|x| x.value).collect();
        assert_eq!(got.len(), 3, "{got:?}");
        assert!(max_matching_distance(&got, &cubic) < 1e-5, "{got:?} vs {cubic:?}");
    }
}

#[test]
fn refine_keeps_exact_root() {
    let sp = spec(Variant::DelayHeat, 0.5, 1.0, 1.5, 0.5, 1e-8);
    let m = ModeSystem::new(sp, 1.0).unwrap();
    let set = find_roots(&m, Rect::new(-4.1, 1.3, -3.2, 3.3)).unwrap();
    for r in &set.roots {
        let again = refine_root(&m, r.value);
        assert!(again.converged);
        assert!((again.root - r.value).norm() < 1e-12 * (1.0 + r.value.norm()));
    }
}

#[test]
fn secant_fallback_at_critical_point() {
    // χ' vanishes at a critical point; start Newton there.
    let sp = spec(Variant::DelayElastic, 0.5, 0.5, 1.0, 1.0, 1.0);
    let m = ModeSystem::new(sp, 2.0).unwrap();
    // Locate a zero of χ' with Newton on χ' using a finite-difference χ''.
    let mut s = Complex64::new(-1.0, 0.5);
    for _ in 0..100 {
        let h = 1e-5;
        let d = m.char_fn_derivative(s);
        let dd = (m.char_fn_derivative(s + h) - m.char_fn_derivative(s - h)) / (2.0 * h);
        s -= d / dd;
    }
    assert!(m.char_fn_derivative(s).norm() < 1e-8);
    let r = refine_root(&m, s);
    assert!(r.used_secant);
    if r.converged {
        assert!(m.char_fn(r.root).norm() <= 1e-10 * m.residual_scale(r.root));
    }
}

#[test]
fn rightmost_root_elastic_stable() {
    let sp = spec(Variant::DelayElastic, 0.5, 0.5, 1.0, 1.0, 1.0);
    for lam in [1.0, 10.0, 100.0] {
        let m = ModeSystem::new(sp, lam).unwrap();
        let r = rightmost_root(&m, m.default_search()).unwrap().unwrap();
        assert!(r.value.re < 0.0, "λ={lam}: {r:?}");
        assert_eq!(count_roots(&m, Rect::new(r.value.re + 1e-6, 3.0, -50.0, 50.0)).unwrap(), 0);
    }
}

#[test]
fn rightmost_root_heat_stable() {
    let sp = spec(Variant::DelayHeat, 0.5, 0.5, 2.0, 1.0, 1.0);
    for lam in [1.0, 10.0, 100.0] {
        let m = ModeSystem::new(sp, lam).unwrap();
        let r = rightmost_root(&m, m.default_search()).unwrap().unwrap();
        assert!(r.value.re < 0.0, "λ={lam}: {r:?}");
    }
}

#[test]
fn undamped_probes_are_unstable() {
    let el = SystemSpec::probe(Variant::DelayElastic, 0.5, 0.5, 0.0, 1.0, 1.0, 1.0).unwrap();
    let ht = SystemSpec::probe(Variant::DelayHeat, 0.5, 0.5, 0.0, 1.0, 1.0, 1.0).unwrap();
    for sp in [el, ht] {
        let found = (1..=50).any(|j| {
            let lam = (j as f64 * std::f64::consts::PI).powi(2);
            let m = ModeSystem::new(sp, lam).unwrap();
            matches!(rightmost_root(&m, m.default_search()).unwrap(), Some(r) if r.value.re > 0.0)
        });
        assert!(found, "{sp:?}");
    }
}

#[test]
fn abscissa_properties() {
    let sp = spec(Variant::DelayElastic, 0.5, 0.5, 1.0, 1.0, 1.0);
    let lams: Vec<f64> = (1..=20).map(|j| (j as f64 * std::f64::consts::PI).powi(2)).collect();
    let full = spectral_abscissa(&sp, &lams, None).unwrap();
    assert!(full.value < 0.0);
    let one = spectral_abscissa(&sp, &lams[..1], None).unwrap();
    let m = ModeSystem::new(sp, lams[0]).unwrap();
    let r = rightmost_root(&m, m.default_search()).unwrap().unwrap();
    assert_eq!(one.value, r.value.re);
    let mut prev = f64::NEG_INFINITY;
    for k in 1..=6 {
        let a = spectral_abscissa(&sp, &lams[..k], None).unwrap().value;
        assert!(a >= prev);
        prev = a;
    }
    assert!(spectral_abscissa(&sp, &[], None).is_err());
}

#[test]
fn zero_is_never_a_root() {
    let sp = spec(Variant::DelayElastic, 0.2, 0.9, 1.3, 1.0, 0.7);
    let m = ModeSystem::new(sp, 5.0).unwrap();
    assert_eq!(m.value_at_zero(), 5.0 * 5f64.powf(0.9));
    let sp = spec(Variant::DelayHeat, 0.2, 0.9, 1.3, 0.4, 0.7);
    let m = ModeSystem::new(sp, 5.0).unwrap();
    assert_eq!(m.value_at_zero(), 5.0 * ((0.4 + 1.3) * 5f64.powf(0.9)));
    let direct = m.char_fn(Complex64::new(0.0, 0.0));
    assert_eq!(direct.im, 0.0);
    assert!((direct.re - m.value_at_zero()).abs() <= 4.0 * f64::EPSILON * direct.re);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_symmetry(re in -20.0..5.0f64, im in -40.0..40.0f64, lam in 0.1..1e3f64,
                          beta in 0.0..0.5f64, alpha in 0.0..1.0f64, heat in any::<bool>()) {
        let v = if heat { Variant::DelayHeat } else { Variant::DelayElastic };
        let m = ModeSystem::new(spec(v, beta, alpha, 2.0, 1.0, 0.8), lam).unwrap();
        let s = Complex64::new(re, im);
        let d = m.char_fn(s.conj()) - m.char_fn(s).conj();
        prop_assert!(d.norm() <= 1e-12 * m.char_fn(s).norm().max(1e-300));
    }

    #[test]
    fn found_roots_come_in_conjugate_pairs(lam in 0.5..50.0f64, tau in 0.2..2.0f64, heat in any::<bool>()) {
        let v = if heat { Variant::DelayHeat } else { Variant::DelayElastic };
        let m = ModeSystem::new(spec(v, 0.5, 0.5, 2.0, 1.0, tau), lam).unwrap();
        let rect = Rect::new(-5.13, 1.07, -20.11, 20.11);
        let set = find_roots(&m, rect).unwrap();
        prop_assert_eq!(set.total_multiplicity(), count_roots(&m, rect).unwrap());
        for r in &set.roots {
            let partner = set.roots.iter().any(|q| (q.value - r.value.conj()).norm() < 1e-6 * (1.0 + r.value.norm()));
            prop_assert!(partner || r.value.im.abs() < 1e-6);
        }
    }
}
