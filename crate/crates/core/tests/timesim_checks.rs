mod common;

use std::sync::Arc;

use common::modal_determinant;
use delaytherm::chareq::{spectral_abscissa, ModeSystem};
use delaytherm::model::{SystemSpec, Variant};
use delaytherm::presets::{make_preset, PresetName, ALL_PRESETS};
use delaytherm::timesim::{
    energy, fit_exponential_rate, fit_polynomial_order, simulate, simulate_adaptive, EnergySeries,
    HistoryFn, HistoryQuadrature, InitialData, RunStatus,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn heat_spec(beta: f64, alpha: f64, a: f64, kappa: f64, tau: f64) -> SystemSpec {
    SystemSpec::new(Variant::DelayHeat, beta, alpha, a, kappa, tau, tau * a).unwrap()
}

fn elastic_spec(beta: f64, alpha: f64, a: f64, tau: f64) -> SystemSpec {
    SystemSpec::new(Variant::DelayElastic, beta, alpha, a, 1.0, tau, 2.0 * tau / a).unwrap()
}

/// Newton on the oracle determinant with a centred-difference derivative.
fn oracle_root(sp: &SystemSpec, lam: f64, mut s: Complex64) -> Complex64 {
    let heat = sp.variant == Variant::DelayHeat;
    let f = |s: Complex64| modal_determinant(heat, lam, sp.beta, sp.alpha, sp.a, sp.kappa, sp.tau, s);
    for _ in 0..60 {
        let h = 1e-6 * (1.0 + s.norm());
        let d = (f(s + h) - f(s - h)) / (2.0 * h);
        let step = f(s) / d;
        s -= step;
        if step.norm() < 1e-14 * (1.0 + s.norm()) {
            break;
        }
    }
    s
}

/// Modal amplitudes `(u, v, θ)` of the exponential solution `e^{st}`,
/// normalised by `u = 1`, and its delayed trace.
fn eigen_solution(sp: &SystemSpec, lam: f64, s: Complex64) -> ([Complex64; 3], Complex64) {
    let one = Complex64::new(1.0, 0.0);
    match sp.variant {
        Variant::DelayElastic => {
            let th = -lam.powf(sp.beta) * s / (s + lam.powf(sp.alpha));
            ([one, s, th], one * lam.sqrt())
        }
        Variant::DelayHeat => {
            let th = (s * s + lam) / lam.powf(sp.beta);
            ([one, s, th], th * lam.powf(sp.alpha / 2.0))
        }
    }
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let sp = heat_spec(0.5, 0.5, 2.0, 1.0, 1.0);
    let eigs = [1.0, 16.0, 81.0];
    let tr = simulate(&sp, &eigs, &InitialData::zero(3), 2.0, 0.1).unwrap();
    assert_eq!(tr.status, RunStatus::Completed);
    assert!(tr.states.iter().flatten().all(|y| y.iter().all(|x| *x == 0.0)));
    assert_eq!(energy(&tr, 1.3, 2.0).unwrap(), 0.0);
}

#[test]
fn preconditions_enforced() {
    let sp = heat_spec(0.5, 0.5, 2.0, 1.0, 1.0);
    let init = InitialData::zero(1);
    assert!(simulate(&sp, &[1.0], &init, 10.0, 0.2).is_err());
    assert!(simulate(&sp, &[1.0], &init, 1.5, 0.1).is_err());
    assert!(simulate(&sp, &[1.0, 2.0], &init, 10.0, 0.1).is_err());
    let tr = simulate(&sp, &[1.0], &init, 2.0, 0.1).unwrap();
    assert!(tr.state(0, 2.5).is_err());
}

#[test]
fn exponential_solution_reproduced() {
    // The real part of e^{st}·(eigenvector) with matching history is an exact
    // solution; RK4 with Hermite delay interpolation must track it.
    let cases = [
        (elastic_spec(0.5, 0.5, 1.0, 1.0), 4.0, Complex64::new(-0.3, 2.0)),
        (elastic_spec(0.3, 0.8, 1.5, 0.5), 9.0, Complex64::new(-0.5, 3.0)),
        (heat_spec(0.5, 0.5, 2.0, 1.0, 1.0), 1.0, Complex64::new(-0.2, 1.0)),
        (heat_spec(0.0, 0.5, 2.0, 1.0, 0.5), 16.0, Complex64::new(-0.1, 4.0)),
    ];
    for (sp, lam, guess) in cases {
        let s = oracle_root(&sp, lam, guess);
        let (amp, q) = eigen_solution(&sp, lam, s);
        let init = InitialData {
            u: vec![amp[0].re],
            v: vec![amp[1].re],
            theta: vec![amp[2].re],
            history: HistoryFn::Callable(Arc::new(move |_, t| (q * (s * t).exp()).re)),
        };
        let t_end = 4.0 * sp.tau;
        let tr = simulate(&sp, &[lam], &init, t_end, sp.tau / 400.0).unwrap();
        let got = tr.state(0, t_end).unwrap();
        let e = (s * t_end).exp();
        let scale = amp.iter().map(|a| (a * e).norm()).fold(0.0, f64::max);
        for c in 0..3 {
            let want = (amp[c] * e).re;
            assert!(
                (got[c] - want).abs() < 1e-8 * scale,
                "{:?} λ={lam} s={s} component {c}: {} vs {want}",
                sp.variant,
                got[c]
            );
        }
    }
}

#[test]
fn constant_history_energy() {
    let sp = heat_spec(0.5, 0.5, 2.0, 1.0, 1.0);
    let h = 0.7;
    let init = InitialData {
        u: vec![0.0],
        v: vec![0.0],
        theta: vec![0.0],
        history: HistoryFn::ModalCoefficients(vec![h]),
    };
    let tr = simulate(&sp, &[4.0], &init, 2.0, 0.125).unwrap();
    let xi = 1.7;
    let e = energy(&tr, 0.0, xi).unwrap();
    assert!((e - xi * h * h / 2.0).abs() < 1e-14);
    let cc = tr.energy_with(0.0, xi, HistoryQuadrature::ClenshawCurtis(32)).unwrap();
    assert!((cc - xi * h * h / 2.0).abs() < 1e-13);
}

#[test]
fn history_quadrature_matches_trapezoid() {
    let (sp, eigs) = make_preset(PresetName::Beam1, std::f64::consts::PI, 3, 2.0, 1.0, 1.0).unwrap();
    let init = InitialData::smooth_default(&sp, &eigs).unwrap();
    let tr = simulate(&sp, &eigs, &init, 4.0, 1.0 / 64.0).unwrap();
    let xi = sp.xi;
    for t in [0.3, 1.0, 2.71, 4.0] {
        let n = 10_000;
        let mut brute = 0.0;
        for (j, m) in tr.modes().iter().enumerate() {
            let [u, v, th] = tr.state(j, t).unwrap();
            let mut acc = 0.0;
            for k in 0..=n {
                let rho = k as f64 / n as f64;
                let q = tr.trace(j, t - sp.tau * rho).unwrap();
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * q * q;
            }
            brute += m.lambda_j * u * u + v * v + th * th + xi * acc / n as f64;
        }
        brute *= 0.5;
        let e = energy(&tr, t, xi).unwrap();
        assert!((e - brute).abs() < 1e-8 * brute, "t={t}: {e} vs {brute}");
        if t >= sp.tau {
            let cc = tr.energy_with(t, xi, HistoryQuadrature::ClenshawCurtis(32)).unwrap();
            assert!((cc - brute).abs() < 1e-6 * brute, "t={t}: cc {cc} vs {brute}");
        }
    }
}

#[test]
fn heat_delay_energy_is_contractive() {
    let (sp, eigs) = make_preset(PresetName::Beam1, std::f64::consts::PI, 6, 2.0, 1.0, 1.0).unwrap();
    assert!(sp.admissible);
    let init = InitialData::smooth_default(&sp, &eigs).unwrap();
    let tr = simulate(&sp, &eigs, &init, 20.0, 1.0 / 200.0).unwrap();
    let series = tr.energy_series(1).unwrap();
    for w in series.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
    }
    assert!(series.energy.last().unwrap() < &series.energy[0]);
}

#[test]
fn elastic_presets_decay_eventually() {
    for name in ALL_PRESETS.iter().filter(|p| p.variant() == Variant::DelayElastic) {
        let (sp, eigs) = make_preset(*name, std::f64::consts::PI, 4, 1.0, 1.0, 1.0).unwrap();
        let init = InitialData::smooth_default(&sp, &eigs).unwrap();
        let tr = simulate(&sp, &eigs, &init, 50.0, 1.0 / 64.0).unwrap();
        let e0 = energy(&tr, 0.0, sp.xi).unwrap();
        let e1 = energy(&tr, 50.0, sp.xi).unwrap();
        assert!(e1 < e0, "{name}: {e0} -> {e1}");
    }
}

fn random_stable_spec(rng: &mut ChaCha8Rng) -> SystemSpec {
    let tau = rng.random_range(0.3..1.0);
    if rng.random_bool(0.5) {
        let a = tau * rng.random_range(1.0..2.0);
        elastic_spec(rng.random_range(0.3..0.5), rng.random_range(0.5..1.0), a, tau)
    } else {
        heat_spec(rng.random_range(0.0..0.5), rng.random_range(0.3..1.0), rng.random_range(1.5..3.0), 1.0, tau)
    }
}

#[test]
fn step_halving_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        let sp = random_stable_spec(&mut rng);
        let eigs = [1.0, 4.0, 9.0];
        let init = InitialData::smooth_default(&sp, &eigs).unwrap();
        let t_end = 4.0 * sp.tau;
        let dt = sp.tau / 100.0;
        let a = simulate(&sp, &eigs, &init, t_end, dt).unwrap();
        let b = simulate(&sp, &eigs, &init, t_end, dt / 2.0).unwrap();
        for j in 0..eigs.len() {
            let ya = a.state(j, t_end).unwrap();
            let yb = b.state(j, t_end).unwrap();
            let scale = yb.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for c in 0..3 {
                assert!((ya[c] - yb[c]).abs() <= 1e-7 * scale, "{sp:?} mode {j}: {ya:?} vs {yb:?}");
            }
        }
    }
}

#[test]
fn adaptive_refinement_converges() {
    let (sp, eigs) = make_preset(PresetName::StringKV, std::f64::consts::PI, 3, 1.0, 1.0, 1.0).unwrap();
    let init = InitialData::smooth_default(&sp, &eigs).unwrap();
    let run = simulate_adaptive(&sp, &eigs, &init, 4.0, 0.125, 1e-6, 8).unwrap();
    assert!(run.converged);
    assert!(run.relative_change < 1e-6);
}

#[test]
fn simulation_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sp = heat_spec(0.25, 0.75, 2.0, 1.0, 0.5);
    let eigs = [1.0, 5.0];
    let mut random_init = || InitialData {
        u: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        v: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        theta: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        history: HistoryFn::ModalCoefficients((0..2).map(|_| rng.random_range(-1.0..1.0)).collect()),
    };
    let (x, y) = (random_init(), random_init());
    let coeffs = |h: &HistoryFn| match h {
        HistoryFn::ModalCoefficients(c) => c.clone(),
        _ => unreachable!(),
    };
    let (hx, hy) = (coeffs(&x.history), coeffs(&y.history));
    let sum = InitialData {
        u: x.u.iter().zip(&y.u).map(|(a, b)| a + b).collect(),
        v: x.v.iter().zip(&y.v).map(|(a, b)| a + b).collect(),
        theta: x.theta.iter().zip(&y.theta).map(|(a, b)| a + b).collect(),
        history: HistoryFn::ModalCoefficients(hx.iter().zip(&hy).map(|(a, b)| a + b).collect()),
    };
    let (tx, ty, ts) = (
        simulate(&sp, &eigs, &x, 3.0, 0.05).unwrap(),
        simulate(&sp, &eigs, &y, 3.0, 0.05).unwrap(),
        simulate(&sp, &eigs, &sum, 3.0, 0.05).unwrap(),
    );
    for j in 0..2 {
        for k in 0..ts.times.len() {
            for c in 0..3 {
                let lhs = ts.states[j][k][c];
                let rhs = tx.states[j][k][c] + ty.states[j][k][c];
                assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
            }
        }
    }
}

#[test]
fn blow_up_guard_stops_unstable_probe() {
    let sp = SystemSpec::probe(Variant::DelayElastic, 0.5, 0.5, 0.0, 1.0, 1.0, 2.0).unwrap();
    let eigs: Vec<f64> = (1..=30).map(|j| (j as f64 * std::f64::consts::PI).powi(2)).collect();
    let init = InitialData::smooth_default(&sp, &eigs).unwrap();
    let tr = simulate(&sp, &eigs, &init, 400.0, 1.0 / 256.0).unwrap();
    assert!(matches!(tr.status, RunStatus::BlowUp { .. }), "{:?}", tr.status);
}

#[test]
fn decay_rate_matches_abscissa() {
    // Single-mode runs: E decays at twice the rightmost root's real part.
    let cases = [
        (make_preset(PresetName::PlateDelay, std::f64::consts::PI, 1, 1.0, 1.0, 1.0).unwrap().0, 1.0),
        (make_preset(PresetName::Beam1, std::f64::consts::PI, 1, 2.0, 1.0, 1.0).unwrap().0, 16.0),
        (heat_spec(0.5, 1.0, 2.0, 1.0, 1.0), 4.0),
    ];
    for (sp, lam) in cases {
        let ab = spectral_abscissa(&sp, &[lam], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init = InitialData {
            u: vec![rng.random_range(0.5..1.0)],
            v: vec![rng.random_range(-1.0..1.0)],
            theta: vec![rng.random_range(-1.0..1.0)],
            history: HistoryFn::ModalCoefficients(vec![rng.random_range(-1.0..1.0)]),
        };
        let t_end = 40.0 * sp.tau;
        let tr = simulate(&sp, &[lam], &init, t_end, sp.tau / 64.0).unwrap();
        let series = tr.energy_series(4).unwrap();
        let fit = fit_exponential_rate(&series, (20.0 * sp.tau, t_end)).unwrap();
        let want = -2.0 * ab.value;
        assert!(fit.w > 0.0);
        assert!((fit.w - want).abs() <= 0.15 * want, "{:?} λ={lam}: w={} vs {want}", sp.variant, fit.w);
        let early = fit_exponential_rate(&series, (5.0 * sp.tau, 10.0 * sp.tau)).unwrap();
        let late = fit_exponential_rate(&series, (10.0 * sp.tau, 15.0 * sp.tau)).unwrap();
        assert!((early.w - late.w).abs() <= 0.1 * late.w, "windows {} vs {}", early.w, late.w);
        let _ = ModeSystem::new(sp, lam).unwrap();
    }
}

#[test]
fn polynomial_fit_discriminates() {
    let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
    let exp = EnergySeries { energy: times.iter().map(|t| (-t).exp()).collect(), times: times.clone(), tau: 1.0 };
    let pow = EnergySeries { energy: times.iter().map(|t| 3.0 / (1.0 + t * t)).collect(), times, tau: 1.0 };
    let fe = fit_polynomial_order(&exp, (10.0, 20.0)).unwrap();
    let fp = fit_polynomial_order(&pow, (10.0, 20.0)).unwrap();
    assert!(fe.p > 5.0);
    assert!(fp.r_squared > 0.999);
    assert!(fe.r_squared < fp.r_squared);
}

#[test]
fn beam2_early_window_power() {
    let (sp, eigs) = make_preset(PresetName::Beam2, std::f64::consts::PI, 8, 2.0, 1.0, 1.0).unwrap();
    let init = InitialData::smooth_default(&sp, &eigs).unwrap();
    let tr = simulate(&sp, &eigs, &init, 30.0, 1.0 / 128.0).unwrap();
    let series = tr.energy_series(8).unwrap();
    let fit = fit_polynomial_order(&series, (2.0, 12.0)).unwrap();
    assert!(fit.truncation_limited);
    assert!((1.0..=3.0).contains(&fit.p), "p = {}", fit.p);
}
