//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

/// Roots of the monic cubic `s³ + c2 s² + c1 s + c0` by Cardano's formula,
/// each polished by a few Newton steps on the polynomial.
pub fn cubic_roots(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = Complex64::new(q * q / 4.0 + p.powi(3) / 27.0, 0.0).sqrt();
    let mut u = (Complex64::new(-q / 2.0, 0.0) + disc).powf(1.0 / 3.0);
    if u.norm() < 1e-300 {
        u = (Complex64::new(-q / 2.0, 0.0) - disc).powf(1.0 / 3.0);
    }
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut uk = u;
    for r in out.iter_mut() {
        let vk = if uk.norm() > 0.0 { -p / (3.0 * uk) } else { Complex64::new(0.0, 0.0) };
        *r = uk + vk - c2 / 3.0;
        uk *= omega;
    }
    for r in out.iter_mut() {
        for _ in 0..4 {
            let f = ((*r + c2) * *r + c1) * *r + c0;
            let df = (3.0 * *r + 2.0 * c2) * *r + c1;
            if df.norm() > 0.0 {
                *r -= f / df;
            }
        }
    }
    out
}

/// Determinant of the 2×2 modal system obtained by substituting `e^{st}`,
/// written out independently of the library.
pub fn modal_determinant(
    heat: bool,
    lam: f64,
    beta: f64,
    alpha: f64,
    a: f64,
    kappa: f64,
    tau: f64,
    s: Complex64,
) -> Complex64 {
    let e = (-s * tau).exp();
    let lb = lam.powf(beta);
    let la = lam.powf(alpha);
    let (m11, m12, m21, m22) = if heat {
        (s * s + lam, Complex64::new(-lb, 0.0), lb * s, s + (kappa * e + a) * la)
    } else {
        (s * s + lam * e + a * lam * s, Complex64::new(-lb, 0.0), lb * s, s + la)
    };
    m11 * m22 - m12 * m21
}

/// Monic cubic `[c2, c1, c0]` of the undelayed (`τ = 0`) modal determinant,
/// expanded by hand.
pub fn undelayed_coeffs(heat: bool, lam: f64, beta: f64, alpha: f64, a: f64, kappa: f64) -> [f64; 3] {
    let lb2 = lam.powf(2.0 * beta);
    let la = lam.powf(alpha);
    if heat {
        // (s² + λ)(s + (κ+a)λ^α) + λ^{2β} s
        let c = (kappa + a) * la;
        [c, lam + lb2, c * lam]
    } else {
        // (s² + aλ s + λ)(s + λ^α) + λ^{2β} s
        [la + a * lam, lam + a * lam * la + lb2, lam * la]
    }
}

/// Lexicographic matching distance between two root lists of equal length.
pub fn max_matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}
