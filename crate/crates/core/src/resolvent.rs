//! Resolvent norms of the modal generators along the imaginary axis.
//!
//! For `(iω - 𝒜)U = F` the transport equation `iωz + z_ρ/τ = f` is solved by
//! writing `z = e^{-iωτρ} z̃`, which turns it into `z̃_ρ/τ = e^{iωτρ} f`. The
//! factor `e^{iωτρ}` is unimodular, so the resolvent norm equals the norm of
//! the inverse of the demodulated operator, in which `ω` enters only through
//! `iω` on `(u, v, θ)` and the phase `e^{-iωτ}` on `z(1)`. Collocating the
//! demodulated operator keeps full accuracy at frequencies far beyond what the
//! grid could resolve in `z` itself.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chareq::{refine_root, ModeSystem};
use crate::error::{Error, Result};
use crate::generator::{CollocationGrid, ModeGenerator};
use crate::model::{SystemSpec, Variant};

/// One resolvent evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSample {
    pub omega: f64,
    pub mode_index: usize,
    pub lambda_j: f64,
    pub norm: f64,
}

const SINGULAR_RATIO: f64 = 1e-13;

fn weighted_min_singular(gen: &ModeGenerator, b: DMatrix<Complex64>, omega: f64) -> Result<f64> {
    let w: Vec<f64> = gen.energy_weights().iter().map(|x| x.sqrt()).collect();
    let dim = b.nrows();
    let scaled = DMatrix::from_fn(dim, dim, |r, c| b[(r, c)] * (w[r] / w[c]));
    let sv = scaled.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin.is_finite() && smax.is_finite()) {
        return Err(Error::NearSingular { omega, ratio: f64::NAN });
    }
    let ratio = smin / smax;
    if ratio < SINGULAR_RATIO {
        return Err(Error::NearSingular { omega, ratio });
    }
    Ok(smin)
}

/// The demodulated operator `iωP - M(ω)` with `P` the projection on
/// `(u, v, θ)` and the `z(1)` coupling multiplied by `e^{-iωτ}`.
pub fn demodulated_operator(gen: &ModeGenerator, omega: f64) -> DMatrix<Complex64> {
    let dim = gen.dim();
    let mut b = gen.matrix.map(|x| Complex64::new(-x, 0.0));
    for k in 0..3 {
        b[(k, k)] += Complex64::new(0.0, omega);
    }
    let row = match gen.mode.spec.variant {
        Variant::DelayElastic => 1,
        Variant::DelayHeat => 2,
    };
    b[(row, 3)] *= Complex64::from_polar(1.0, -omega * gen.mode.spec.tau);
    debug_assert_eq!(b.nrows(), dim);
    b
}

/// Energy-norm resolvent `‖(iω - 𝒜_j)^{-1}‖` of one mode, from the
/// demodulated collocation. Tends to `2τ/π` (the norm of `τ∫₀^ρ`) as
/// `|ω| → ∞`.
pub fn mode_resolvent_norm(gen: &ModeGenerator, omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("omega must be finite, got {omega}")));
    }
    Ok(1.0 / weighted_min_singular(gen, demodulated_operator(gen, omega), omega)?)
}

/// `1/σ_min(iωI - M)` of the collocated matrix itself, in the energy-weighted
/// norm. Agrees with [`mode_resolvent_norm`] while `ωτ` is resolved by the
/// grid and decays like `1/|ω|` beyond `‖M‖`.
pub fn collocated_resolvent_norm(gen: &ModeGenerator, omega: f64) -> Result<f64> {
    let dim = gen.dim();
    let mut b = gen.matrix.map(|x| Complex64::new(-x, 0.0));
    for k in 0..dim {
        b[(k, k)] += Complex64::new(0.0, omega);
    }
    Ok(1.0 / weighted_min_singular(gen, b, omega)?)
}

/// Logarithmic frequency grid with `per_decade` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && per_decade > 0) {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo < hi and points per decade > 0, got [{lo}, {hi}], {per_decade}"
        )));
    }
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    Ok((0..count)
        .map(|k| lo * 10f64.powf(decades * k as f64 / (count - 1) as f64))
        .collect())
}

/// Default sweep grid: `[0.1, 10³·√λ_max]`, `per_decade` points per decade.
pub fn default_omega_grid(lambda_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    log_grid(0.1, 1e3 * lambda_max.sqrt(), per_decade)
}

/// Relative resolution of refined peak locations.
pub const PEAK_REL_TOL: f64 = 1e-3;

fn refine_local_maxima(
    gen: &ModeGenerator,
    base: &[(f64, f64)],
) -> Result<Vec<(f64, f64)>> {
    let mut extra = Vec::new();
    for i in 1..base.len().saturating_sub(1) {
        if !(base[i].1 >= base[i - 1].1 && base[i].1 >= base[i + 1].1) {
            continue;
        }
        let (mut l, mut c, mut r) = (base[i - 1], base[i], base[i + 1]);
        while (r.0 - l.0) > PEAK_REL_TOL * c.0 {
            let ml = 0.5 * (l.0 + c.0);
            let mr = 0.5 * (c.0 + r.0);
            let fl = (ml, mode_resolvent_norm(gen, ml)?);
            let fr = (mr, mode_resolvent_norm(gen, mr)?);
            extra.push(fl);
            extra.push(fr);
            if fl.1 > c.1 && fl.1 >= fr.1 {
                (l, c, r) = (l, fl, c);
            } else if fr.1 > c.1 {
                (l, c, r) = (c, fr, r);
            } else {
                (l, c, r) = (fl, c, fr);
            }
        }
    }
    Ok(extra)
}

/// Norms of every mode at every grid frequency, plus refinement samples
/// around each local maximum of each mode (three-point bisection until the
/// bracket is narrower than [`PEAK_REL_TOL`] relative). Sorted by
/// `(mode, ω)`.
pub fn resolvent_sweep(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    omega_grid: &[f64],
    n: usize,
) -> Result<Vec<ResolventSample>> {
    if eigenvalues.is_empty() || omega_grid.is_empty() {
        return Err(Error::InvalidParameter("resolvent sweep needs modes and frequencies".into()));
    }
    let grid = CollocationGrid::new(n)?;
    let mut grid_sorted = omega_grid.to_vec();
    grid_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let per_mode: Vec<Vec<ResolventSample>> = eigenvalues
        .par_iter()
        .enumerate()
        .map(|(j, &lam)| {
            let gen = ModeGenerator::new(ModeSystem::new(*spec, lam)?, grid.clone());
            let base: Vec<(f64, f64)> = grid_sorted
                .iter()
                .map(|&w| Ok((w, mode_resolvent_norm(&gen, w)?)))
                .collect::<Result<_>>()?;
            let mut all = base.clone();
            all.extend(refine_local_maxima(&gen, &base)?);
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            all.dedup_by(|a, b| a.0 == b.0);
            Ok(all
                .into_iter()
                .map(|(omega, norm)| ResolventSample { omega, mode_index: j, lambda_j: lam, norm })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_mode.into_iter().flatten().collect())
}

/// Point of the per-frequency envelope `max_j ‖R_j(iω)‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub omega: f64,
    pub norm: f64,
    pub mode_index: usize,
}

/// Maximum over modes at each sampled frequency, sorted by `ω`.
pub fn envelope(samples: &[ResolventSample]) -> Vec<EnvelopePoint> {
    let mut sorted: Vec<&ResolventSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap().then(a.mode_index.cmp(&b.mode_index)));
    let mut out: Vec<EnvelopePoint> = Vec::new();
    for s in sorted {
        match out.last_mut() {
            Some(last) if last.omega == s.omega => {
                if s.norm > last.norm {
                    last.norm = s.norm;
                    last.mode_index = s.mode_index;
                }
            }
            _ => out.push(EnvelopePoint { omega: s.omega, norm: s.norm, mode_index: s.mode_index }),
        }
    }
    out
}

/// Largest resolvent norm of one mode on its elastic band
/// `[√λ_j/4, 4√λ_j]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModePeak {
    pub mode_index: usize,
    pub lambda_j: f64,
    pub omega: f64,
    pub norm: f64,
}

impl ModePeak {
    pub fn as_sample(&self) -> ResolventSample {
        ResolventSample {
            omega: self.omega,
            mode_index: self.mode_index,
            lambda_j: self.lambda_j,
            norm: self.norm,
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

// Golden-section maximisation of `f` on `[a, b]`, in log ω.
fn golden_max(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, rel: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    while hi - lo > rel {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1.exp())?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2.exp())?;
        }
    }
    Ok(if f1 >= f2 { (x1.exp(), f1) } else { (x2.exp(), f2) })
}

/// Peak of one mode's resolvent on its elastic band.
///
/// Candidates are a logarithmic grid with `per_decade` points per decade,
/// `√λ_j` itself, and the imaginary parts of the characteristic roots
/// reached by Newton from `i√λ_j` and from the generator eigenvalues nearest
/// the axis (sharp peaks sit just above weakly damped roots). The three best
/// candidates are polished by golden-section search.
pub fn mode_peak(gen: &ModeGenerator, mode_index: usize, per_decade: usize) -> Result<ModePeak> {
    let w0 = gen.mode.sqrt_lambda;
    let (lo, hi) = (0.25 * w0, 4.0 * w0);
    let mut cands = log_grid(lo, hi, per_decade.max(4))?;
    cands.push(w0);
    let mut seeds = vec![Complex64::new(0.0, w0)];
    if let Ok(ev) = crate::generator::mode_eigenvalues(gen) {
        seeds.extend(ev.into_iter().filter(|z| z.im > lo && z.im < hi).take(6));
    }
    for s in seeds {
        let r = refine_root(&gen.mode, s);
        if r.converged && r.root.im > lo && r.root.im < hi {
            cands.push(r.root.im);
        }
    }
    let f = |w: f64| mode_resolvent_norm(gen, w);
    let mut vals: Vec<(f64, f64)> = cands.iter().map(|&w| Ok((w, f(w)?))).collect::<Result<_>>()?;
    vals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.partial_cmp(&b.0).unwrap()));
    let mut best = vals[0];
    let step = 10f64.powf(1.0 / per_decade.max(4) as f64);
    for &(w, _) in vals.iter().take(3) {
        let a = (w / step).max(lo);
        let b = (w * step).min(hi);
        let (wm, fm) = golden_max(&f, a, b, 1e-7)?;
        if fm > best.1 {
            best = (wm, fm);
        }
    }
    Ok(ModePeak { mode_index, lambda_j: gen.mode.lambda_j, omega: best.0, norm: best.1 })
}

/// [`mode_peak`] for every mode, in parallel, ordered by mode index.
pub fn mode_peaks(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    n: usize,
    per_decade: usize,
) -> Result<Vec<ModePeak>> {
    let grid = CollocationGrid::new(n)?;
    eigenvalues
        .par_iter()
        .enumerate()
        .map(|(j, &lam)| {
            let gen = ModeGenerator::new(ModeSystem::new(*spec, lam)?, grid.clone());
            mode_peak(&gen, j, per_decade)
        })
        .collect()
}

/// Least-squares line `y = slope·x + intercept` with its `r²`. A constant
/// `y` is fitted exactly (`r² = 1`).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy <= f64::EPSILON * my.abs().max(1.0) * n {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Growth exponent of the resolvent envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Log-log slope of the running maximum of the peak norms against peak
    /// frequency.
    pub gamma_hat: f64,
    pub r_squared: f64,
    pub samples_used: usize,
    pub window: (f64, f64),
    /// Slope of the raw peak norms (without the running maximum).
    pub raw_slope: f64,
}

/// Fits `‖R‖ ~ ω^γ` through per-mode peaks.
///
/// Samples are reduced to one peak per `mode_index` (the largest norm) and
/// ordered by peak frequency. The fit uses the running maximum of the peak
/// norms, i.e. the envelope `sup_{ω' ≤ ω}` that bounds the resolvent growth.
/// Requires at least six peaks spanning two decades in frequency.
pub fn growth_exponent_fit(samples: &[ResolventSample]) -> Result<GrowthFit> {
    let mut peaks: Vec<ResolventSample> = Vec::new();
    for s in samples {
        if !(s.omega > 0.0 && s.norm > 0.0 && s.omega.is_finite() && s.norm.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid sample {s:?}")));
        }
        match peaks.iter_mut().find(|p| p.mode_index == s.mode_index) {
            Some(p) if s.norm > p.norm => *p = *s,
            Some(_) => {}
            None => peaks.push(*s),
        }
    }
    if peaks.len() < 6 {
        return Err(Error::InsufficientSpan(format!("{} peaks, need at least 6", peaks.len())));
    }
    peaks.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap().then(a.mode_index.cmp(&b.mode_index)));
    let lo = peaks[0].omega;
    let hi = peaks[peaks.len() - 1].omega;
    if hi / lo < 100.0 {
        return Err(Error::InsufficientSpan(format!(
            "peak frequencies span [{lo:.4}, {hi:.4}], need two decades"
        )));
    }
    let x: Vec<f64> = peaks.iter().map(|p| p.omega.ln()).collect();
    let raw: Vec<f64> = peaks.iter().map(|p| p.norm.ln()).collect();
    let mut env = raw.clone();
    for k in 1..env.len() {
        env[k] = env[k].max(env[k - 1]);
    }
    let (gamma_hat, _, r_squared) = linear_fit(&x, &env);
    let (raw_slope, _, _) = linear_fit(&x, &raw);
    Ok(GrowthFit { gamma_hat, r_squared, samples_used: peaks.len(), window: (lo, hi), raw_slope })
}
