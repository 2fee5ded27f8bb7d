//! Per-mode characteristic functions and their zeros.
//!
//! Substituting `e^{λt}` into one mode of either delayed system and
//! eliminating `θ` gives a retarded exponential polynomial
//!
//! ```text
//! χ(λ) = P(λ) + e^{-λτ} Q(λ)
//! ```
//!
//! with cubic `P` and `Q` of degree ≤ 2. Its zeros are the eigenvalues of the
//! modal generator. Roots are located with the argument principle on
//! rectangles (phase-tracked, no derivative integrals) and polished with
//! Newton's method.
//!
//! Far in the left half-plane `e^{-λτ}` overflows long before the roots of
//! interest become inaccessible, so every contour evaluation works with the
//! scaled value `χ(λ)·e^{τ Re λ}` when `Re λ < 0`. The scaling factor is real
//! and positive, hence invisible to the argument.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{SystemSpec, Variant};

/// One eigenvalue `λ_j` of `A` together with the system it feeds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeSystem {
    pub spec: SystemSpec,
    pub lambda_j: f64,
    /// `λ_j^α`
    pub pow_alpha: f64,
    /// `λ_j^β`
    pub pow_beta: f64,
    /// `λ_j^{2β}`
    pub pow_2beta: f64,
    /// `λ_j^{1/2}`
    pub sqrt_lambda: f64,
    /// `λ_j^{α/2}`
    pub pow_half_alpha: f64,
}

impl ModeSystem {
    pub fn new(spec: SystemSpec, lambda_j: f64) -> Result<Self> {
        if !(lambda_j.is_finite() && lambda_j > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue must be finite and > 0, got {lambda_j}"
            )));
        }
        Ok(Self {
            spec,
            lambda_j,
            pow_alpha: lambda_j.powf(spec.alpha),
            pow_beta: lambda_j.powf(spec.beta),
            pow_2beta: lambda_j.powf(2.0 * spec.beta),
            sqrt_lambda: lambda_j.sqrt(),
            pow_half_alpha: lambda_j.powf(0.5 * spec.alpha),
        })
    }

    /// Coefficient `c` of the delayed trace `z(0) = c·x` and the index of `x`
    /// in the `(u, v, θ)` state: `λ_j^{1/2}u` or `λ_j^{α/2}θ`.
    pub fn trace(&self) -> (usize, f64) {
        match self.spec.variant {
            Variant::DelayElastic => (0, self.sqrt_lambda),
            Variant::DelayHeat => (2, self.pow_half_alpha),
        }
    }

    // (P, P', Q, Q') at s.
    fn parts(&self, s: Complex64) -> [Complex64; 4] {
        let sp = &self.spec;
        let lam = self.lambda_j;
        let la = self.pow_alpha;
        let c2b = self.pow_2beta;
        match sp.variant {
            Variant::DelayElastic => {
                let w = s * s + sp.a * lam * s;
                let dw = 2.0 * s + sp.a * lam;
                let h = s + la;
                [
                    w * h + s * c2b,
                    dw * h + w + c2b,
                    lam * h,
                    Complex64::new(lam, 0.0),
                ]
            }
            Variant::DelayHeat => {
                let e = s * s + lam;
                let h = s + sp.a * la;
                [
                    h * e + s * c2b,
                    e + 2.0 * s * h + c2b,
                    sp.kappa * la * e,
                    2.0 * sp.kappa * la * s,
                ]
            }
        }
    }

    /// `χ(s)` evaluated directly (may overflow far in the left half-plane).
    pub fn char_fn(&self, s: Complex64) -> Complex64 {
        let [p, _, q, _] = self.parts(s);
        p + (-s * self.spec.tau).exp() * q
    }

    /// `χ'(s)`.
    pub fn char_fn_derivative(&self, s: Complex64) -> Complex64 {
        let [_, dp, q, dq] = self.parts(s);
        dp + (-s * self.spec.tau).exp() * (dq - self.spec.tau * q)
    }

    /// Scaled evaluation: `χ(s) = value · e^{log_scale}` and likewise for `χ'`;
    /// `size` is `|P| + |e^{-sτ}Q|` on the same scale.
    pub(crate) fn eval_scaled(&self, s: Complex64) -> Scaled {
        let [p, dp, q, dq] = self.parts(s);
        let tau = self.spec.tau;
        if s.re >= 0.0 {
            let e = (-s * tau).exp();
            Scaled {
                value: p + e * q,
                deriv: dp + e * (dq - tau * q),
                size: p.norm() + e.norm() * q.norm(),
                log_scale: 0.0,
            }
        } else {
            let damp = (tau * s.re).exp();
            let phase = Complex64::from_polar(1.0, -tau * s.im);
            Scaled {
                value: p * damp + phase * q,
                deriv: dp * damp + phase * (dq - tau * q),
                size: p.norm() * damp + q.norm(),
                log_scale: -tau * s.re,
            }
        }
    }

    /// Residual scale used by [`refine_root`]: `max(1, |s|³ + λ_j^{1+α})`.
    pub fn residual_scale(&self, s: Complex64) -> f64 {
        (s.norm().powi(3) + self.lambda_j * self.pow_alpha).max(1.0)
    }

    /// `χ(0)`, which is `λ_j^{1+α}` (elastic) or `λ_j(κ+a)λ_j^α` (heat).
    pub fn value_at_zero(&self) -> f64 {
        match self.spec.variant {
            Variant::DelayElastic => self.lambda_j * self.pow_alpha,
            Variant::DelayHeat => self.lambda_j * ((self.spec.kappa + self.spec.a) * self.pow_alpha),
        }
    }

    /// Default search rectangle:
    /// `[-max(10, 2aλ_j), 1] × [-(2√λ_j + 10/τ), 2√λ_j + 10/τ]`.
    pub fn default_search(&self) -> Rect {
        let left = -(10f64.max(2.0 * self.spec.a * self.lambda_j));
        let half = 2.0 * self.sqrt_lambda + 10.0 / self.spec.tau;
        Rect { re_min: left, re_max: 1.0, im_min: -half, im_max: half }
    }

    /// Coefficients `[c0, c1, c2, c3]` of the undelayed (`τ = 0`) cubic.
    pub fn undelayed_cubic(&self) -> [f64; 4] {
        let sp = &self.spec;
        let (lam, la, c2b) = (self.lambda_j, self.pow_alpha, self.pow_2beta);
        match sp.variant {
            // (s² + λ + aλs)(s + λ^α) + s λ^{2β}
            Variant::DelayElastic => [
                lam * la,
                lam + sp.a * lam * la + c2b,
                la + sp.a * lam,
                1.0,
            ],
            // (s + (κ+a)λ^α)(s² + λ) + s λ^{2β}
            Variant::DelayHeat => {
                let c = (sp.kappa + sp.a) * la;
                [c * lam, lam + c2b, c, 1.0]
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub value: Complex64,
    pub deriv: Complex64,
    pub size: f64,
    pub log_scale: f64,
}

/// `χ` of a mode at `lambda`.
pub fn char_fn(mode: &ModeSystem, lambda: Complex64) -> Complex64 {
    mode.char_fn(lambda)
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.re_min <= s.re && s.re <= self.re_max && self.im_min <= s.im && s.im <= self.im_max
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::DegenerateRect(format!("{self:?}")));
        }
        Ok(())
    }

    fn inflate(&self, by: f64) -> Self {
        Self {
            re_min: self.re_min - by,
            re_max: self.re_max + by,
            im_min: self.im_min - by,
            im_max: self.im_max + by,
        }
    }

    fn expand(&self, by: f64) -> Self {
        self.inflate(by)
    }
}

// Split fraction slightly off 1/2 so bisection lines avoid the real axis and
// other symmetric positions where roots tend to sit.
const SPLIT: f64 = 0.5 + 0.0123456789;
const MAX_PHASE_STEP: f64 = PI / 4.0;
const CLOSE_REL: f64 = 1e-12;
const MAX_SEGMENTS: usize = 20_000_000;

enum Winding {
    Turns(i64),
    TooClose(Complex64),
}

fn side_winding(mode: &ModeSystem, from: Complex64, to: Complex64, acc: &mut f64) -> Option<Complex64> {
    let len = (to - from).norm();
    let tau = mode.spec.tau;
    // e^{-sτ} turns (or rescales) at rate τ per unit length.
    let h = (0.25 / tau).min(len / 16.0).max(len / 1.0e6);
    let n0 = ((len / h).ceil() as usize).clamp(16, 1_000_000);
    let point = |t: f64| from + (to - from) * t;
    let eval = |t: f64| -> std::result::Result<Complex64, Complex64> {
        let s = point(t);
        let v = mode.eval_scaled(s);
        if !(v.value.re.is_finite() && v.value.im.is_finite()) || v.value.norm() <= CLOSE_REL * v.size {
            Err(s)
        } else {
            Ok(v.value)
        }
    };
    let mut t_prev = 0.0;
    let mut v_prev = match eval(0.0) {
        Ok(v) => v,
        Err(s) => return Some(s),
    };
    let mut budget = MAX_SEGMENTS;
    for k in 1..=n0 {
        let t_target = k as f64 / n0 as f64;
        // Stack of pending right endpoints between t_prev and t_target.
        let mut stack: Vec<(f64, Complex64)> = Vec::new();
        let v_target = match eval(t_target) {
            Ok(v) => v,
            Err(s) => return Some(s),
        };
        stack.push((t_target, v_target));
        while let Some(&(t_next, v_next)) = stack.last() {
            let d = (v_next / v_prev).arg();
            if d.abs() <= MAX_PHASE_STEP {
                *acc += d;
                t_prev = t_next;
                v_prev = v_next;
                stack.pop();
                continue;
            }
            let tm = 0.5 * (t_prev + t_next);
            if (t_next - t_prev) * len < 1e-13 * (1.0 + point(tm).norm()) || budget == 0 {
                return Some(point(tm));
            }
            budget -= 1;
            match eval(tm) {
                Ok(vm) => stack.push((tm, vm)),
                Err(s) => return Some(s),
            }
        }
    }
    None
}

fn winding(mode: &ModeSystem, r: &Rect) -> Winding {
    let corners = [
        Complex64::new(r.re_min, r.im_min),
        Complex64::new(r.re_max, r.im_min),
        Complex64::new(r.re_max, r.im_max),
        Complex64::new(r.re_min, r.im_max),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        if let Some(p) = side_winding(mode, corners[k], corners[(k + 1) % 4], &mut total) {
            return Winding::TooClose(p);
        }
    }
    Winding::Turns((total / (2.0 * PI)).round() as i64)
}

/// Number of zeros of `χ` inside `rect`, counted with multiplicity.
///
/// When `χ` nearly vanishes on the contour the rectangle is inflated (up to
/// three times, by `1e-6`, `1e-4`, `1e-2` of its diagonal) before giving up.
pub fn count_roots(mode: &ModeSystem, rect: Rect) -> Result<usize> {
    rect.validate()?;
    let diag = rect.width().hypot(rect.height());
    let mut r = rect;
    let mut inflations = 0;
    loop {
        match winding(mode, &r) {
            Winding::Turns(n) => return Ok(n.max(0) as usize),
            Winding::TooClose(near) => {
                if inflations == 3 {
                    return Err(Error::ContourTooClose { near, inflations });
                }
                inflations += 1;
                r = rect.inflate(diag * 10f64.powi(-8 + 2 * inflations as i32));
            }
        }
    }
}

/// Outcome of Newton polishing.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefinedRoot {
    pub root: Complex64,
    /// `|χ(root)|`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_secant: bool,
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

fn residual_and_tol(mode: &ModeSystem, s: Complex64) -> (f64, f64, Scaled) {
    let v = mode.eval_scaled(s);
    let factor = v.log_scale.exp();
    let residual = v.value.norm() * factor;
    // Roundoff floor of evaluating P + e^{-sτ}Q is ~ size·ε; never demand
    // more than that, never less than the nominal scale.
    let scale = mode.residual_scale(s).max(v.size * factor);
    (residual, NEWTON_TOL * scale, v)
}

/// Newton's method on `χ` with the analytic derivative; falls back to a
/// secant step when `χ'` is negligible. Non-convergence is flagged, not an
/// error.
pub fn refine_root(mode: &ModeSystem, guess: Complex64) -> RefinedRoot {
    let mut s = guess;
    let (mut res, mut tol, mut v) = residual_and_tol(mode, s);
    let mut used_secant = false;
    // Previous iterate with its scaled value and log scale, for secant steps.
    let mut prev: Option<(Complex64, Complex64, f64)> = None;
    let mut iterations = 0;
    while res > tol && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let step = if v.deriv.norm() > 1e-14 * v.value.norm() {
            v.value / v.deriv
        } else {
            used_secant = true;
            let (s_old, val_old, log_old) = prev.unwrap_or_else(|| {
                let ds = Complex64::new(1e-6, 1e-6) * (1.0 + s.norm());
                let vo = mode.eval_scaled(s + ds);
                (s + ds, vo.value, vo.log_scale)
            });
            let val_old = val_old * (log_old - v.log_scale).exp();
            let denom = v.value - val_old;
            if denom.norm() == 0.0 {
                break;
            }
            v.value * (s - s_old) / denom
        };
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        prev = Some((s, v.value, v.log_scale));
        let cap = 10.0 * (1.0 + s.norm());
        let step = if step.norm() > cap { step * (cap / step.norm()) } else { step };
        s -= step;
        (res, tol, v) = residual_and_tol(mode, s);
    }
    let converged = res <= tol;
    if converged {
        // A couple of polishing steps, kept only if they reduce the residual.
        for _ in 0..2 {
            if v.deriv.norm() == 0.0 {
                break;
            }
            let cand = s - v.value / v.deriv;
            let (r2, _, v2) = residual_and_tol(mode, cand);
            if r2 < res {
                s = cand;
                res = r2;
                v = v2;
            } else {
                break;
            }
        }
    }
    RefinedRoot { root: s, residual: res, iterations, converged, used_secant }
}

/// A located zero of `χ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Zeros found inside a rectangle.
#[derive(Debug, Clone, Serialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    pub rect: Rect,
    /// Largest `|χ(root)|` in the set.
    pub residual: f64,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

fn multiplicity_at(mode: &ModeSystem, s: Complex64) -> usize {
    let r = 1e-8 * (1.0 + s.norm());
    let b = Rect::new(s.re - r, s.re + r, s.im - r, s.im + r);
    match count_roots(mode, b) {
        Ok(n) if n > 1 => n,
        _ => 1,
    }
}

// Isolates one root in `rect` (known to contain `count ≥ 1` roots): bisect
// until Newton from the centre lands inside a box holding exactly one zero.
fn isolate(mode: &ModeSystem, mut rect: Rect, prefer_upper: bool) -> Result<Root> {
    for _ in 0..200 {
        let n = count_roots(mode, rect)?;
        if n == 0 {
            return Err(Error::InvalidParameter("isolate called on an empty box".into()));
        }
        let size = rect.width().max(rect.height());
        let small = size < 1e-3 * (1.0 + rect.center().norm());
        if n == 1 || small {
            let guess = rect.center();
            let refined = refine_root(mode, guess);
            let tol_box = rect.expand(1e-9 * (size + rect.center().norm()));
            if refined.converged && tol_box.contains(refined.root) {
                let multiplicity = if n > 1 { multiplicity_at(mode, refined.root) } else { 1 };
                return Ok(Root {
                    value: refined.root,
                    multiplicity,
                    residual: refined.residual,
                    converged: true,
                });
            }
            if size < 1e-12 * (1.0 + rect.center().norm()) {
                return Ok(Root {
                    value: refined.root,
                    multiplicity: n,
                    residual: refined.residual,
                    converged: refined.converged,
                });
            }
        }
        // Split the longer side.
        let (a, b) = if rect.width() >= rect.height() {
            let x = rect.re_min + SPLIT * rect.width();
            (Rect { re_max: x, ..rect }, Rect { re_min: x, ..rect })
        } else {
            let y = rect.im_min + SPLIT * rect.height();
            let lower = Rect { im_max: y, ..rect };
            let upper = Rect { im_min: y, ..rect };
            if prefer_upper { (upper, lower) } else { (lower, upper) }
        };
        rect = if count_roots(mode, a)? > 0 { a } else { b };
    }
    Err(Error::InvalidParameter("root isolation did not terminate".into()))
}

/// The root of largest real part in `search`, or `None` if the region is
/// root-free. The right edge is pushed out while roots sit against it, and
/// the imaginary extent is doubled while the located root hugs the top edge.
pub fn rightmost_root(mode: &ModeSystem, search: Rect) -> Result<Option<Root>> {
    search.validate()?;
    let mut rect = search;
    for _ in 0..12 {
        let w = (0.25 * rect.width()).min(0.25);
        let edge = Rect { re_min: rect.re_max - w, ..rect };
        if count_roots(mode, edge)? == 0 {
            break;
        }
        rect.re_max += rect.re_max.abs().max(1.0);
    }
    for _ in 0..4 {
        let root = match rightmost_in(mode, rect)? {
            None => return Ok(None),
            Some(r) => r,
        };
        let margin = 0.05 * rect.height();
        if root.value.im.abs() < rect.im_max.max(-rect.im_min) - margin {
            return Ok(Some(root));
        }
        let grow = rect.height();
        rect.im_max += grow / 2.0;
        rect.im_min -= grow / 2.0;
    }
    rightmost_in(mode, rect)
}

fn rightmost_in(mode: &ModeSystem, rect: Rect) -> Result<Option<Root>> {
    if count_roots(mode, rect)? == 0 {
        return Ok(None);
    }
    let count_strip = |lo: f64, hi: f64| count_roots(mode, Rect { re_min: lo, re_max: hi, ..rect });
    // Walk left in doubling steps to bracket the rightmost real part.
    let mut hi = rect.re_max;
    let mut w = rect.width().min(1.0);
    let mut lo;
    loop {
        lo = (rect.re_max - w).max(rect.re_min);
        if count_strip(lo, hi)? > 0 {
            break;
        }
        if lo <= rect.re_min {
            return Ok(None);
        }
        hi = lo;
        w *= 2.0;
    }
    // Bisect: the strip [lo, hi] holds roots, nothing lies right of hi.
    let tol = 1e-3;
    while hi - lo > tol {
        let mid = lo + SPLIT * (hi - lo);
        if count_strip(mid, hi)? > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let strip = Rect { re_min: lo, re_max: hi, ..rect };
    let mut root = isolate(mode, strip, true)?;
    // Conjugate pairs: report the representative with Im ≥ 0.
    if root.value.im < 0.0 {
        root.value = root.value.conj();
    }
    Ok(Some(root))
}

/// All roots inside `rect`, by recursive subdivision.
pub fn find_roots(mode: &ModeSystem, rect: Rect) -> Result<RootSet> {
    rect.validate()?;
    let mut roots = Vec::new();
    let mut stack = vec![(rect, count_roots(mode, rect)?)];
    while let Some((r, n)) = stack.pop() {
        if n == 0 {
            continue;
        }
        let size = r.width().max(r.height());
        if n == 1 || size < 1e-6 * (1.0 + r.center().norm()) {
            let root = isolate(mode, r, true)?;
            roots.push(root);
            if root.multiplicity >= n {
                continue;
            }
            if size < 1e-6 * (1.0 + r.center().norm()) {
                // Cluster too tight to split further; attribute it to the root.
                let last = roots.last_mut().unwrap();
                last.multiplicity = n;
                continue;
            }
        }
        let (a, b) = if r.width() >= r.height() {
            let x = r.re_min + SPLIT * r.width();
            (Rect { re_max: x, ..r }, Rect { re_min: x, ..r })
        } else {
            let y = r.im_min + SPLIT * r.height();
            (Rect { im_max: y, ..r }, Rect { im_min: y, ..r })
        };
        let na = count_roots(mode, a)?;
        let nb = count_roots(mode, b)?;
        stack.push((a, na));
        stack.push((b, nb));
    }
    roots.sort_by(|x, y| {
        y.value
            .re
            .partial_cmp(&x.value.re)
            .unwrap()
            .then(y.value.im.partial_cmp(&x.value.im).unwrap())
    });
    let residual = roots.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(RootSet { roots, rect, residual })
}

/// Maximum over the supplied modes of the rightmost root's real part.
///
/// This is a lower bound for the abscissa of the full (untruncated) system.
#[derive(Debug, Clone, Serialize)]
pub struct Abscissa {
    /// `-inf` when no mode has a root in its search region.
    pub value: f64,
    /// Index into the eigenvalue list of the arg-max mode.
    pub witness: Option<usize>,
    pub root: Option<Root>,
    pub per_mode: Vec<Option<Root>>,
}

pub fn spectral_abscissa(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    search: Option<Rect>,
) -> Result<Abscissa> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidParameter("empty eigenvalue list".into()));
    }
    let per_mode: Vec<Option<Root>> = eigenvalues
        .par_iter()
        .map(|&lam| {
            let mode = ModeSystem::new(*spec, lam)?;
            rightmost_root(&mode, search.unwrap_or_else(|| mode.default_search()))
        })
        .collect::<Result<_>>()?;
    let mut best = Abscissa { value: f64::NEG_INFINITY, witness: None, root: None, per_mode };
    for (j, r) in best.per_mode.iter().enumerate() {
        if let Some(r) = r {
            if r.value.re > best.value {
                best.value = r.value.re;
                best.witness = Some(j);
                best.root = Some(*r);
            }
        }
    }
    Ok(best)
}
