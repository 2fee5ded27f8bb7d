//! Time integration of truncated delayed systems.
//!
//! Each mode is an ODE for `(u, v, θ)` driven by its own delayed trace
//! `q(t - τ)`, with `q = λ_j^{1/2}u` (elastic delay) or `q = λ_j^{α/2}θ`
//! (heat delay). Steps have length `τ/m` for an integer `m`, so every RK4
//! stage needs the trace only at a completed step point or at the midpoint of
//! a completed step, where cubic Hermite interpolation is used. Before
//! `t = 0` the trace is read from the initial history.

use std::fmt;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::chareq::ModeSystem;
use crate::error::{Error, Result};
use crate::generator::CollocationGrid;
use crate::model::{SystemSpec, Variant};

/// Initial history of the delayed trace on `[-τ, 0]`.
#[derive(Clone)]
pub enum HistoryFn {
    ConstantZero,
    /// Constant value per mode.
    ModalCoefficients(Vec<f64>),
    /// `f(j, t)` for mode index `j` and `t ∈ [-τ, 0]`.
    Callable(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

impl HistoryFn {
    pub fn value(&self, j: usize, t: f64) -> f64 {
        match self {
            HistoryFn::ConstantZero => 0.0,
            HistoryFn::ModalCoefficients(c) => c[j],
            HistoryFn::Callable(f) => f(j, t),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            HistoryFn::ConstantZero => "constant-zero",
            HistoryFn::ModalCoefficients(_) => "modal-coefficients",
            HistoryFn::Callable(_) => "callable",
        }
    }
}

impl fmt::Debug for HistoryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryFn::ModalCoefficients(c) => f.debug_tuple("ModalCoefficients").field(c).finish(),
            other => f.write_str(other.kind()),
        }
    }
}

/// Modal initial state plus history.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub history: HistoryFn,
}

impl InitialData {
    pub fn zero(modes: usize) -> Self {
        Self {
            u: vec![0.0; modes],
            v: vec![0.0; modes],
            theta: vec![0.0; modes],
            history: HistoryFn::ConstantZero,
        }
    }

    /// `u_j = θ_j = 1/λ_j`, `v_j = 0`, constant history equal to the trace at
    /// `t = 0`.
    pub fn smooth_default(spec: &SystemSpec, eigenvalues: &[f64]) -> Result<Self> {
        let u: Vec<f64> = eigenvalues.iter().map(|l| 1.0 / l).collect();
        let theta = u.clone();
        let mut h = Vec::with_capacity(eigenvalues.len());
        for (j, &lam) in eigenvalues.iter().enumerate() {
            let m = ModeSystem::new(*spec, lam)?;
            h.push(trace_of(&m, u[j], theta[j]));
        }
        Ok(Self { u, v: vec![0.0; eigenvalues.len()], theta, history: HistoryFn::ModalCoefficients(h) })
    }

    fn check(&self, modes: usize) -> Result<()> {
        if self.u.len() != modes || self.v.len() != modes || self.theta.len() != modes {
            return Err(Error::InvalidParameter(format!(
                "initial data has {}/{}/{} entries for {modes} modes",
                self.u.len(),
                self.v.len(),
                self.theta.len()
            )));
        }
        if let HistoryFn::ModalCoefficients(c) = &self.history {
            if c.len() != modes {
                return Err(Error::InvalidParameter(format!(
                    "history has {} coefficients for {modes} modes",
                    c.len()
                )));
            }
        }
        Ok(())
    }
}

fn trace_of(mode: &ModeSystem, u: f64, theta: f64) -> f64 {
    match mode.spec.variant {
        Variant::DelayElastic => mode.sqrt_lambda * u,
        Variant::DelayHeat => mode.pow_half_alpha * theta,
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RunStatus {
    Completed,
    /// Some modal amplitude exceeded `1e12` at time `t`; the trajectory stops
    /// there.
    BlowUp { t: f64 },
}

/// Threshold of the blow-up guard.
pub const BLOW_UP: f64 = 1e12;

/// Stored solution: `(u, v, θ)` and their time derivatives at every step of
/// every mode, so states and traces can be interpolated anywhere.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: SystemSpec,
    pub eigenvalues: Vec<f64>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `states[j][k] = [u, v, θ]` of mode `j` at `times[k]`.
    pub states: Vec<Vec<[f64; 3]>>,
    pub derivs: Vec<Vec<[f64; 3]>>,
    pub history: HistoryFn,
    pub status: RunStatus,
    modes: Vec<ModeSystem>,
}

fn rhs(mode: &ModeSystem, y: [f64; 3], delayed: f64) -> [f64; 3] {
    let sp = &mode.spec;
    let [u, v, th] = y;
    match sp.variant {
        Variant::DelayElastic => [
            v,
            -mode.sqrt_lambda * delayed - sp.a * mode.lambda_j * v + mode.pow_beta * th,
            -mode.pow_alpha * th - mode.pow_beta * v,
        ],
        Variant::DelayHeat => [
            v,
            -mode.lambda_j * u + mode.pow_beta * th,
            -sp.kappa * mode.pow_half_alpha * delayed - sp.a * mode.pow_alpha * th - mode.pow_beta * v,
        ],
    }
}

fn trace_and_rate(mode: &ModeSystem, y: [f64; 3], dy: [f64; 3]) -> (f64, f64) {
    match mode.spec.variant {
        Variant::DelayElastic => (mode.sqrt_lambda * y[0], mode.sqrt_lambda * dy[0]),
        Variant::DelayHeat => (mode.pow_half_alpha * y[2], mode.pow_half_alpha * dy[2]),
    }
}

fn axpy(y: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

struct ModeRun {
    states: Vec<[f64; 3]>,
    derivs: Vec<[f64; 3]>,
    blow_up: Option<usize>,
}

/// Bound on the modal Jacobian in energy-scaled variables, including the
/// delayed coefficient.
fn stiffness(mode: &ModeSystem) -> f64 {
    let sp = &mode.spec;
    let r = mode.sqrt_lambda;
    match sp.variant {
        Variant::DelayElastic => {
            r.max(r + sp.a * mode.lambda_j + mode.pow_beta).max(mode.pow_beta + mode.pow_alpha)
        }
        Variant::DelayHeat => {
            r.max(r + mode.pow_beta).max(mode.pow_beta + (sp.a + sp.kappa) * mode.pow_alpha)
        }
    }
}

/// Internal RK4 substeps per stored step so that `h·‖J‖ ≤ 2.5`.
pub fn substeps_for(mode: &ModeSystem, dt: f64) -> usize {
    ((dt * stiffness(mode) / 2.5).ceil() as usize).max(1)
}

/// Runs `steps` stored steps of length `τ/m`, each split into `sub` RK4
/// substeps. Traces of the last `τ` are kept in a ring buffer.
fn integrate_mode(
    mode: &ModeSystem,
    j: usize,
    y0: [f64; 3],
    history: &HistoryFn,
    m: usize,
    steps: usize,
    sub: usize,
) -> ModeRun {
    let tau = mode.spec.tau;
    let mf = m * sub;
    let h = tau / mf as f64;
    let ring_len = mf + 2;
    let mut ring: Vec<(f64, f64)> = vec![(0.0, 0.0); ring_len];
    // Delayed trace at fine step point k - mf (+ half a step when `half`).
    let delayed = |ring: &Vec<(f64, f64)>, k: usize, half: bool| -> f64 {
        if k < mf {
            let s = (k as f64 - mf as f64) * h + if half { 0.5 * h } else { 0.0 };
            return history.value(j, s.min(0.0));
        }
        let i = k - mf;
        let (q0, d0) = ring[i % ring_len];
        if !half {
            return q0;
        }
        let (q1, d1) = ring[(i + 1) % ring_len];
        0.5 * (q0 + q1) + h / 8.0 * (d0 - d1)
    };
    let mut states = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);
    let mut y = y0;
    let mut blow_up = None;
    let total = steps * sub;
    for k in 0..=total {
        let f0 = rhs(mode, y, delayed(&ring, k, false));
        ring[k % ring_len] = trace_and_rate(mode, y, f0);
        let stored = k % sub == 0;
        if stored {
            states.push(y);
            derivs.push(f0);
        }
        if y.iter().any(|x| !x.is_finite() || x.abs() > BLOW_UP) {
            if stored {
                states.pop();
                derivs.pop();
            }
            blow_up = Some(states.len().saturating_sub(1));
            break;
        }
        if k == total {
            break;
        }
        let d_half = delayed(&ring, k, true);
        let d_next = delayed(&ring, k + 1, false);
        let k1 = f0;
        let k2 = rhs(mode, axpy(y, 0.5 * h, k1), d_half);
        let k3 = rhs(mode, axpy(y, 0.5 * h, k2), d_half);
        let k4 = rhs(mode, axpy(y, h, k3), d_next);
        y = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ];
    }
    ModeRun { states, derivs, blow_up }
}

/// Integrates every mode on `[0, T]` with classical RK4.
///
/// The step is `τ/⌈τ/dt⌉` (never larger than `dt`). Requires `dt ≤ τ/8` and
/// `T ≥ 2τ`. A history that does not match the initial trace at `t = 0` is
/// accepted with a warning.
pub fn simulate(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    init: &InitialData,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let tau = spec.tau;
    if eigenvalues.is_empty() {
        return Err(Error::InvalidParameter("no modes to simulate".into()));
    }
    if !(dt > 0.0 && dt <= tau / 8.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must lie in (0, τ/8 = {}]", tau / 8.0)));
    }
    if !(t_end.is_finite() && t_end >= 2.0 * tau * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!("T = {t_end} must be at least 2τ = {}", 2.0 * tau)));
    }
    init.check(eigenvalues.len())?;
    let modes: Vec<ModeSystem> =
        eigenvalues.iter().map(|&l| ModeSystem::new(*spec, l)).collect::<Result<_>>()?;
    let m = (tau / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = tau / m as f64;
    let steps = (t_end / h * (1.0 - 1e-12)).ceil() as usize;
    for (j, mode) in modes.iter().enumerate() {
        let q0 = trace_of(mode, init.u[j], init.theta[j]);
        let h0 = init.history.value(j, 0.0);
        if (q0 - h0).abs() > 1e-8 * q0.abs().max(h0.abs()).max(1.0) {
            warn!("mode {j}: history at t=0 is {h0}, initial trace is {q0}");
        }
    }
    let runs: Vec<ModeRun> = modes
        .par_iter()
        .enumerate()
        .map(|(j, mode)| {
            let sub = substeps_for(mode, h);
            integrate_mode(mode, j, [init.u[j], init.v[j], init.theta[j]], &init.history, m, steps, sub)
        })
        .collect();
    let stop = runs.iter().filter_map(|r| r.blow_up).min();
    let kept = stop.map_or(steps + 1, |k| k + 1);
    let times: Vec<f64> = (0..kept).map(|k| k as f64 * h).collect();
    let status = match stop {
        Some(k) => RunStatus::BlowUp { t: times[k] },
        None => RunStatus::Completed,
    };
    let (states, derivs) = runs
        .into_iter()
        .map(|mut r| {
            r.states.truncate(kept);
            r.derivs.truncate(kept);
            (r.states, r.derivs)
        })
        .unzip();
    Ok(Trajectory {
        spec: *spec,
        eigenvalues: eigenvalues.to_vec(),
        dt: h,
        times,
        states,
        derivs,
        history: init.history.clone(),
        status,
        modes,
    })
}

/// Outcome of [`simulate_adaptive`].
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub trajectory: Trajectory,
    pub halvings: usize,
    /// `|E_T(dt) - E_T(dt/2)| / E_T(dt/2)` of the final pair.
    pub relative_change: f64,
    pub converged: bool,
}

/// Halves `dt` until the terminal energy changes by less than `rel_tol`
/// relative (at most `max_halvings` times).
pub fn simulate_adaptive(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    init: &InitialData,
    t_end: f64,
    dt: f64,
    rel_tol: f64,
    max_halvings: usize,
) -> Result<AdaptiveRun> {
    let mut coarse = simulate(spec, eigenvalues, init, t_end, dt)?;
    let mut h = coarse.dt;
    let mut rel = f64::INFINITY;
    for halvings in 1..=max_halvings {
        h *= 0.5;
        let fine = simulate(spec, eigenvalues, init, t_end, h)?;
        let e_c = coarse.final_energy();
        let e_f = fine.final_energy();
        rel = (e_c - e_f).abs() / e_f.abs().max(f64::MIN_POSITIVE);
        if rel < rel_tol || e_f == e_c {
            return Ok(AdaptiveRun { trajectory: fine, halvings, relative_change: rel, converged: true });
        }
        coarse = fine;
    }
    Ok(AdaptiveRun { trajectory: coarse, halvings: max_halvings, relative_change: rel, converged: false })
}

/// Quadrature used for the history term `∫₀¹ |q(t - τρ)|² dρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryQuadrature {
    /// Exact for the piecewise cubic history: 4-point Gauss–Legendre on every
    /// step interval (and on step-sized pieces of the initial history).
    Piecewise,
    /// Clenshaw–Curtis with the given number of nodes over the whole delay
    /// interval.
    ClenshawCurtis(usize),
}

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn modes(&self) -> &[ModeSystem] {
        &self.modes
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let hi = self.t_end();
        let tol = 1e-9 * self.dt;
        if !(t >= -tol && t <= hi + tol) {
            return Err(Error::OutOfRange { t, lo: 0.0, hi });
        }
        let x = (t / self.dt).clamp(0.0, (self.times.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.times.len().saturating_sub(2));
        Ok((k, x - k as f64))
    }

    /// `(u, v, θ)` of mode `j` at time `t` (cubic Hermite between steps).
    pub fn state(&self, j: usize, t: f64) -> Result<[f64; 3]> {
        let (k, s) = self.locate(t)?;
        if self.times.len() == 1 {
            return Ok(self.states[j][0]);
        }
        let (y0, d0, y1, d1) = (self.states[j][k], self.derivs[j][k], self.states[j][k + 1], self.derivs[j][k + 1]);
        Ok([0, 1, 2].map(|c| hermite(y0[c], d0[c], y1[c], d1[c], self.dt, s)))
    }

    /// Delayed trace `q_j(s)` for `s ∈ [-τ, T]`: the history for `s ≤ 0`, the
    /// Hermite interpolant of the solution afterwards.
    pub fn trace(&self, j: usize, s: f64) -> Result<f64> {
        if s <= 0.0 {
            if s < -self.spec.tau * (1.0 + 1e-12) {
                return Err(Error::OutOfRange { t: s, lo: -self.spec.tau, hi: self.t_end() });
            }
            return Ok(self.history.value(j, s));
        }
        let y = self.state(j, s)?;
        Ok(trace_of(&self.modes[j], y[0], y[2]))
    }

    fn history_integral(&self, j: usize, t: f64, quad: HistoryQuadrature) -> Result<f64> {
        let tau = self.spec.tau;
        match quad {
            HistoryQuadrature::ClenshawCurtis(n) => {
                let g = CollocationGrid::new(n)?;
                let mut acc = 0.0;
                for (rho, w) in g.nodes.iter().zip(&g.quad) {
                    let q = self.trace(j, t - tau * rho)?;
                    acc += w * q * q;
                }
                Ok(acc)
            }
            HistoryQuadrature::Piecewise => {
                // Break points: multiples of dt inside [t - τ, t] plus both ends.
                let a = t - tau;
                let mut pts = vec![a];
                let first = (a / self.dt).floor() as i64 + 1;
                let last = (t / self.dt).ceil() as i64 - 1;
                for k in first..=last {
                    let x = k as f64 * self.dt;
                    if x > a && x < t {
                        pts.push(x);
                    }
                }
                pts.push(t);
                let mut acc = 0.0;
                for w in pts.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    if r - l <= 0.0 {
                        continue;
                    }
                    let (c, h) = (0.5 * (l + r), 0.5 * (r - l));
                    for (x, wt) in GL4_X.iter().zip(GL4_W) {
                        let q = self.trace(j, c + h * x)?;
                        acc += wt * h * q * q;
                    }
                }
                Ok(acc / tau)
            }
        }
    }

    /// Energy `½Σ_j(λ_j u² + v² + θ² + ξ∫₀¹ q_j(t - τρ)² dρ)` with the exact
    /// piecewise history quadrature.
    pub fn energy(&self, t: f64, xi: f64) -> Result<f64> {
        self.energy_with(t, xi, HistoryQuadrature::Piecewise)
    }

    pub fn energy_with(&self, t: f64, xi: f64, quad: HistoryQuadrature) -> Result<f64> {
        let mut total = 0.0;
        for (j, mode) in self.modes.iter().enumerate() {
            let [u, v, th] = self.state(j, t)?;
            let hist = self.history_integral(j, t, quad)?;
            total += mode.lambda_j * u * u + v * v + th * th + xi * hist;
        }
        Ok(0.5 * total)
    }

    fn final_energy(&self) -> f64 {
        self.energy(self.t_end(), self.spec.xi).unwrap_or(f64::NAN)
    }

    /// Energy at every `every`-th step, with the system's `ξ`.
    pub fn energy_series(&self, every: usize) -> Result<EnergySeries> {
        let every = every.max(1);
        let mut times = Vec::new();
        let mut e = Vec::new();
        for k in (0..self.times.len()).step_by(every) {
            times.push(self.times[k]);
            e.push(self.energy(self.times[k], self.spec.xi)?);
        }
        Ok(EnergySeries { times, energy: e, tau: self.spec.tau })
    }
}

/// Sampled energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub tau: f64,
}

/// `energy` at `t` (free-function form).
pub fn energy(traj: &Trajectory, t: f64, xi: f64) -> Result<f64> {
    traj.energy(t, xi)
}

/// Exponential fit `E ≈ C·E(0)·e^{-wt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub w: f64,
    pub c: f64,
    pub r_squared: f64,
}

/// Power-law fit `E ≈ c·t^{-p}`; advisory only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyFit {
    pub p: f64,
    pub r_squared: f64,
    /// Always set: a finite truncation decays exponentially, so the fitted
    /// power reflects a pre-asymptotic window.
    pub truncation_limited: bool,
}

fn window_points(series: &EnergySeries, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (t0, t1) = window;
    if !(t1 - t0 >= 5.0 * series.tau * (1.0 - 1e-12)) {
        return Err(Error::InsufficientSpan(format!(
            "window [{t0}, {t1}] shorter than 5τ = {}",
            5.0 * series.tau
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.energy)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(t, e)| (*t, *e))
        .collect();
    if let Some(&(t, value)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::NonpositiveEnergy { t, value });
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientSpan(format!("{} samples in window", pts.len())));
    }
    Ok(pts)
}

pub fn fit_exponential_rate(series: &EnergySeries, window: (f64, f64)) -> Result<ExpFit> {
    let pts = window_points(series, window)?;
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r2) = crate::resolvent::linear_fit(&x, &y);
    let e0 = series.energy.first().copied().unwrap_or(1.0);
    Ok(ExpFit { w: -slope, c: intercept.exp() / e0, r_squared: r2 })
}

pub fn fit_polynomial_order(series: &EnergySeries, window: (f64, f64)) -> Result<PolyFit> {
    if !(window.0 > 0.0) {
        return Err(Error::InvalidParameter("power-law window must start after t = 0".into()));
    }
    let pts = window_points(series, window)?;
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, r2) = crate::resolvent::linear_fit(&x, &y);
    Ok(PolyFit { p: -slope, r_squared: r2, truncation_limited: true })
}
