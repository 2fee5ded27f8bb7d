//! Seeded property suites: region algebra, coercivity sampling,
//! dissipativity sampling and generator/characteristic-root agreement.
//!
//! Every suite is deterministic for a given seed and reports, per property,
//! how many trials passed and the worst value of the checked quantity.

use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chareq::{find_roots, refine_root, ModeSystem, Rect};
use crate::error::{Error, Result};
use crate::generator::{
    build_grid, dissipativity_form, eigenvalues_of, mode_eigenvalues, shifted_dissipativity_form,
    ModeGenerator, ModeState,
};
use crate::model::{
    coercivity_margin, union_identity_check, union_identity_on_grid,
    xi_interval_system2, RationalPoint, RegionLabel, SystemSpec, Variant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SuiteName {
    Regions,
    Coercivity,
    Dissipativity,
    Oracle,
}

pub const ALL_SUITES: [SuiteName; 4] =
    [SuiteName::Regions, SuiteName::Coercivity, SuiteName::Dissipativity, SuiteName::Oracle];

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Regions => "regions",
            SuiteName::Coercivity => "coercivity",
            SuiteName::Dissipativity => "dissipativity",
            SuiteName::Oracle => "oracle",
        }
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_SUITES
            .iter()
            .copied()
            .find(|n| n.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub trials: usize,
    pub passed: usize,
    /// Worst value of the checked quantity (property specific; documented by
    /// the name).
    pub worst: f64,
}

impl PropertyResult {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), trials: 0, passed: 0, worst: f64::NEG_INFINITY }
    }

    fn record(&mut self, ok: bool, value: f64) {
        self.trials += 1;
        if ok {
            self.passed += 1;
        }
        if value > self.worst || self.worst.is_nan() {
            self.worst = value;
        }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.ok())
    }
}

pub fn run_suite(name: SuiteName, seed: u64) -> Result<SuiteReport> {
    let properties = match name {
        SuiteName::Regions => regions_suite()?,
        SuiteName::Coercivity => coercivity_suite(seed),
        SuiteName::Dissipativity => dissipativity_suite(seed)?,
        SuiteName::Oracle => oracle_suite()?,
    };
    Ok(SuiteReport { suite: name, seed, properties })
}

fn regions_suite() -> Result<Vec<PropertyResult>> {
    let report = union_identity_on_grid(20);
    let mut partition = PropertyResult::new("partition-violations-21x21");
    partition.record(report.holds(), report.counterexamples.len() as f64);
    let mut s3 = PropertyResult::new("s3-points-in-q");
    let mut s3_in_q = 0usize;
    for b in 0..=20 {
        for a in 0..=20 {
            let p = RationalPoint::new(b, a, 20)?;
            let label = p.classify();
            if label == RegionLabel::S3 && 2 * b - a <= 20 {
                s3_in_q += 1;
            }
        }
    }
    s3.record(s3_in_q == 0, s3_in_q as f64);
    let mut union = PropertyResult::new("union-identity-step-0.05");
    let u = union_identity_check(0.05)?;
    union.record(u.holds(), u.counterexamples.len() as f64);
    Ok(vec![partition, s3, union])
}

/// `λ` with `Re λ ≥ 0` and log-uniform modulus in `[1e-8, 1e3]`.
fn random_right_half(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = 10f64.powf(rng.random_range(-8.0..=3.0));
    let phi = rng.random_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2);
    Complex64::from_polar(r, phi)
}

fn coercivity_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for a in [1.0, 2.0] {
        for f in [1.0, 0.5] {
            let tau = a * f;
            let mut p = PropertyResult::new(&format!("margin-positive a={a} tau={tau} (worst = -min margin/|λ|²)"));
            for _ in 0..100_000 {
                let l = random_right_half(&mut rng);
                let m = coercivity_margin(l, a, tau);
                p.record(m > 0.0, -m / l.norm_sqr());
            }
            out.push(p);
        }
    }
    for a in [1.0, 2.0] {
        let tau = 2.0 * a;
        let mut p = PropertyResult::new(&format!("negative-witness a={a} tau={tau} (worst = min margin/|λ|²)"));
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let l = random_right_half(&mut rng);
            best = best.min(coercivity_margin(l, a, tau) / l.norm_sqr());
        }
        p.record(best < 0.0, best);
        out.push(p);
    }
    out
}

fn random_state(rng: &mut ChaCha8Rng, mode: &ModeSystem, n: usize) -> ModeState {
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut st = ModeState { u: c(), v: c(), theta: c(), z: (0..n).map(|_| c()).collect() };
    let (idx, coef) = mode.trace();
    st.z[n - 1] = coef * [st.u, st.v, st.theta][idx];
    st
}

/// Random point of `Q` away from the `2β - α = 1` edge.
fn random_q_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let b: f64 = rng.random_range(0.0..=1.0);
        let a: f64 = rng.random_range(0.0..=1.0);
        if 2.0 * b - a <= 1.0 {
            return (b, a);
        }
    }
}

/// Five heat-delay specs with `ξ` inside `J` and five elastic-delay specs
/// with `a ≥ τ`, `ξ ≥ 2τ/a`, all drawn from `rng`.
pub fn dissipativity_specs(rng: &mut ChaCha8Rng) -> Result<Vec<SystemSpec>> {
    let mut specs = Vec::new();
    for _ in 0..5 {
        let (beta, alpha) = random_q_point(rng);
        let kappa = rng.random_range(0.5..2.0);
        let a = kappa * rng.random_range(1.05..3.0);
        let tau = rng.random_range(0.1..2.0);
        let j = xi_interval_system2(a, kappa, tau)?;
        let xi = j.lo + (j.hi - j.lo) * rng.random_range(0.02..0.98);
        specs.push(SystemSpec::new(Variant::DelayHeat, beta, alpha, a, kappa, tau, xi)?);
    }
    for _ in 0..5 {
        let (beta, alpha) = random_q_point(rng);
        let tau = rng.random_range(0.1..2.0);
        let a = tau * rng.random_range(1.0..3.0);
        let xi = 2.0 * tau / a * rng.random_range(1.0..3.0);
        specs.push(SystemSpec::new(Variant::DelayElastic, beta, alpha, a, 1.0, tau, xi)?);
    }
    Ok(specs)
}

fn dissipativity_suite(seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = dissipativity_specs(&mut rng)?;
    let n = 16;
    let grid = build_grid(n)?;
    let mut heat = PropertyResult::new("heat-form-nonpositive (worst = form/|U|²)");
    let mut elastic = PropertyResult::new("elastic-shifted-form-nonpositive (worst = shifted form/|U|²)");
    for sp in &specs {
        for _ in 0..1000 {
            let lam = 10f64.powf(rng.random_range(0.0..4.0));
            let mode = ModeSystem::new(*sp, lam)?;
            let st = random_state(&mut rng, &mode, n);
            let norm_sq = st.energy_norm_sq(&mode, &grid);
            match sp.variant {
                Variant::DelayHeat => {
                    let f = dissipativity_form(sp, &mode, &st, &grid)?;
                    heat.record(f <= 1e-12 * norm_sq, f / norm_sq);
                }
                Variant::DelayElastic => {
                    let f = shifted_dissipativity_form(sp, &mode, &st, &grid)?;
                    elastic.record(f <= 1e-12 * norm_sq, f / norm_sq);
                }
            }
        }
    }
    Ok(vec![heat, elastic])
}

/// Fixed `(spec, λ_j)` pairs for the generator/root agreement checks. Delays
/// are short enough that every eigenvalue with `Re > -5` is resolved at
/// `n = 32`.
pub fn oracle_pairs() -> Result<Vec<(SystemSpec, f64)>> {
    let elastic = [
        (0.5, 0.5, 1.0, 0.05),
        (0.5, 0.5, 10.0, 0.1),
        (0.3, 0.8, 4.0, 0.2),
        (0.0, 1.0, 2.0, 0.1),
        (0.5, 1.0, 25.0, 0.05),
        (0.4, 0.6, 100.0, 0.05),
        (0.2, 0.5, 7.0, 0.2),
        (0.5, 0.5, 50.0, 0.1),
        (0.1, 0.9, 3.0, 0.2),
        (0.45, 0.7, 16.0, 0.1),
    ];
    let heat = [
        (0.5, 0.5, 1.0, 0.05),
        (0.0, 0.5, 10.0, 0.1),
        (0.3, 0.8, 4.0, 0.2),
        (0.0, 1.0, 2.0, 0.1),
        (0.5, 1.0, 9.0, 0.05),
        (0.4, 0.6, 100.0, 0.05),
        (0.2, 0.3, 7.0, 0.2),
        (0.7, 0.6, 50.0, 0.1),
        (0.1, 0.9, 3.0, 0.2),
        (0.25, 0.25, 16.0, 0.1),
    ];
    let mut out = Vec::new();
    for (beta, alpha, lam, tau) in elastic {
        let a = 1.0;
        out.push((SystemSpec::new(Variant::DelayElastic, beta, alpha, a, 1.0, tau, 2.0 * tau / a)?, lam));
    }
    for (beta, alpha, lam, tau) in heat {
        let a = 2.0;
        out.push((SystemSpec::new(Variant::DelayHeat, beta, alpha, a, 1.0, tau, tau * a)?, lam));
    }
    Ok(out)
}

fn oracle_suite() -> Result<Vec<PropertyResult>> {
    let mut newton = PropertyResult::new("eigenvalue-newton-displacement (worst = |root-μ|/(1+|μ|))");
    let mut small = PropertyResult::new("tiny-delay-roots-vs-undelayed (worst = max distance)");
    for (sp, lam) in oracle_pairs()? {
        let gen = ModeGenerator::new(ModeSystem::new(sp, lam)?, build_grid(32)?);
        for mu in mode_eigenvalues(&gen)?.into_iter().filter(|z| z.re > -5.0) {
            let r = refine_root(&gen.mode, mu);
            let d = (r.root - mu).norm() / (1.0 + mu.norm());
            newton.record(r.converged && d <= 1e-6, d);
        }
        let tiny = SystemSpec::new(sp.variant, sp.beta, sp.alpha, sp.a, sp.kappa, 1e-8, sp.xi * 1e-8 / sp.tau)?;
        let mode = ModeSystem::new(tiny, lam)?;
        let cubic = eigenvalues_of(&ModeGenerator::new(mode, build_grid(4)?).undelayed_block())?;
        let r = cubic.iter().map(|z| z.norm()).fold(0.0, f64::max) + 1.0;
        let found = find_roots(&mode, Rect::new(-r - 0.37, r + 0.41, -r - 0.29, r + 0.33))?;
        let mut worst: f64 = 0.0;
        for c in &cubic {
            let d = found.roots.iter().map(|r| (r.value - c).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        small.record(worst <= 1e-5 && found.total_multiplicity() == 3, worst);
    }
    Ok(vec![newton, small])
}
