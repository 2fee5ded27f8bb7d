//! Stability verdicts over the `(β, α)` square.
//!
//! The predicted verdict comes only from the region predicates and the
//! hypotheses recorded in the `SystemSpec`; the measured verdict comes only from
//! characteristic roots and resolvent peaks. They are stored side by side and
//! compared afterwards.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::chareq::spectral_abscissa;
use crate::error::{Error, Result};
use crate::model::{
    in_instability_a1, in_instability_a2, poly_exponent_rational, RationalPoint, RegionLabel,
    SystemSpec, Variant,
};
use crate::presets::default_xi;
use crate::resolvent::{growth_exponent_fit, mode_peaks, ResolventSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Budget {
    /// 8 modes, 20 frequencies per decade.
    Fast,
    /// 20 modes, 40 frequencies per decade, refined peaks.
    Thorough,
}

impl Budget {
    pub fn modes(self) -> usize {
        match self {
            Budget::Fast => 8,
            Budget::Thorough => 20,
        }
    }

    pub fn per_decade(self) -> usize {
        match self {
            Budget::Fast => 20,
            Budget::Thorough => 40,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Budget::Fast => "fast",
            Budget::Thorough => "thorough",
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Budget::Fast),
            "thorough" => Ok(Budget::Thorough),
            other => Err(Error::InvalidParameter(format!("unknown budget `{other}`"))),
        }
    }
}

/// Calibration of the numerical verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Abscissa above which a point is `Unstable`.
    pub unstable_abscissa: f64,
    /// `γ̂` below which the envelope counts as bounded.
    pub exponential_gamma: f64,
    /// Minimum `r²` of a polynomial growth fit.
    pub min_r_squared: f64,
    /// Collocation nodes for the resolvent.
    pub n_rho: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { unstable_abscissa: 1e-6, exponential_gamma: 0.15, min_r_squared: 0.8, n_rho: 32 }
    }
}

/// Which statement the prediction rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Theorem {
    ElasticExponential,
    HeatExponential,
    HeatPolynomialS1,
    HeatPolynomialS2,
    UndampedUnstable,
    NoClaim,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::ElasticExponential => "elastic-exponential",
            Theorem::HeatExponential => "heat-exponential",
            Theorem::HeatPolynomialS1 => "heat-polynomial-s1",
            Theorem::HeatPolynomialS2 => "heat-polynomial-s2",
            Theorem::UndampedUnstable => "undamped-unstable",
            Theorem::NoClaim => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Predicted {
    Exponential,
    Polynomial { gamma: f64 },
    Unstable,
    NoClaim,
}

impl Predicted {
    pub fn class(&self) -> &'static str {
        match self {
            Predicted::Exponential => "exponential",
            Predicted::Polynomial { .. } => "polynomial",
            Predicted::Unstable => "unstable",
            Predicted::NoClaim => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub label: RegionLabel,
    pub theorem: Theorem,
    pub verdict: Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Measured {
    Exponential,
    Polynomial { gamma_hat: f64 },
    Unstable,
    Inconclusive,
}

impl Measured {
    pub fn class(&self) -> &'static str {
        match self {
            Measured::Exponential => "exponential",
            Measured::Polynomial { .. } => "polynomial",
            Measured::Unstable => "unstable",
            Measured::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Evidence {
    pub abscissa: Option<f64>,
    pub witness_mode: Option<usize>,
    pub gamma_hat: Option<f64>,
    pub r_squared: Option<f64>,
    /// Largest per-mode resolvent peak.
    pub envelope_max: Option<f64>,
    pub modes_used: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub beta: f64,
    pub alpha: f64,
    pub predicted: Prediction,
    pub measured: Measured,
    pub evidence: Evidence,
}

/// Prediction from the region predicates and the recorded hypotheses.
pub fn predict(spec: &SystemSpec) -> Prediction {
    predict_with_label(spec, spec.region())
}

fn predict_with_label(spec: &SystemSpec, label: RegionLabel) -> Prediction {
    let none = Prediction { label, theorem: Theorem::NoClaim, verdict: Predicted::NoClaim };
    if spec.probe && spec.a == 0.0 {
        let unstable = match spec.variant {
            Variant::DelayElastic => in_instability_a1(spec.beta, spec.alpha),
            Variant::DelayHeat => in_instability_a2(spec.beta, spec.alpha),
        };
        return if unstable {
            Prediction { label, theorem: Theorem::UndampedUnstable, verdict: Predicted::Unstable }
        } else {
            none
        };
    }
    if !spec.admissible || !label.in_q() {
        return none;
    }
    match (spec.variant, label) {
        (_, RegionLabel::BoundaryQ) => none,
        (Variant::DelayElastic, _) => Prediction {
            label,
            theorem: Theorem::ElasticExponential,
            verdict: Predicted::Exponential,
        },
        (Variant::DelayHeat, RegionLabel::S) => Prediction {
            label,
            theorem: Theorem::HeatExponential,
            verdict: Predicted::Exponential,
        },
        (Variant::DelayHeat, RegionLabel::S1) => Prediction {
            label,
            theorem: Theorem::HeatPolynomialS1,
            verdict: Predicted::Polynomial { gamma: 2.0 * (spec.alpha - 2.0 * spec.beta) },
        },
        (Variant::DelayHeat, RegionLabel::S2) => Prediction {
            label,
            theorem: Theorem::HeatPolynomialS2,
            verdict: Predicted::Polynomial { gamma: 2.0 - 2.0 * (spec.alpha + 2.0 * spec.beta) },
        },
        _ => none,
    }
}

/// Modes used by a budget: the whole list when it is short enough, otherwise
/// 8 (Fast) or 20 (Thorough) modes at log-spaced indices over the list
/// (first and last kept), so the peak frequencies still span the same range.
pub fn select_modes(eigenvalues: &[f64], budget: Budget) -> Vec<f64> {
    let k = budget.modes();
    let n = eigenvalues.len();
    if n <= k {
        return eigenvalues.to_vec();
    }
    let mut idx: Vec<usize> = (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            ((n as f64).powf(t).round() as usize).clamp(1, n) - 1
        })
        .collect();
    idx.dedup();
    // Fill gaps left by rounding collisions with the smallest unused indices.
    let mut next = 0;
    while idx.len() < k {
        if !idx.contains(&next) {
            idx.push(next);
        }
        next += 1;
    }
    idx.sort_unstable();
    idx.into_iter().map(|i| eigenvalues[i]).collect()
}

/// Numerical verdict at one point.
///
/// Unstable when the spectral abscissa exceeds the threshold; otherwise the
/// growth exponent of the per-mode resolvent peaks decides between bounded
/// (exponential) and polynomial growth. Polynomial fits with poor `r²` are
/// reported as inconclusive.
pub fn classify_point_numeric(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    budget: Budget,
) -> Result<RegionVerdict> {
    classify_point_with(spec, eigenvalues, budget, &Thresholds::default())
}

pub fn classify_point_with(
    spec: &SystemSpec,
    eigenvalues: &[f64],
    budget: Budget,
    th: &Thresholds,
) -> Result<RegionVerdict> {
    if !spec.admissible && !spec.probe {
        return Err(Error::Inadmissible(format!("{spec:?} violates the stability hypotheses")));
    }
    let eigs = select_modes(eigenvalues, budget);
    let predicted = predict(spec);
    let mut ev = Evidence { modes_used: eigs.len(), ..Default::default() };
    let ab = spectral_abscissa(spec, &eigs, None)?;
    ev.abscissa = Some(ab.value);
    ev.witness_mode = ab.witness;
    let verdict = |measured, evidence| RegionVerdict {
        beta: spec.beta,
        alpha: spec.alpha,
        predicted,
        measured,
        evidence,
    };
    if ab.value > th.unstable_abscissa {
        return Ok(verdict(Measured::Unstable, ev));
    }
    let peaks = mode_peaks(spec, &eigs, th.n_rho, budget.per_decade())?;
    ev.envelope_max = peaks.iter().map(|p| p.norm).reduce(f64::max);
    let samples: Vec<ResolventSample> = peaks.iter().map(|p| p.as_sample()).collect();
    let fit = match growth_exponent_fit(&samples) {
        Ok(f) => f,
        Err(e) => {
            ev.note = Some(e.to_string());
            return Ok(verdict(Measured::Inconclusive, ev));
        }
    };
    ev.gamma_hat = Some(fit.gamma_hat);
    ev.r_squared = Some(fit.r_squared);
    let measured = if fit.gamma_hat < th.exponential_gamma {
        Measured::Exponential
    } else if fit.r_squared < th.min_r_squared {
        ev.note = Some(format!("growth fit r² = {:.3}", fit.r_squared));
        Measured::Inconclusive
    } else {
        Measured::Polynomial { gamma_hat: fit.gamma_hat }
    };
    Ok(verdict(measured, ev))
}

/// Parameters shared by every point of a sweep. `xi = None` uses the
/// variant's default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepParams {
    pub variant: Variant,
    pub a: f64,
    pub kappa: f64,
    pub tau: f64,
    pub xi: Option<f64>,
    /// Build probe specs (allows `a = 0`).
    pub probe: bool,
}

/// Grid point skipped because it is outside `Q` (non-probe sweeps only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub beta: f64,
    pub alpha: f64,
    pub label: RegionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub params: SweepParams,
    pub budget: Budget,
    pub rows: Vec<RegionVerdict>,
    pub skipped: Vec<SkippedPoint>,
}

/// `(den+1)²` points `(b/den, a/den)`; `den = 10` is the 11×11 grid.
pub fn rational_grid(den: i64) -> Result<Vec<RationalPoint>> {
    let mut out = Vec::new();
    for b in 0..=den {
        for a in 0..=den {
            out.push(RationalPoint::new(b, a, den)?);
        }
    }
    Ok(out)
}

/// Classifies every grid point in parallel. Points outside `Q` are skipped
/// (unless probing); per-point failures become `Inconclusive` rows with the
/// error in the note. Rows are sorted by `(β, α)`.
pub fn sweep_grid(
    params: &SweepParams,
    points: &[RationalPoint],
    eigenvalues: &[f64],
    budget: Budget,
    th: &Thresholds,
) -> SweepTable {
    let xi = params.xi.unwrap_or_else(|| default_xi(params.variant, params.a, params.tau));
    let results: Vec<std::result::Result<RegionVerdict, SkippedPoint>> = points
        .par_iter()
        .map(|p| {
            let (beta, alpha) = (p.beta(), p.alpha());
            let label = p.classify();
            if !params.probe && !label.in_q() {
                return Err(SkippedPoint { beta, alpha, label });
            }
            let built = if params.probe {
                SystemSpec::probe(params.variant, beta, alpha, params.a, params.kappa, params.tau, xi)
            } else {
                SystemSpec::new(params.variant, beta, alpha, params.a, params.kappa, params.tau, xi)
            };
            let spec = match built {
                Ok(s) => s,
                Err(_) => return Err(SkippedPoint { beta, alpha, label }),
            };
            let predicted = predict_with_label(&spec, label);
            let mut row = classify_point_with(&spec, eigenvalues, budget, th).unwrap_or_else(|e| {
                RegionVerdict {
                    beta,
                    alpha,
                    predicted,
                    measured: Measured::Inconclusive,
                    evidence: Evidence { note: Some(e.to_string()), ..Default::default() },
                }
            });
            row.predicted = predicted;
            if let Predicted::Polynomial { .. } = predicted.verdict {
                if let Some(g) = poly_exponent_rational(p) {
                    row.predicted.verdict = Predicted::Polynomial { gamma: g };
                }
            }
            Ok(row)
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(v) => rows.push(v),
            Err(s) => skipped.push(s),
        }
    }
    let key = |b: f64, a: f64| (b, a);
    rows.sort_by(|x, y| key(x.beta, x.alpha).partial_cmp(&key(y.beta, y.alpha)).unwrap());
    skipped.sort_by(|x, y| key(x.beta, x.alpha).partial_cmp(&key(y.beta, y.alpha)).unwrap());
    SweepTable { params: *params, budget, rows, skipped }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6e}"))
}

impl SweepTable {
    /// CSV with one row per grid point and columns `beta, alpha, region,
    /// predicted, measured, gamma_hat, abscissa, witness_mode`. Skipped points
    /// carry `measured = skipped` and empty evidence.
    pub fn to_csv(&self) -> String {
        let mut lines: Vec<(f64, f64, String)> = Vec::with_capacity(self.rows.len() + self.skipped.len());
        for r in &self.rows {
            let predicted = match r.predicted.verdict {
                Predicted::Polynomial { gamma } => format!("polynomial({gamma:.4})"),
                other => other.class().to_string(),
            };
            let line = format!(
                "{:.4},{:.4},{},{},{},{},{},{}",
                r.beta,
                r.alpha,
                r.predicted.label,
                predicted,
                r.measured.class(),
                fmt_opt(r.evidence.gamma_hat),
                fmt_opt(r.evidence.abscissa),
                r.evidence.witness_mode.map_or_else(String::new, |j| (j + 1).to_string()),
            );
            lines.push((r.beta, r.alpha, line));
        }
        for p in &self.skipped {
            let line = format!("{:.4},{:.4},{},{},skipped,,,", p.beta, p.alpha, p.label, Predicted::NoClaim.class());
            lines.push((p.beta, p.alpha, line));
        }
        lines.sort_by(|x, y| (x.0, x.1).partial_cmp(&(y.0, y.1)).unwrap());
        let mut s = String::from("beta,alpha,region,predicted,measured,gamma_hat,abscissa,witness_mode\n");
        for (_, _, l) in lines {
            s.push_str(&l);
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> SweepSummary {
        let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let (mut compared, mut agreed) = (0usize, 0usize);
        let mut disagreements = Vec::new();
        for r in &self.rows {
            let p = r.predicted.verdict.class();
            let m = r.measured.class();
            *confusion.entry(p.to_string()).or_default().entry(m.to_string()).or_default() += 1;
            if r.predicted.verdict == Predicted::NoClaim
                || r.predicted.label == RegionLabel::BoundaryQ
                || r.measured == Measured::Inconclusive
            {
                continue;
            }
            compared += 1;
            if p == m {
                agreed += 1;
            } else {
                disagreements.push((r.beta, r.alpha));
            }
        }
        let inconclusive = self.rows.iter().filter(|r| r.measured == Measured::Inconclusive).count();
        SweepSummary {
            points: self.rows.len(),
            skipped: self.skipped.len(),
            compared,
            agreed,
            agreement_rate: if compared == 0 { 1.0 } else { agreed as f64 / compared as f64 },
            inconclusive,
            confusion,
            disagreements,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub skipped: usize,
    /// Rows with a prediction, off `BoundaryQ`, with a conclusive measurement.
    pub compared: usize,
    pub agreed: usize,
    pub agreement_rate: f64,
    pub inconclusive: usize,
    /// `confusion[predicted][measured]`.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    pub disagreements: Vec<(f64, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_selection_spans_range() {
        let eigs: Vec<f64> = (1..=20).map(|j| (j as f64).powi(4)).collect();
        let sel = select_modes(&eigs, Budget::Fast);
        assert_eq!(sel.len(), 8);
        assert_eq!(sel[0], 1.0);
        assert_eq!(*sel.last().unwrap(), 160000.0);
        assert!(sel.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(select_modes(&eigs[..5], Budget::Fast).len(), 5);
        assert_eq!(select_modes(&eigs, Budget::Thorough), eigs);
        let long: Vec<f64> = (1..=400).map(|j| (j as f64).powi(2)).collect();
        let sel = select_modes(&long, Budget::Thorough);
        assert_eq!(sel.len(), 20);
        assert_eq!((sel[0], sel[19]), (1.0, 160000.0));
        assert!(sel.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let params = SweepParams { variant: Variant::DelayHeat, a: 2.0, kappa: 1.0, tau: 1.0, xi: None, probe: false };
        let t = sweep_grid(&params, &[], &[1.0], Budget::Fast, &Thresholds::default());
        assert!(t.rows.is_empty() && t.skipped.is_empty());
        assert_eq!(t.to_csv().lines().count(), 1);
    }

    #[test]
    fn predictions_follow_regions() {
        let s = SystemSpec::new(Variant::DelayHeat, 0.0, 0.5, 2.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(predict(&s).verdict, Predicted::Polynomial { gamma: 1.0 });
        let s = SystemSpec::new(Variant::DelayHeat, 0.5, 0.5, 2.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(predict(&s).theorem, Theorem::HeatExponential);
        let s = SystemSpec::new(Variant::DelayElastic, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(predict(&s).verdict, Predicted::Exponential);
        let s = SystemSpec::probe(Variant::DelayElastic, 0.5, 0.5, 0.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(predict(&s).verdict, Predicted::Unstable);
        let s = SystemSpec::new(Variant::DelayHeat, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(predict(&s).verdict, Predicted::NoClaim);
    }
}
