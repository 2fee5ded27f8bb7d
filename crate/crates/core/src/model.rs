//! Parameter containers, the (β, α) region predicates and the scalar
//! thresholds that decide when the delayed generators are dissipative.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which term carries the delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `u'' + A u(t-τ) + a A u' - A^β θ = 0`, `θ' + A^α θ + A^β u' = 0`.
    DelayElastic,
    /// `u'' + A u - A^β θ = 0`, `θ' + κ A^α θ(t-τ) + a A^α θ + A^β u' = 0`.
    DelayHeat,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::DelayElastic => "delay-elastic",
            Variant::DelayHeat => "delay-heat",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "delay-elastic" | "elastic" | "i" | "1" => Ok(Variant::DelayElastic),
            "delay-heat" | "heat" | "ii" | "2" => Ok(Variant::DelayHeat),
            other => Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

/// One delayed thermoelastic system: the variant plus `(β, α, a, κ, τ, ξ)`.
///
/// `kappa` is carried by both variants but only enters [`Variant::DelayHeat`];
/// the delayed elastic term has unit coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub variant: Variant,
    pub beta: f64,
    pub alpha: f64,
    pub a: f64,
    pub kappa: f64,
    pub tau: f64,
    pub xi: f64,
    /// All hypotheses of the stability theorems hold: `a ≥ τ` and `ξ ≥ 2τ/a`
    /// for the elastic delay, `a ≥ κ` and `ξ ∈ J_{a,κ,τ}` for the heat delay.
    pub admissible: bool,
    /// Built through [`SystemSpec::probe`]; neither `Q` membership nor
    /// positivity of `a` was enforced.
    pub probe: bool,
}

impl SystemSpec {
    /// Checked constructor. Rejects points outside `Q` and nonpositive
    /// coefficients; records admissibility without requiring it.
    pub fn new(
        variant: Variant,
        beta: f64,
        alpha: f64,
        a: f64,
        kappa: f64,
        tau: f64,
        xi: f64,
    ) -> Result<Self> {
        check_unit("beta", beta)?;
        check_unit("alpha", alpha)?;
        if 2.0 * beta - alpha > 1.0 {
            return Err(Error::OutsideQ { beta, alpha });
        }
        check_positive("a", a)?;
        check_positive("kappa", kappa)?;
        check_positive("tau", tau)?;
        check_positive("xi", xi)?;
        let mut spec = SystemSpec {
            variant,
            beta,
            alpha,
            a,
            kappa,
            tau,
            xi,
            admissible: false,
            probe: false,
        };
        spec.admissible = spec.hypotheses_hold();
        Ok(spec)
    }

    /// Constructor for instability probes: allows `a = 0` and points outside
    /// `Q`. Only finiteness, `τ > 0`, `ξ > 0` and `κ > 0` are checked.
    pub fn probe(
        variant: Variant,
        beta: f64,
        alpha: f64,
        a: f64,
        kappa: f64,
        tau: f64,
        xi: f64,
    ) -> Result<Self> {
        check_unit("beta", beta)?;
        check_unit("alpha", alpha)?;
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidParameter(format!("a must be ≥ 0, got {a}")));
        }
        check_positive("kappa", kappa)?;
        check_positive("tau", tau)?;
        check_positive("xi", xi)?;
        let mut spec = SystemSpec {
            variant,
            beta,
            alpha,
            a,
            kappa,
            tau,
            xi,
            admissible: false,
            probe: true,
        };
        spec.admissible = a > 0.0 && 2.0 * beta - alpha <= 1.0 && spec.hypotheses_hold();
        Ok(spec)
    }

    fn hypotheses_hold(&self) -> bool {
        match self.variant {
            Variant::DelayElastic => {
                self.a >= self.tau && self.xi >= 2.0 * self.tau / self.a
            }
            Variant::DelayHeat => match xi_interval_system2(self.a, self.kappa, self.tau) {
                Ok(j) => j.contains(self.xi),
                Err(_) => false,
            },
        }
    }

    /// Same spec with a different history weight (admissibility recomputed).
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        if self.probe {
            Self::probe(self.variant, self.beta, self.alpha, self.a, self.kappa, self.tau, xi)
        } else {
            Self::new(self.variant, self.beta, self.alpha, self.a, self.kappa, self.tau, xi)
        }
    }

    /// Same spec at another `(β, α)` point.
    pub fn with_point(&self, beta: f64, alpha: f64) -> Result<Self> {
        if self.probe {
            Self::probe(self.variant, beta, alpha, self.a, self.kappa, self.tau, self.xi)
        } else {
            Self::new(self.variant, beta, alpha, self.a, self.kappa, self.tau, self.xi)
        }
    }

    pub fn region(&self) -> RegionLabel {
        region_classify(self.beta, self.alpha).unwrap_or(RegionLabel::OutsideQ)
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {x}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {x}")))
    }
}

/// Label of a `(β, α)` point.
///
/// `S` is closed as printed, `S1` and `S2` are strict as printed. Points of
/// `Q` in none of the three would be `BoundaryQ`; with the printed
/// definitions that set turns out to be empty, but the label is kept so the
/// partition check can report it if the predicates are ever edited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    S,
    S1,
    S2,
    S3,
    BoundaryQ,
    OutsideQ,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::S => "S",
            RegionLabel::S1 => "S1",
            RegionLabel::S2 => "S2",
            RegionLabel::S3 => "S3",
            RegionLabel::BoundaryQ => "BoundaryQ",
            RegionLabel::OutsideQ => "OutsideQ",
        }
    }

    pub fn in_q(self) -> bool {
        !matches!(self, RegionLabel::S3 | RegionLabel::OutsideQ)
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point of the rational grid `(β, α) = (b/den, a/den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalPoint {
    pub beta_num: i64,
    pub alpha_num: i64,
    pub den: i64,
}

impl RationalPoint {
    pub fn new(beta_num: i64, alpha_num: i64, den: i64) -> Result<Self> {
        if den <= 0 || !(0..=den).contains(&beta_num) || !(0..=den).contains(&alpha_num) {
            return Err(Error::InvalidParameter(format!(
                "rational point ({beta_num}/{den}, {alpha_num}/{den}) outside [0,1]²"
            )));
        }
        Ok(Self { beta_num, alpha_num, den })
    }

    pub fn beta(&self) -> f64 {
        self.beta_num as f64 / self.den as f64
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_num as f64 / self.den as f64
    }

    /// Exact classification in integer arithmetic.
    pub fn classify(&self) -> RegionLabel {
        // Work with doubled numerators so that the 1/2 thresholds stay integral.
        let b2 = 2 * self.beta_num; // 2β · den
        let a = self.alpha_num;
        let d = self.den;
        let in_s3 = 0 < a && a < b2 - d;
        if in_s3 {
            return RegionLabel::S3;
        }
        if b2 - a > d {
            return RegionLabel::OutsideQ;
        }
        if (d - b2).max(b2 - d) <= a && a <= b2 {
            return RegionLabel::S;
        }
        // max(1/2, 2β) < α  ⇔  d < 2a and 2β·d < a·d
        if d < 2 * a && b2 < a {
            return RegionLabel::S1;
        }
        if a < d - b2 && 2 * a <= d {
            return RegionLabel::S2;
        }
        RegionLabel::BoundaryQ
    }
}

/// Floating-point classification of `(β, α)`; same precedence as
/// [`RationalPoint::classify`]. Use the rational form on grids.
pub fn region_classify(beta: f64, alpha: f64) -> Result<RegionLabel> {
    check_unit("beta", beta)?;
    check_unit("alpha", alpha)?;
    let b2 = 2.0 * beta;
    if 0.0 < alpha && alpha < b2 - 1.0 {
        return Ok(RegionLabel::S3);
    }
    if b2 - alpha > 1.0 {
        return Ok(RegionLabel::OutsideQ);
    }
    if (1.0 - b2).max(b2 - 1.0) <= alpha && alpha <= b2 {
        return Ok(RegionLabel::S);
    }
    if 0.5f64.max(b2) < alpha {
        return Ok(RegionLabel::S1);
    }
    if alpha < 1.0 - b2 && alpha <= 0.5 {
        return Ok(RegionLabel::S2);
    }
    Ok(RegionLabel::BoundaryQ)
}

/// Result of [`union_identity_check`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct UnionReport {
    pub den: i64,
    pub points: usize,
    pub in_q: usize,
    pub counts: Vec<(RegionLabel, usize)>,
    /// Points violating the partition, with the reason.
    pub counterexamples: Vec<(RationalPoint, String)>,
}

impl UnionReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Checks `S ∪ S1 ∪ S2 = Q` on the grid `{0, h, 2h, …, 1}²` with exact
/// arithmetic. `grid_step` must be the reciprocal of an integer.
pub fn union_identity_check(grid_step: f64) -> Result<UnionReport> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "grid_step must lie in (0, 0.5], got {grid_step}"
        )));
    }
    let den = (1.0 / grid_step).round() as i64;
    if ((den as f64) * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "grid_step {grid_step} is not the reciprocal of an integer"
        )));
    }
    Ok(union_identity_on_grid(den))
}

/// Grid form of [`union_identity_check`] with an explicit denominator.
pub fn union_identity_on_grid(den: i64) -> UnionReport {
    let mut report = UnionReport { den, ..Default::default() };
    let labels = [
        RegionLabel::S,
        RegionLabel::S1,
        RegionLabel::S2,
        RegionLabel::S3,
        RegionLabel::BoundaryQ,
        RegionLabel::OutsideQ,
    ];
    let mut counts = [0usize; 6];
    for bn in 0..=den {
        for an in 0..=den {
            let p = RationalPoint { beta_num: bn, alpha_num: an, den };
            let label = p.classify();
            report.points += 1;
            counts[labels.iter().position(|l| *l == label).unwrap()] += 1;
            let in_q = 2 * bn - an <= den;
            if in_q {
                report.in_q += 1;
            }
            match label {
                RegionLabel::S | RegionLabel::S1 | RegionLabel::S2 => {
                    if !in_q {
                        report.counterexamples.push((p, format!("{label} outside Q")));
                    }
                }
                RegionLabel::BoundaryQ => {
                    if !in_q {
                        report.counterexamples.push((p, "BoundaryQ outside Q".into()));
                    } else if !on_polynomial_closure_boundary(&p) {
                        report
                            .counterexamples
                            .push((p, "BoundaryQ point off the S1/S2 closure lines".into()));
                    }
                }
                RegionLabel::S3 | RegionLabel::OutsideQ => {
                    if in_q {
                        report.counterexamples.push((p, format!("{label} inside Q")));
                    }
                }
            }
        }
    }
    report.counts = labels.iter().copied().zip(counts).collect();
    report
}

// In the closure of S1 or S2 with at least one defining inequality tight.
fn on_polynomial_closure_boundary(p: &RationalPoint) -> bool {
    let (b2, a, d) = (2 * p.beta_num, p.alpha_num, p.den);
    let closed_s1 = d <= 2 * a && b2 <= a;
    let tight_s1 = d == 2 * a || b2 == a;
    let closed_s2 = a <= d - b2 && 2 * a <= d;
    let tight_s2 = a == d - b2 || 2 * a == d;
    (closed_s1 && tight_s1) || (closed_s2 && tight_s2)
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidParameter(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// Smallest history weight for which `𝒜 - m·Id` is dissipative (elastic delay).
pub fn xi_min_system1(a: f64, tau: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("tau", tau)?;
    Ok(2.0 * tau / a)
}

/// Dissipativity shift `m = 1/a + ξ/(2τ)` of the elastic-delay generator.
pub fn shift_m(a: f64, xi: f64, tau: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("xi", xi)?;
    check_positive("tau", tau)?;
    Ok(1.0 / a + xi / (2.0 * tau))
}

/// Admissible history weights `J_{a,κ,τ} = [τ(a - √(a²-κ²)), τ(a + √(a²-κ²))]`
/// for the heat delay. Empty (error) when `a < κ`.
pub fn xi_interval_system2(a: f64, kappa: f64, tau: f64) -> Result<Interval> {
    check_positive("a", a)?;
    check_positive("kappa", kappa)?;
    check_positive("tau", tau)?;
    if a < kappa {
        return Err(Error::Inadmissible(format!(
            "a = {a} < kappa = {kappa}: J_(a,kappa,tau) is empty"
        )));
    }
    let root = ((a - kappa) * (a + kappa)).sqrt();
    Interval::new(tau * (a - root), tau * (a + root))
}

/// `Re(conj(λ)·e^{-λτ}) + |λ|²·a`, the quantity whose positivity on the closed
/// right half-plane (for `a ≥ τ`) makes the elastic-delay resolvent exist there.
pub fn coercivity_margin(lambda: Complex64, a: f64, tau: f64) -> f64 {
    (lambda.conj() * (-lambda * tau).exp()).re + lambda.norm_sqr() * a
}

/// Instability region of the undamped elastic delay:
/// `0 ≤ β ≤ α ≤ 1`, `α ≥ 1/2`, `(β, α) ≠ (1, 1)`.
pub fn in_instability_a1(beta: f64, alpha: f64) -> bool {
    in_instability_a2(beta, alpha) && alpha >= 0.5
}

/// Instability region of the undamped heat delay:
/// `0 ≤ β ≤ α ≤ 1`, `(β, α) ≠ (1, 1)`.
pub fn in_instability_a2(beta: f64, alpha: f64) -> bool {
    0.0 <= beta && beta <= alpha && alpha <= 1.0 && !(beta == 1.0 && alpha == 1.0)
}

/// Polynomial resolvent-growth exponent `γ` (decay order `1/γ`):
/// `2(α - 2β)` on `S1`, `2 - 2(α + 2β)` on `S2`, `None` elsewhere.
pub fn poly_exponent(beta: f64, alpha: f64) -> Option<f64> {
    match region_classify(beta, alpha).ok()? {
        RegionLabel::S1 => Some(2.0 * (alpha - 2.0 * beta)),
        RegionLabel::S2 => Some(2.0 - 2.0 * (alpha + 2.0 * beta)),
        _ => None,
    }
}

/// Exact-grid variant of [`poly_exponent`].
pub fn poly_exponent_rational(p: &RationalPoint) -> Option<f64> {
    let (b, a) = (p.beta(), p.alpha());
    match p.classify() {
        RegionLabel::S1 => Some(2.0 * (a - 2.0 * b)),
        RegionLabel::S2 => Some(2.0 - 2.0 * (a + 2.0 * b)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instability_regions() {
        assert!(in_instability_a1(0.5, 0.5));
        assert!(!in_instability_a1(0.2, 0.4));
        assert!(in_instability_a2(0.2, 0.4));
        assert!(!in_instability_a2(1.0, 1.0));
        assert!(!in_instability_a2(0.6, 0.5));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(region_classify(0.5, 0.5).unwrap(), RegionLabel::S);
        assert_eq!(region_classify(0.0, 0.5).unwrap(), RegionLabel::S2);
        assert_eq!(region_classify(1.0, 0.0).unwrap(), RegionLabel::OutsideQ);
        // α = 2β = 1 satisfies the closed S inequalities, which take precedence.
        assert_eq!(region_classify(0.5, 1.0).unwrap(), RegionLabel::S);
        assert_eq!(region_classify(0.0, 1.0).unwrap(), RegionLabel::S1);
        assert_eq!(region_classify(1.0, 0.5).unwrap(), RegionLabel::S3);
        assert!(region_classify(1.5, 0.5).is_err());
        assert!(region_classify(0.5, f64::NAN).is_err());
    }

    #[test]
    fn rational_matches_float_on_grid() {
        for den in [4, 10, 20] {
            for bn in 0..=den {
                for an in 0..=den {
                    let p = RationalPoint::new(bn, an, den).unwrap();
                    let f = region_classify(p.beta(), p.alpha()).unwrap();
                    // Float and exact agree wherever the float values are exact.
                    if den == 4 {
                        assert_eq!(p.classify(), f, "{p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn union_identity() {
        assert!(union_identity_check(0.05).unwrap().holds());
        assert!(union_identity_on_grid(2).holds());
        assert!(union_identity_check(0.0).is_err());
        assert!(union_identity_check(0.5).unwrap().holds());
        assert!(union_identity_check(0.6).is_err());
        assert!(union_identity_check(0.03).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(xi_min_system1(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(xi_min_system1(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(xi_min_system1(0.5, 0.25).unwrap(), 1.0);
        assert!(xi_min_system1(0.0, 1.0).is_err());
        assert_eq!(shift_m(1.0, 2.0, 1.0).unwrap(), 2.0);
        assert_eq!(shift_m(2.0, 1.0, 1.0).unwrap(), 1.0);
        for tau in [0.1, 0.7, 3.0] {
            let a = 1.0;
            let xi = xi_min_system1(a, tau).unwrap();
            assert!((shift_m(a, xi, tau).unwrap() - 2.0).abs() < 1e-15);
            assert_eq!(1.0 / a - xi / (2.0 * tau), 0.0);
        }
        assert!(shift_m(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn xi_interval() {
        let j = xi_interval_system2(1.0, 1.0, 1.0).unwrap();
        assert_eq!((j.lo, j.hi), (1.0, 1.0));
        assert!(j.is_singleton());
        let j = xi_interval_system2(5.0, 3.0, 1.0).unwrap();
        assert_eq!((j.lo, j.hi), (1.0, 9.0));
        assert!(matches!(xi_interval_system2(1.0, 2.0, 1.0), Err(Error::Inadmissible(_))));
        let j = xi_interval_system2(2.0, 1.0, 0.5).unwrap();
        assert!((j.midpoint() - 0.5 * 2.0).abs() < 1e-15);
        assert!(j.lo > 0.0);
    }

    #[test]
    fn coercivity_examples() {
        assert_eq!(coercivity_margin(Complex64::new(0.0, 0.0), 1.0, 1.0), 0.0);
        let v = coercivity_margin(Complex64::new(2.0, 0.0), 1.0, 1.0);
        assert!((v - (2.0 * (-2.0f64).exp() + 4.0)).abs() < 1e-14);
        for s in [0.1, 1.0, 7.5, -3.0] {
            assert!(coercivity_margin(Complex64::new(0.0, s), 1.0, 1.0) > 0.0);
        }
    }

    #[test]
    fn exponents() {
        assert_eq!(poly_exponent(0.0, 0.5), Some(1.0));
        assert_eq!(poly_exponent(0.5, 0.5), None);
        assert_eq!(poly_exponent(0.0, 1.0), Some(2.0));
        assert_eq!(poly_exponent(1.0, 0.0), None);
        // Tends to zero approaching the S1/S boundary α ↓ 2β.
        let beta = 0.4;
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let alpha = 2.0 * beta + 10f64.powi(-k);
            let g = poly_exponent(beta, alpha).unwrap();
            assert!(g < prev);
            prev = g;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn spec_constructor() {
        let s = SystemSpec::new(Variant::DelayElastic, 0.5, 0.5, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(s.admissible);
        let s = SystemSpec::new(Variant::DelayElastic, 0.5, 0.5, 0.5, 1.0, 1.0, 4.0).unwrap();
        assert!(!s.admissible);
        assert!(matches!(
            SystemSpec::new(Variant::DelayHeat, 1.0, 0.0, 2.0, 1.0, 1.0, 2.0),
            Err(Error::OutsideQ { .. })
        ));
        let s = SystemSpec::new(Variant::DelayHeat, 0.0, 0.5, 2.0, 1.0, 1.0, 2.0).unwrap();
        assert!(s.admissible);
        let s = s.with_xi(0.1).unwrap();
        assert!(!s.admissible);
        assert!(SystemSpec::new(Variant::DelayHeat, 0.0, 0.5, 0.0, 1.0, 1.0, 2.0).is_err());
        let p = SystemSpec::probe(Variant::DelayElastic, 0.5, 0.5, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(p.probe && !p.admissible);
        assert_eq!("delay-heat".parse::<Variant>().unwrap(), Variant::DelayHeat);
    }
}
