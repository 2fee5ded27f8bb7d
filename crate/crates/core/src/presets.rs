//! The five worked applications as `(SystemSpec, λ_j)` pairs.
//!
//! Each preset is a 1-D problem with sine eigenfunctions, so `A`, `A^{1/2}`
//! and the coupling operators are diagonal with explicit eigenvalues.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    /// Hinged plate, delayed elastic term with Kelvin–Voigt damping.
    PlateDelay,
    /// Kelvin–Voigt string with delayed damping.
    StringKV,
    /// Hinged beam coupled to `θ_xx`, delayed heat conduction.
    Beam1,
    /// Hinged beam coupled to `θ` itself, delayed heat conduction.
    Beam2,
    /// String with delayed heat conduction.
    StringHeatDelay,
}

pub const ALL_PRESETS: [PresetName; 5] = [
    PresetName::PlateDelay,
    PresetName::StringKV,
    PresetName::Beam1,
    PresetName::Beam2,
    PresetName::StringHeatDelay,
];

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::PlateDelay => "plate-delay",
            PresetName::StringKV => "string-kv",
            PresetName::Beam1 => "beam1",
            PresetName::Beam2 => "beam2",
            PresetName::StringHeatDelay => "string-heat-delay",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            PresetName::PlateDelay | PresetName::StringKV => Variant::DelayElastic,
            _ => Variant::DelayHeat,
        }
    }

    /// `(β, α)`.
    pub fn point(self) -> (f64, f64) {
        match self {
            PresetName::PlateDelay | PresetName::Beam1 => (0.5, 0.5),
            PresetName::StringKV | PresetName::StringHeatDelay => (0.5, 1.0),
            PresetName::Beam2 => (0.0, 0.5),
        }
    }

    /// Power `p` in `λ_j = (jπ/L)^p`.
    fn power(self) -> i32 {
        match self {
            PresetName::StringKV | PresetName::StringHeatDelay => 2,
            _ => 4,
        }
    }

    /// How the coupling reduces to scalars on each mode.
    pub fn modal_identities(self) -> &'static str {
        match self {
            PresetName::PlateDelay => "A = Δ² with A^{1/2} = -Δ; BB* = A, CC* = A",
            PresetName::StringKV => "A = -∂²; BB* = A, CC* = A",
            PresetName::Beam1 => "A = ∂⁴ with A^{1/2} = -∂²; BB* = A^{1/2}, CC* = A",
            PresetName::Beam2 => "A = ∂⁴; BB* = A^{1/2}, CC* = I",
            PresetName::StringHeatDelay => "A = -∂²; BB* = A, CC* = A",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "plate" | "platedelay" => Ok(PresetName::PlateDelay),
            "stringkv" | "kv" => Ok(PresetName::StringKV),
            "beam1" => Ok(PresetName::Beam1),
            "beam2" => Ok(PresetName::Beam2),
            "stringheatdelay" | "stringheat" => Ok(PresetName::StringHeatDelay),
            _ => Err(Error::InvalidParameter(format!("unknown preset `{s}`"))),
        }
    }
}

/// Default history weight: `2τ/a` for the elastic delay, `τa` (midpoint of
/// `J_{a,κ,τ}`) for the heat delay. Undamped probes (`a ≤ 0`) use the
/// `a = 1` value.
pub fn default_xi(variant: Variant, a: f64, tau: f64) -> f64 {
    let a = if a > 0.0 { a } else { 1.0 };
    match variant {
        Variant::DelayElastic => 2.0 * tau / a,
        Variant::DelayHeat => tau * a,
    }
}

/// `λ_j = (jπ/L)^p` for `j = 1..=j_max`.
pub fn preset_eigenvalues(name: PresetName, length: f64, j_max: usize) -> Result<Vec<f64>> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidParameter(format!("length must be > 0, got {length}")));
    }
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be at least 1".into()));
    }
    let p = name.power();
    Ok((1..=j_max).map(|j| (j as f64 * PI / length).powi(p)).collect())
}

/// Spec with the default `ξ` plus the first `j_max` eigenvalues.
pub fn make_preset(
    name: PresetName,
    length: f64,
    j_max: usize,
    a: f64,
    kappa: f64,
    tau: f64,
) -> Result<(SystemSpec, Vec<f64>)> {
    let eigs = preset_eigenvalues(name, length, j_max)?;
    let (beta, alpha) = name.point();
    let variant = name.variant();
    let spec = SystemSpec::new(variant, beta, alpha, a, kappa, tau, default_xi(variant, a, tau))?;
    Ok((spec, eigs))
}

/// Stability type the preset is known to have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExpectedVerdict {
    Exponential,
    Polynomial { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expectation {
    pub verdict: ExpectedVerdict,
    pub hypotheses: &'static str,
}

pub fn preset_expectation(name: PresetName) -> Expectation {
    match name {
        PresetName::PlateDelay | PresetName::StringKV => Expectation {
            verdict: ExpectedVerdict::Exponential,
            hypotheses: "tau <= a, xi >= 2 tau / a",
        },
        PresetName::Beam1 | PresetName::StringHeatDelay => Expectation {
            verdict: ExpectedVerdict::Exponential,
            hypotheses: "a > kappa, xi in the interior of J",
        },
        PresetName::Beam2 => Expectation {
            verdict: ExpectedVerdict::Polynomial { gamma: 1.0 },
            hypotheses: "a > kappa, xi in the interior of J",
        },
    }
}

/// Summary row for listings.
#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub variant: &'static str,
    pub beta: f64,
    pub alpha: f64,
    pub eigenvalues: &'static str,
    pub identities: &'static str,
    pub expectation: ExpectedVerdict,
}

pub fn list() -> Vec<PresetInfo> {
    ALL_PRESETS
        .iter()
        .map(|&p| {
            let (beta, alpha) = p.point();
            PresetInfo {
                name: p.as_str(),
                variant: p.variant().as_str(),
                beta,
                alpha,
                eigenvalues: if p.power() == 2 { "(j pi / L)^2" } else { "(j pi / L)^4" },
                identities: p.modal_identities(),
                expectation: preset_expectation(p).verdict,
            }
        })
        .collect()
}
