use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("(beta, alpha) = ({beta}, {alpha}) lies outside Q (2beta - alpha > 1)")]
    OutsideQ { beta: f64, alpha: f64 },

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("degenerate rectangle: {0}")]
    DegenerateRect(String),

    #[error("characteristic function vanishes on the contour near {near} after {inflations} inflations")]
    ContourTooClose { near: Complex64, inflations: usize },

    #[error("eigensolver failed on a {dim}x{dim} matrix (condition estimate {condition:.3e})")]
    Eigensolver { dim: usize, condition: f64 },

    #[error("resolvent near-singular at omega = {omega} (sigma_min / norm = {ratio:.3e})")]
    NearSingular { omega: f64, ratio: f64 },

    #[error("trace constraint violated: |z(0) - trace| = {residual:.3e}")]
    TraceViolation { residual: f64 },

    #[error("insufficient data for fit: {0}")]
    InsufficientSpan(String),

    #[error("nonpositive energy {value} at t = {t}")]
    NonpositiveEnergy { t: f64, value: f64 },

    #[error("time {t} outside sampled range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
