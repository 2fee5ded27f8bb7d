//! Finite-dimensional approximation of the per-mode generator.
//!
//! The delayed trace is carried by the transport variable
//! `z(ρ, t)`, `τ z_t + z_ρ = 0` on `ρ ∈ [0, 1]`, with `z(0, t)` equal to
//! `λ_j^{1/2} u` (elastic delay) or `λ_j^{α/2} θ` (heat delay) and `z(1, t)`
//! the delayed value. The transport is collocated on Chebyshev–Gauss–Lobatto
//! nodes; the `ρ = 0` unknown is eliminated through the trace condition, so
//! the state is `(u, v, θ, z(ρ_0), …, z(ρ_{n-2}))` of dimension `n + 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chareq::ModeSystem;
use crate::error::{Error, Result};
use crate::model::{shift_m, SystemSpec, Variant};

/// Chebyshev–Gauss–Lobatto nodes on `[0, 1]` in descending order (node 0 is
/// `ρ = 1`, node `n-1` is `ρ = 0`), the spectral differentiation matrix in `ρ`
/// and Clenshaw–Curtis weights.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub diff: DMatrix<f64>,
    pub quad: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(n: usize) -> Result<Self> {
        if !(4..=512).contains(&n) {
            return Err(Error::InvalidParameter(format!("grid size must lie in [4, 512], got {n}")));
        }
        let big_n = n - 1;
        let nf = big_n as f64;
        let theta: Vec<f64> = (0..n).map(|k| std::f64::consts::PI * k as f64 / nf).collect();
        let x: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let nodes: Vec<f64> = x.iter().map(|xi| 0.5 * (1.0 + xi)).collect();

        // Differentiation on [-1, 1] with x_i - x_j computed through sines.
        let c = |k: usize| -> f64 {
            let base = if k == 0 || k == big_n { 2.0 } else { 1.0 };
            if k % 2 == 0 { base } else { -base }
        };
        let mut diff = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let half = std::f64::consts::PI / (2.0 * nf);
                    let dx = -2.0 * (half * (i + j) as f64).sin() * (half * (i as f64 - j as f64)).sin();
                    diff[(i, j)] = c(i) / c(j) / dx;
                }
            }
        }
        // Negative-sum trick for the diagonal, then the [-1,1] → [0,1] map.
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| diff[(i, j)]).sum();
            diff[(i, i)] = -s;
        }
        diff *= 2.0;

        let mut quad = vec![0.0; n];
        let mut v = vec![1.0; n];
        if big_n % 2 == 0 {
            quad[0] = 1.0 / (nf * nf - 1.0);
            for k in 1..big_n / 2 {
                let kk = k as f64;
                for i in 1..big_n {
                    v[i] -= 2.0 * (2.0 * kk * theta[i]).cos() / (4.0 * kk * kk - 1.0);
                }
            }
            for i in 1..big_n {
                v[i] -= (nf * theta[i]).cos() / (nf * nf - 1.0);
            }
        } else {
            quad[0] = 1.0 / (nf * nf);
            for k in 1..=(big_n - 1) / 2 {
                let kk = k as f64;
                for i in 1..big_n {
                    v[i] -= 2.0 * (2.0 * kk * theta[i]).cos() / (4.0 * kk * kk - 1.0);
                }
            }
        }
        quad[big_n] = quad[0];
        for i in 1..big_n {
            quad[i] = 2.0 * v[i] / nf;
        }
        // Interval length 1 instead of 2.
        for w in quad.iter_mut() {
            *w *= 0.5;
        }
        Ok(Self { n, nodes, diff, quad })
    }

    /// `∫₀¹ f(ρ) dρ` by the grid's quadrature.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.quad).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Alias for [`CollocationGrid::new`].
pub fn build_grid(n: usize) -> Result<CollocationGrid> {
    CollocationGrid::new(n)
}

/// Modal state `(u, v, θ, z)` with `z` sampled on all `n` grid nodes
/// (including `ρ = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub u: Complex64,
    pub v: Complex64,
    pub theta: Complex64,
    pub z: Vec<Complex64>,
}

impl ModeState {
    pub fn zero(n: usize) -> Self {
        let c0 = Complex64::new(0.0, 0.0);
        Self { u: c0, v: c0, theta: c0, z: vec![c0; n] }
    }

    /// Drops the `ρ = 0` node, giving the generator's state vector.
    pub fn to_reduced(&self) -> DVector<Complex64> {
        let n = self.z.len();
        let mut x = DVector::zeros(n + 2);
        x[0] = self.u;
        x[1] = self.v;
        x[2] = self.theta;
        for k in 0..n - 1 {
            x[3 + k] = self.z[k];
        }
        x
    }

    /// Inverse of [`ModeState::to_reduced`]; the `ρ = 0` node is filled from
    /// the trace condition.
    pub fn from_reduced(mode: &ModeSystem, x: &DVector<Complex64>) -> Self {
        let n = x.len() - 2;
        let (idx, coef) = mode.trace();
        let mut z: Vec<Complex64> = (0..n - 1).map(|k| x[3 + k]).collect();
        z.push(x[idx] * coef);
        Self { u: x[0], v: x[1], theta: x[2], z }
    }

    /// Squared modal energy norm `λ_j|u|² + |v|² + |θ|² + ξ·Σ w_k |z_k|²`.
    pub fn energy_norm_sq(&self, mode: &ModeSystem, grid: &CollocationGrid) -> f64 {
        let hist: f64 = self.z.iter().zip(&grid.quad).map(|(z, w)| w * z.norm_sqr()).sum();
        mode.lambda_j * self.u.norm_sqr()
            + self.v.norm_sqr()
            + self.theta.norm_sqr()
            + mode.spec.xi * hist
    }
}

/// Collocated generator of one mode.
#[derive(Debug, Clone)]
pub struct ModeGenerator {
    pub mode: ModeSystem,
    pub grid: CollocationGrid,
    /// `(n+2)×(n+2)` matrix acting on `(u, v, θ, z(ρ_0..ρ_{n-2}))`.
    pub matrix: DMatrix<f64>,
    /// State index (`0` for `u`, `2` for `θ`) and coefficient of the trace
    /// `z(0) = coef · state[index]` substituted into the transport rows.
    pub trace_index: usize,
    pub trace_coef: f64,
}

impl ModeGenerator {
    pub fn new(mode: ModeSystem, grid: CollocationGrid) -> Self {
        let n = grid.n;
        let dim = n + 2;
        let sp = &mode.spec;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        m[(0, 1)] = 1.0;
        match sp.variant {
            Variant::DelayElastic => {
                m[(1, 3)] = -mode.sqrt_lambda;
                m[(1, 1)] = -sp.a * mode.lambda_j;
                m[(1, 2)] = mode.pow_beta;
                m[(2, 2)] = -mode.pow_alpha;
                m[(2, 1)] = -mode.pow_beta;
            }
            Variant::DelayHeat => {
                m[(1, 0)] = -mode.lambda_j;
                m[(1, 2)] = mode.pow_beta;
                m[(2, 3)] = -sp.kappa * mode.pow_half_alpha;
                m[(2, 2)] = -sp.a * mode.pow_alpha;
                m[(2, 1)] = -mode.pow_beta;
            }
        }
        let (trace_index, trace_coef) = mode.trace();
        let inv_tau = 1.0 / sp.tau;
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                m[(3 + r, 3 + c)] = -inv_tau * grid.diff[(r, c)];
            }
            m[(3 + r, trace_index)] -= inv_tau * grid.diff[(r, n - 1)] * trace_coef;
        }
        Self { mode, grid, matrix: m, trace_index, trace_coef }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Diagonal energy weights of the reduced state; the eliminated `ρ = 0`
    /// node contributes `ξ w_{n-1} coef²` to the weight of its source entry.
    pub fn energy_weights(&self) -> Vec<f64> {
        let n = self.grid.n;
        let xi = self.mode.spec.xi;
        let mut w = vec![0.0; n + 2];
        w[0] = self.mode.lambda_j;
        w[1] = 1.0;
        w[2] = 1.0;
        for k in 0..n - 1 {
            w[3 + k] = xi * self.grid.quad[k];
        }
        w[self.trace_index] += xi * self.grid.quad[n - 1] * self.trace_coef * self.trace_coef;
        w
    }

    /// The `3×3` modal block with the delay removed (`z(1)` replaced by the
    /// undelayed trace); its eigenvalues are the roots of the `τ = 0` cubic.
    pub fn undelayed_block(&self) -> DMatrix<f64> {
        let mut b = self.matrix.view((0, 0), (3, 3)).into_owned();
        let (idx, coef) = (self.trace_index, self.trace_coef);
        let row = match self.mode.spec.variant {
            Variant::DelayElastic => 1,
            Variant::DelayHeat => 2,
        };
        b[(row, idx)] += self.matrix[(row, 3)] * coef;
        b
    }
}

pub fn build_mode_generator(mode: ModeSystem, grid: CollocationGrid) -> ModeGenerator {
    ModeGenerator::new(mode, grid)
}

/// Eigenvalues of a real matrix, sorted by descending real part.
pub fn eigenvalues_of(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| {
        let sv = m.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        Error::Eigensolver { dim, condition: if smin > 0.0 { smax / smin } else { f64::INFINITY } }
    })?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
    Ok(ev)
}

/// All eigenvalues of the collocated generator, sorted by descending real part.
pub fn mode_eigenvalues(gen: &ModeGenerator) -> Result<Vec<Complex64>> {
    if gen.dim() > 515 {
        return Err(Error::InvalidParameter(format!("matrix dimension {} > 515", gen.dim())));
    }
    eigenvalues_of(&gen.matrix)
}

/// `Re⟨𝒜U, U⟩` in the modal energy inner product.
///
/// The transport contribution uses the exact identity
/// `Re ∫₀¹ z_ρ z̄ dρ = (|z(1)|² - |z(0)|²)/2`, so the value depends on the
/// state only through `(u, v, θ, z(1), z(0))`. The `z(0)` node must satisfy
/// the trace condition.
pub fn dissipativity_form(
    spec: &SystemSpec,
    mode: &ModeSystem,
    state: &ModeState,
    grid: &CollocationGrid,
) -> Result<f64> {
    let n = grid.n;
    if state.z.len() != n {
        return Err(Error::InvalidParameter(format!(
            "state has {} history nodes, grid has {n}",
            state.z.len()
        )));
    }
    let z1 = state.z[0];
    let z0 = state.z[n - 1];
    let (idx, coef) = mode.trace();
    let src = [state.u, state.v, state.theta][idx];
    let residual = (z0 - coef * src).norm();
    let size = z0.norm().max((coef * src).norm()).max(1.0);
    if residual > 1e-10 * size {
        return Err(Error::TraceViolation { residual });
    }
    let (u, v, th) = (state.u, state.v, state.theta);
    let lam = mode.lambda_j;
    let transport = spec.xi / (2.0 * spec.tau) * (z0.norm_sqr() - z1.norm_sqr());
    let value = match spec.variant {
        Variant::DelayElastic => {
            let dv = -mode.sqrt_lambda * z1 - spec.a * lam * v + mode.pow_beta * th;
            let dth = -mode.pow_alpha * th - mode.pow_beta * v;
            lam * (v * u.conj()).re + (dv * v.conj()).re + (dth * th.conj()).re + transport
        }
        Variant::DelayHeat => {
            let dv = -lam * u + mode.pow_beta * th;
            let dth = -spec.kappa * mode.pow_half_alpha * z1
                - spec.a * mode.pow_alpha * th
                - mode.pow_beta * v;
            lam * (v * u.conj()).re + (dv * v.conj()).re + (dth * th.conj()).re + transport
        }
    };
    Ok(value)
}

/// `dissipativity_form - m·λ_j|u|²` with `m = 1/a + ξ/(2τ)`; nonpositive for
/// the elastic delay whenever `ξ ≥ 2τ/a`.
pub fn shifted_dissipativity_form(
    spec: &SystemSpec,
    mode: &ModeSystem,
    state: &ModeState,
    grid: &CollocationGrid,
) -> Result<f64> {
    let m = shift_m(spec.a, spec.xi, spec.tau)?;
    Ok(dissipativity_form(spec, mode, state, grid)? - m * mode.lambda_j * state.u.norm_sqr())
}

/// Range of Young parameters `ε` for which
/// `-κ Re(z(1) w̄) ≤ κ/(2ε)|z(1)|² + εκ/2 |w|²` (with `w = λ_j^{α/2}θ`)
/// leaves both resulting coefficients nonpositive (heat delay):
/// `[κτ/ξ, (2/κ)(a - ξ/(2τ))]`. Empty (`None`) unless `ξ ∈ J_{a,κ,τ}`.
pub fn epsilon_window(spec: &SystemSpec) -> Option<(f64, f64)> {
    let lo = spec.kappa * spec.tau / spec.xi;
    let hi = 2.0 / spec.kappa * (spec.a - spec.xi / (2.0 * spec.tau));
    (spec.variant == Variant::DelayHeat && lo <= hi).then_some((lo, hi))
}

/// Upper bound `(κ/(2ε) - ξ/(2τ))|z(1)|² + (εκ/2 - a + ξ/(2τ))|w|²` on the
/// heat-delay form obtained from Young's inequality with parameter `ε`.
pub fn young_bound(spec: &SystemSpec, mode: &ModeSystem, state: &ModeState, eps: f64) -> f64 {
    let x = spec.xi / (2.0 * spec.tau);
    let w = mode.pow_half_alpha * state.theta;
    (spec.kappa / (2.0 * eps) - x) * state.z[0].norm_sqr()
        + (eps * spec.kappa / 2.0 - spec.a + x) * w.norm_sqr()
}
