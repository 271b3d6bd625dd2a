//! Optimal insider portfolios for log utility and the Hamiltonian check.
//!
//! Per `(t, y)` the log-utility insider maximizes
//!
//! ```text
//!     g(π) = πb₀ − ½π²σ₀² + σ₀Φπ + Σ_k ν_k [ln(1+πγ_k) − πγ_k + Ψ_k ln(1+πγ_k)]
//! ```
//!
//! whose derivative is the first-order condition
//!
//! ```text
//!     f(π) = b₀ − πσ₀² + σ₀Φ + Σ_k ν_k γ_k (Ψ_k − πγ_k) / (1 + πγ_k).
//! ```
//!
//! `f' = −σ₀² − Σ ν_k γ_k² (1+Ψ_k)/(1+πγ_k)² < 0`, so any root is unique.

use thiserror::Error;

use crate::donsker::{self, DensityState, DonskerError, InsiderSpec, ObservedState};
use crate::quadrature::QuadratureConfig;
use crate::market::{MarketSpec, ADMISSIBILITY_FLOOR};

pub const FOC_TOL: f64 = 1e-10;
const DEGENERATE_SIGMA: f64 = 1e-12;
const MAX_PROBES: usize = 200;
const MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("volatility {sigma0:e} is too small for the Brownian policy")]
    DegenerateVolatility { sigma0: f64 },
    #[error("market has neither a diffusion nor a jump part")]
    DegenerateMarket,
    #[error("first-order condition has no root in ({lower}, {upper}): f = {f_lower:e} .. {f_upper:e}")]
    NoRootInBracket { lower: f64, upper: f64, f_lower: f64, f_upper: f64 },
    #[error("b₀/(λγ₀) = {ratio} must be below 1")]
    InvalidRegime { ratio: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Donsker(#[from] DonskerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyStatus {
    ClosedForm,
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyResult {
    pub pi: f64,
    pub foc_residual: f64,
    /// `min_k (1 + πγ_k)`, or 1 without jumps.
    pub admissibility_margin: f64,
    /// `∂H/∂π` at unit wealth and `p = 1` with the log-utility adjoints.
    pub hamiltonian_grad: Option<f64>,
    pub status: PolicyStatus,
}

/// One atom of the jump part as seen by the first-order condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTerm {
    pub gamma: f64,
    pub nu: f64,
    pub psi: f64,
}

/// Adjoint triple `(p, q, r(ζ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub p: f64,
    pub q: f64,
    pub r: Vec<(f64, f64)>,
}

pub fn merton_ratio(b0: f64, sigma0: f64) -> Result<f64, PortfolioError> {
    if sigma0.abs() < DEGENERATE_SIGMA {
        return Err(PortfolioError::DegenerateVolatility { sigma0 });
    }
    Ok(b0 / (sigma0 * sigma0))
}

/// `π = b₀/σ₀² + Φ/σ₀`.
pub fn log_pi_brownian(b0: f64, sigma0: f64, phi: f64) -> Result<PolicyResult, PortfolioError> {
    let pi = merton_ratio(b0, sigma0)? + phi / sigma0;
    let foc_residual = foc_value(pi, b0, sigma0, phi, &[]).abs();
    Ok(PolicyResult {
        pi,
        foc_residual,
        admissibility_margin: 1.0,
        hamiltonian_grad: Some(foc_value(pi, b0, sigma0, phi, &[])),
        status: PolicyStatus::ClosedForm,
    })
}

/// First-order condition `f(π)`.
pub fn foc_value(pi: f64, b0: f64, sigma0: f64, phi: f64, jumps: &[JumpTerm]) -> f64 {
    let jump: f64 = jumps
        .iter()
        .map(|j| j.nu * j.gamma * (j.psi - pi * j.gamma) / (1.0 + pi * j.gamma))
        .sum();
    b0 - pi * sigma0 * sigma0 + sigma0 * phi + jump
}

/// `f'(π)`.
pub fn foc_derivative(pi: f64, sigma0: f64, jumps: &[JumpTerm]) -> f64 {
    let jump: f64 = jumps
        .iter()
        .map(|j| {
            let d = 1.0 + pi * j.gamma;
            j.nu * j.gamma * j.gamma * (1.0 + j.psi) / (d * d)
        })
        .sum();
    -sigma0 * sigma0 - jump
}

/// Direct log-utility objective `g(π)`; `−∞` outside the admissible set.
pub fn direct_objective(pi: f64, b0: f64, sigma0: f64, phi: f64, jumps: &[JumpTerm]) -> f64 {
    let mut g = pi * b0 - 0.5 * pi * pi * sigma0 * sigma0 + sigma0 * phi * pi;
    for j in jumps {
        let d = 1.0 + pi * j.gamma;
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        g += j.nu * ((1.0 + j.psi) * d.ln() - pi * j.gamma);
    }
    g
}

/// Open interval of `π` with `1 + πγ_k > 0` for every active atom.
pub fn admissible_bracket(jumps: &[JumpTerm]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for j in active(jumps) {
        let edge = -1.0 / j.gamma;
        if j.gamma > 0.0 {
            lo = lo.max(edge);
        } else {
            hi = hi.min(edge);
        }
    }
    (lo, hi)
}

fn active(jumps: &[JumpTerm]) -> impl Iterator<Item = &JumpTerm> {
    jumps.iter().filter(|j| j.gamma != 0.0 && j.nu > 0.0)
}

fn margin(pi: f64, jumps: &[JumpTerm]) -> f64 {
    active(jumps).map(|j| 1.0 + pi * j.gamma).fold(1.0, f64::min)
}

/// Root of the single-jump first-order condition.
pub fn solve_foc_bp(
    b0: f64,
    sigma0: f64,
    gamma0: f64,
    lambda: f64,
    phi: f64,
    psi: f64,
) -> Result<PolicyResult, PortfolioError> {
    solve_foc_levy(b0, sigma0, phi, &[JumpTerm { gamma: gamma0, nu: lambda, psi }])
}

/// Root of the first-order condition with a discrete Lévy measure.
pub fn solve_foc_levy(b0: f64, sigma0: f64, phi: f64, jumps: &[JumpTerm]) -> Result<PolicyResult, PortfolioError> {
    for j in jumps {
        if !(j.nu >= 0.0) || !j.gamma.is_finite() {
            return Err(PortfolioError::InvalidInput(format!("bad jump term {j:?}")));
        }
        if j.nu > 0.0 && j.gamma != 0.0 && !(j.psi > -1.0) {
            return Err(PortfolioError::InvalidInput(format!("Ψ = {} must exceed −1", j.psi)));
        }
    }
    if active(jumps).next().is_none() {
        if sigma0 == 0.0 {
            return Err(PortfolioError::DegenerateMarket);
        }
        return log_pi_brownian(b0, sigma0, phi);
    }
    let f = |pi: f64| foc_value(pi, b0, sigma0, phi, jumps);
    let (lo, hi) = admissible_bracket(jumps);
    let (a, b) = bracket_root(&f, lo, hi)?;
    let pi = safeguarded_newton(&f, |pi| foc_derivative(pi, sigma0, jumps), a, b);
    let residual = f(pi);
    Ok(PolicyResult {
        pi,
        foc_residual: residual.abs(),
        admissibility_margin: margin(pi, jumps),
        hamiltonian_grad: Some(residual),
        status: PolicyStatus::Converged,
    })
}

/// Pure-jump market (`σ₀ = 0`) with a single jump size.
pub fn solve_foc_poisson_pure(b0: f64, gamma0: f64, lambda: f64, psi: f64) -> Result<PolicyResult, PortfolioError> {
    if gamma0 == 0.0 || !(lambda > 0.0) {
        return Err(PortfolioError::DegenerateMarket);
    }
    let ratio = b0 / (lambda * gamma0);
    if !(ratio < 1.0) {
        return Err(PortfolioError::InvalidRegime { ratio });
    }
    solve_foc_levy(b0, 0.0, 0.0, &[JumpTerm { gamma: gamma0, nu: lambda, psi }])
}

/// Finds `a < b` inside `(lo, hi)` with `f(a) ≥ 0 ≥ f(b)` for decreasing `f`.
fn bracket_root<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64), PortfolioError> {
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let upward = f0 > 0.0;
    let edge = if upward { hi } else { lo };
    let mut inner = 0.0;
    let mut last = f0;
    for k in 0..MAX_PROBES {
        let probe = if edge.is_finite() {
            let gap = edge * 0.5f64.powi(k as i32 + 1);
            let p = edge - gap;
            if (gap / edge).abs() < ADMISSIBILITY_FLOOR {
                break;
            }
            p
        } else {
            let step = 2f64.powi(k as i32);
            if upward { step } else { -step }
        };
        let fp = f(probe);
        last = fp;
        if (fp <= 0.0) == upward {
            return Ok(if upward { (inner, probe) } else { (probe, inner) });
        }
        inner = probe;
        if !fp.is_finite() || probe.abs() > 1e300 {
            break;
        }
    }
    let (f_lower, f_upper) = if upward { (f0, last) } else { (last, f0) };
    Err(PortfolioError::NoRootInBracket { lower: lo, upper: hi, f_lower, f_upper })
}

fn safeguarded_newton<F: Fn(f64) -> f64, D: Fn(f64) -> f64>(f: &F, df: D, mut a: f64, mut b: f64) -> f64 {
    if a == b {
        return a;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx.abs() < 0.01 * FOC_TOL {
            return x;
        }
        if fx > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / df(x);
        x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a <= f64::EPSILON * x.abs().max(1.0) {
            return x;
        }
    }
    x
}

/// Adjoints implied by log utility at a policy `π`:
/// `q = p(Φ − πσ₀)`, `r(ζ_k) = p(Ψ_k − πγ_k)/(1 + πγ_k)`.
pub fn log_utility_adjoint(p: f64, pi: f64, sigma0: f64, phi: f64, marks: &[(f64, JumpTerm)]) -> AdjointState {
    AdjointState {
        p,
        q: p * (phi - pi * sigma0),
        r: marks
            .iter()
            .map(|(zeta, j)| (*zeta, p * (j.psi - pi * j.gamma) / (1.0 + pi * j.gamma)))
            .collect(),
    }
}

/// Market coefficients at `(t, y)` against the insider's marks.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMarket {
    pub b0: f64,
    pub sigma0: f64,
    /// `(ζ_k, γ₀(t,y,ζ_k), ν_k)`.
    pub jumps: Vec<(f64, f64, f64)>,
}

impl LocalMarket {
    pub fn at(market: &MarketSpec, insider: &InsiderSpec, t: f64, y: f64) -> Self {
        let jumps = if market.has_jumps(insider) {
            insider
                .marks()
                .iter()
                .map(|m| (m.zeta, market.gamma0.eval(t, y, m.zeta), m.intensity))
                .collect()
        } else {
            Vec::new()
        };
        Self { b0: market.b0.eval(t, y), sigma0: market.sigma0.eval(t, y), jumps }
    }

    /// Jump terms with the `Ψ` values of `density`; missing ratios are an error.
    pub fn jump_terms(&self, density: &DensityState) -> Result<Vec<JumpTerm>, PortfolioError> {
        self.jumps
            .iter()
            .map(|&(zeta, gamma, nu)| {
                let psi = density
                    .psi_ratio
                    .iter()
                    .find(|(z, _)| *z == zeta)
                    .and_then(|(_, v)| *v)
                    .ok_or_else(|| PortfolioError::InvalidInput(format!("Ψ unavailable for ζ={zeta}")))?;
                Ok(JumpTerm { gamma, nu, psi })
            })
            .collect()
    }
}

fn linear_part(local: &LocalMarket, adjoint: &AdjointState) -> Result<f64, PortfolioError> {
    let mut s = local.b0 * adjoint.p + local.sigma0 * adjoint.q;
    for &(zeta, gamma, nu) in &local.jumps {
        let r = adjoint
            .r
            .iter()
            .find(|(z, _)| *z == zeta)
            .map(|(_, r)| *r)
            .ok_or_else(|| PortfolioError::InvalidInput(format!("adjoint r missing for ζ={zeta}")))?;
        s += gamma * r * nu;
    }
    Ok(s)
}

/// `H = M·f + πx(b₀p + σ₀q + Σ γ₀ r ν)` with running utility value `running`.
pub fn hamiltonian(
    x: f64,
    pi: f64,
    adjoint: &AdjointState,
    local: &LocalMarket,
    density: &DensityState,
    running: f64,
) -> Result<f64, PortfolioError> {
    Ok(density.m * running + pi * x * linear_part(local, adjoint)?)
}

/// `∂H/∂π`, with `running_grad = ∂f/∂π`.
pub fn hamiltonian_grad_pi(
    x: f64,
    adjoint: &AdjointState,
    local: &LocalMarket,
    density: &DensityState,
    running_grad: f64,
) -> Result<f64, PortfolioError> {
    Ok(density.m * running_grad + x * linear_part(local, adjoint)?)
}

/// Log-optimal policy at `(t, y)` from the given ratios: the closed form
/// without jumps, otherwise the root of the first-order condition.
pub fn log_optimal_from_ratios(local: &LocalMarket, phi: f64, psi: &[f64]) -> Result<PolicyResult, PortfolioError> {
    if local.jumps.is_empty() {
        return log_pi_brownian(local.b0, local.sigma0, phi);
    }
    let jumps: Vec<JumpTerm> = local
        .jumps
        .iter()
        .zip(psi)
        .map(|(&(_, gamma, nu), &psi)| JumpTerm { gamma, nu, psi })
        .collect();
    if local.sigma0 == 0.0 && jumps.len() == 1 {
        let j = jumps[0];
        return solve_foc_poisson_pure(local.b0, j.gamma, j.nu, j.psi);
    }
    solve_foc_levy(local.b0, local.sigma0, phi, &jumps)
}

/// Insider's log-optimal policy at `(t, y)` given the observed state.
pub fn log_optimal_policy(
    insider: &InsiderSpec,
    market: &MarketSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<PolicyResult, PortfolioError> {
    let local = LocalMarket::at(market, insider, t, y);
    let density = donsker::density_state(insider, t, y, state, quad)?;
    let floor = || DonskerError::DensityFloor { t, y, density: density.m };
    let phi = density.phi.ok_or_else(floor)?;
    let psi = density
        .psi_ratio
        .iter()
        .map(|(_, v)| v.ok_or_else(floor))
        .collect::<Result<Vec<_>, _>>()?;
    log_optimal_from_ratios(&local, phi, &psi)
}

/// Honest trader's policy: the same optimization with `Φ = Ψ = 0`.
pub fn log_optimal_uninformed(
    insider: &InsiderSpec,
    market: &MarketSpec,
    t: f64,
    y: f64,
) -> Result<PolicyResult, PortfolioError> {
    let local = LocalMarket::at(market, insider, t, y);
    let psi = vec![0.0; local.jumps.len()];
    log_optimal_from_ratios(&local, 0.0, &psi)
}
