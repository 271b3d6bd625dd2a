//! Stochastic exponentials, the budget constant `c = p(0,y)` and the adjoint
//! processes of the utility-maximization BSDE.
//!
//! Brownian market (`γ₀ ≡ 0`), with `θ = b₀/σ₀`:
//!
//! ```text
//!     Γ₀(t) = exp(−∫θ dB − ½∫θ² ds)
//!     Γ(T)  = exp(−∫(Φ + θ) dB + ½∫(Φ² − θ²) ds)
//! ```
//!
//! Pure-jump market (`σ₀ ≡ 0`), with `k = b₀/(λγ₀)`:
//!
//! ```text
//!     Γ₀(t) = exp(∫ln(1−k) dÑ + λ∫[ln(1−k) + k] ds)
//!     Γ(T)  = exp(∫[ln(1−k) − ln(1+Ψ)] dÑ + λ∫{[ln(1−k) + k] − [ln(1+Ψ) − Ψ]} ds)
//! ```
//!
//! Optimal terminal wealth is `I(cΓ(T,y))` with `c` fixed by the budget
//! `x₀ = E[I(cΓ(T,y)) Γ₀(T,y)]`.

use rayon::prelude::*;
use thiserror::Error;

use crate::donsker::{self, DonskerError, InsiderSpec};
use crate::market::{map_paths, MarketError, MarketSpec, PathBundle};
use crate::portfolio::AdjointState;
use crate::quadrature::QuadratureConfig;

pub const C_MIN: f64 = 1e-12;
pub const C_MAX: f64 = 1e12;
const BISECTION_ITER: usize = 400;
const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdjointError {
    #[error("b₀/(λγ₀) = {ratio} must be below 1")]
    InvalidRegime { ratio: f64 },
    #[error("volatility {sigma0:e} at t={t} is too small")]
    DegenerateVolatility { t: f64, sigma0: f64 },
    #[error("unsupported market: {0}")]
    UnsupportedMarket(String),
    #[error("budget {budget_low:e} .. {budget_high:e} over c ∈ [1e-12, 1e12] does not bracket x₀ = {x0}")]
    BracketFailure { budget_low: f64, budget_high: f64, x0: f64 },
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error(transparent)]
    Donsker(#[from] DonskerError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilitySpec {
    Log,
    /// `U(x) = x^ρ/ρ` with `ρ < 1`, `ρ ≠ 0`.
    Power(f64),
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<(), AdjointError> {
        match *self {
            Self::Log => Ok(()),
            Self::Power(rho) if rho < 1.0 && rho != 0.0 && rho.is_finite() => Ok(()),
            Self::Power(rho) => Err(AdjointError::InvalidUtility(format!("power ρ = {rho} must be < 1 and ≠ 0"))),
        }
    }

    pub fn utility(&self, x: f64) -> f64 {
        match *self {
            Self::Log => x.ln(),
            Self::Power(rho) => x.powf(rho) / rho,
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        match *self {
            Self::Log => 1.0 / x,
            Self::Power(rho) => x.powf(rho - 1.0),
        }
    }

    /// `I = (U′)⁻¹`.
    pub fn inverse_marginal(&self, z: f64) -> f64 {
        match *self {
            Self::Log => 1.0 / z,
            Self::Power(rho) => z.powf(1.0 / (rho - 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Brownian,
    Poisson,
}

impl Regime {
    pub fn detect(insider: &InsiderSpec, market: &MarketSpec) -> Result<Self, AdjointError> {
        let jumps = market.has_jumps(insider);
        match (market.sigma0.is_zero(), jumps) {
            (false, false) => Ok(Self::Brownian),
            (true, true) if insider.marks().len() == 1 => Ok(Self::Poisson),
            (true, true) => Err(AdjointError::UnsupportedMarket("pure-jump market needs a single mark".into())),
            (true, false) => Err(AdjointError::UnsupportedMarket("market has neither diffusion nor jumps".into())),
            (false, true) => Err(AdjointError::UnsupportedMarket("mixed diffusion-jump market".into())),
        }
    }
}

/// Source of the ratios `Φ`, `Ψ` entering `Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Information {
    /// Conditional densities of the insider variable.
    Insider(QuadratureConfig),
    /// `Φ ≡ Ψ ≡ 0`.
    Uninformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialPair {
    pub gamma0_t: f64,
    pub gamma_t: f64,
}

fn terminal_index(path: &PathBundle, market: &MarketSpec) -> Result<usize, AdjointError> {
    Ok(path.grid.index_of(market.horizon)?)
}

fn theta(market: &MarketSpec, t: f64, y: f64) -> Result<f64, AdjointError> {
    let sigma0 = market.sigma0.eval(t, y);
    if sigma0.abs() < DEGENERATE_SIGMA {
        return Err(AdjointError::DegenerateVolatility { t, sigma0 });
    }
    Ok(market.b0.eval(t, y) / sigma0)
}

fn jump_ratio(insider: &InsiderSpec, market: &MarketSpec, t: f64, y: f64) -> Result<(f64, f64), AdjointError> {
    let mark = insider.marks()[0];
    let k = market.b0.eval(t, y) / (mark.intensity * market.gamma0.eval(t, y, mark.zeta));
    if !(k < 1.0) {
        return Err(AdjointError::InvalidRegime { ratio: k });
    }
    Ok((k, mark.intensity))
}

/// `Γ₀(t_i, y)` for `t_i ≤ T`.
pub fn gamma0_trajectory(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    y: f64,
) -> Result<Vec<f64>, AdjointError> {
    let regime = Regime::detect(insider, market)?;
    let last = terminal_index(path, market)?;
    let dt = path.grid.dt();
    let mut log_g = 0.0;
    let mut out = Vec::with_capacity(last + 1);
    out.push(1.0);
    for i in 0..last {
        let t = path.grid.time(i);
        match regime {
            Regime::Brownian => {
                let th = theta(market, t, y)?;
                log_g += -th * path.db[i] - 0.5 * th * th * dt;
            }
            Regime::Poisson => {
                let (k, lambda) = jump_ratio(insider, market, t, y)?;
                let l = (1.0 - k).ln();
                log_g += l * (path.jumps_in_step(i).len() as f64 - lambda * dt) + lambda * (l + k) * dt;
            }
        }
        out.push(log_g.exp());
    }
    Ok(out)
}

/// Terminal `Γ₀(T, y)`.
pub fn gamma0_path(path: &PathBundle, insider: &InsiderSpec, market: &MarketSpec, y: f64) -> Result<f64, AdjointError> {
    Ok(*gamma0_trajectory(path, insider, market, y)?.last().expect("non-empty trajectory"))
}

/// `ln Γ(T, y)`.
pub fn log_gamma_path(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    y: f64,
    info: &Information,
) -> Result<f64, AdjointError> {
    let regime = Regime::detect(insider, market)?;
    let last = terminal_index(path, market)?;
    let dt = path.grid.dt();
    let mut log_g = 0.0;
    for i in 0..last {
        let t = path.grid.time(i);
        match regime {
            Regime::Brownian => {
                let th = theta(market, t, y)?;
                let phi = match info {
                    Information::Insider(quad) => donsker::phi(insider, t, y, path.observed(i), quad)?,
                    Information::Uninformed => 0.0,
                };
                log_g += -(phi + th) * path.db[i] + 0.5 * (phi * phi - th * th) * dt;
            }
            Regime::Poisson => {
                let (k, lambda) = jump_ratio(insider, market, t, y)?;
                let psi = match info {
                    Information::Insider(quad) => {
                        let state = donsker::density_state(insider, t, y, path.observed(i), quad)?;
                        state.psi_ratio[0].1.ok_or(DonskerError::DensityFloor { t, y, density: state.m })?
                    }
                    Information::Uninformed => 0.0,
                };
                let l = (1.0 - k).ln();
                let lp = (1.0 + psi).ln();
                let n = path.jumps_in_step(i).len() as f64;
                log_g += (l - lp) * (n - lambda * dt) + lambda * ((l + k) - (lp - psi)) * dt;
            }
        }
    }
    Ok(log_g)
}

/// Terminal `Γ(T, y)`.
pub fn gamma_path(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    y: f64,
    info: &Information,
) -> Result<f64, AdjointError> {
    Ok(log_gamma_path(path, insider, market, y, info)?.exp())
}

pub fn exponential_pair(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    y: f64,
    info: &Information,
) -> Result<ExponentialPair, AdjointError> {
    Ok(ExponentialPair {
        gamma0_t: gamma0_path(path, insider, market, y)?,
        gamma_t: gamma_path(path, insider, market, y, info)?,
    })
}

/// Per-path `(Γ₀(T), Γ(T))` for `n_paths` seeded paths.
pub fn simulate_pairs(
    insider: &InsiderSpec,
    market: &MarketSpec,
    y: f64,
    info: &Information,
    n_paths: usize,
    seed: u64,
    steps: usize,
) -> Result<Vec<ExponentialPair>, AdjointError> {
    Regime::detect(insider, market)?;
    let out = map_paths(insider, market, n_paths, seed, steps, |_, path| {
        exponential_pair(path, insider, market, y, info).map_err(|e| match e {
            AdjointError::Market(m) => m,
            AdjointError::Donsker(d) => MarketError::Donsker(d),
            other => MarketError::Policy(other.to_string()),
        })
    })?;
    Ok(out)
}

/// Monte Carlo budget `E[I(cΓ)Γ₀]` and its standard error.
pub fn budget(pairs: &[ExponentialPair], utility: &UtilitySpec, c: f64) -> (f64, f64) {
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|p| utility.inverse_marginal(c * p.gamma_t) * p.gamma0_t)
        .collect();
    mean_se(&values)
}

pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSolution {
    pub c: f64,
    pub budget: f64,
    pub budget_se: f64,
    pub iterations: usize,
}

/// Bisection in `ln c` for `E[I(cΓ)Γ₀] = x₀` over a fixed path set.
pub fn solve_c_from_pairs(
    pairs: &[ExponentialPair],
    utility: &UtilitySpec,
    x0: f64,
) -> Result<BudgetSolution, AdjointError> {
    utility.validate()?;
    let b = |c: f64| budget(pairs, utility, c).0;
    let budget_low = b(C_MIN);
    let budget_high = b(C_MAX);
    if !(budget_low >= x0 && budget_high <= x0) {
        return Err(AdjointError::BracketFailure { budget_low, budget_high, x0 });
    }
    let (mut lo, mut hi) = (C_MIN.ln(), C_MAX.ln());
    let mut iterations = 0;
    while iterations < BISECTION_ITER && hi - lo > 1e-15 * lo.abs().max(1.0) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let v = b(mid.exp());
        if v == x0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v > x0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = (0.5 * (lo + hi)).exp();
    let (budget, budget_se) = budget(pairs, utility, c);
    Ok(BudgetSolution { c, budget, budget_se, iterations })
}

/// Budget constant `c = p(0,y)` from `n_paths` seeded paths.
#[allow(clippy::too_many_arguments)]
pub fn solve_c(
    insider: &InsiderSpec,
    market: &MarketSpec,
    utility: &UtilitySpec,
    y: f64,
    info: &Information,
    n_paths: usize,
    seed: u64,
    steps: usize,
) -> Result<BudgetSolution, AdjointError> {
    utility.validate()?;
    let pairs = simulate_pairs(insider, market, y, info, n_paths, seed, steps)?;
    solve_c_from_pairs(&pairs, utility, market.x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<AdjointState>,
    /// `x(T,y) = I(cΓ(T,y))`.
    pub terminal_wealth: f64,
    /// `M(T,y)/M(0,y)`.
    pub density_ratio: f64,
    /// `p(T,y) / (U′(x(T,y)) · M(T,y)/M(0,y))`; equal to 1 in continuous time.
    pub terminal_ratio: f64,
}

/// `p = cΓ₀`, with `q = −θp` (Brownian) or `r = −kp` (pure jump).
pub fn adjoint_processes(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    utility: &UtilitySpec,
    y: f64,
    c: f64,
    quad: &QuadratureConfig,
) -> Result<AdjointTrajectory, AdjointError> {
    let regime = Regime::detect(insider, market)?;
    let g0 = gamma0_trajectory(path, insider, market, y)?;
    let last = g0.len() - 1;
    let mut states = Vec::with_capacity(g0.len());
    let mut times = Vec::with_capacity(g0.len());
    for (i, g) in g0.iter().enumerate() {
        let t = path.grid.time(i);
        let p = c * g;
        let state = match regime {
            Regime::Brownian => AdjointState { p, q: -theta(market, t, y)? * p, r: Vec::new() },
            Regime::Poisson => {
                let (k, _) = jump_ratio(insider, market, t, y)?;
                AdjointState { p, q: 0.0, r: vec![(insider.marks()[0].zeta, -k * p)] }
            }
        };
        times.push(t);
        states.push(state);
    }
    let gamma_t = gamma_path(path, insider, market, y, &Information::Insider(*quad))?;
    let terminal_wealth = utility.inverse_marginal(c * gamma_t);
    let m0 = donsker::cond_density(insider, 0.0, y, path.observed(0), quad)?;
    let mt = donsker::cond_density(insider, path.grid.time(last), y, path.observed(last), quad)?;
    let density_ratio = mt / m0;
    let terminal_ratio = states[last].p / (utility.marginal(terminal_wealth) * density_ratio);
    Ok(AdjointTrajectory { times, states, terminal_wealth, density_ratio, terminal_ratio })
}
