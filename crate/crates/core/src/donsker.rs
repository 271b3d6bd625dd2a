//! Conditional Donsker-delta densities and their Hida-Malliavin ratios.
//!
//! For an insider variable of first-order chaos type,
//!
//! ```text
//!     Y = ∫₀^{T₀} β(s) dB(s) + ∫₀^{T₀}∫ ψ(s,ζ) Ñ(ds,dζ),
//! ```
//!
//! the conditional density `M(t,y) = E[δ_Y(y) | F_t]` is a Fourier inversion
//!
//! ```text
//!     M(t,y) = (1/2π) ∫ exp[ix(Y(t) − y) + Σ_k ∫_t^{T₀} (e^{ixψ} − 1 − ixψ) ν_k ds] · e^{−½x²v(t)} dx
//! ```
//!
//! with `v(t) = ∫_t^{T₀} β² ds`. The Brownian and jump Malliavin derivatives
//! multiply the integrand by `ixβ(t)` and `e^{ixψ(t,ζ)} − 1` respectively;
//! `Φ` and `Ψ` are those conditional expectations divided by `M`.
//!
//! Gaussian insiders (no jump part) use the closed forms directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::{damped_oscillatory_integral_band_limited, QuadratureConfig, QuadratureError};
use crate::step::StepFunction;

/// Smallest remaining variance `∫_t^{T₀} β²` accepted before `T₀`.
pub const VARIANCE_FLOOR: f64 = 1e-10;
/// Ratios `Φ`, `Ψ` are not formed when the density is at or below this.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Bound on `|Im ∫F| / max(|Re ∫F|, DENSITY_FLOOR)`.
pub const IMAG_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DonskerError {
    #[error("time {t} is not before the insider horizon {horizon}")]
    HorizonViolation { t: f64, horizon: f64 },
    #[error("remaining variance {variance:e} at t={t} is below the floor")]
    DegenerateVariance { t: f64, variance: f64 },
    #[error("density {density:e} at (t={t}, y={y}) is below the ratio floor")]
    DensityFloor { t: f64, y: f64, density: f64 },
    #[error("operation requires a {expected:?} insider, got {found:?}")]
    WrongKind { expected: InsiderKind, found: InsiderKind },
    #[error("invalid insider specification: {0}")]
    InvalidSpec(String),
    #[error("no mark with index {0}")]
    UnknownMark(usize),
    #[error("imaginary residual ratio {ratio:e} exceeds tolerance")]
    ImaginaryResidual { ratio: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsiderKind {
    Gaussian,
    BrownianPoisson,
    GeneralChaos,
}

/// Atom `ν_k δ_{ζ_k}` of a discrete Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark {
    pub zeta: f64,
    pub intensity: f64,
}

/// Definition of the insider variable `Y = Y(T₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InsiderSpec {
    kind: InsiderKind,
    horizon: f64,
    beta: StepFunction,
    marks: Vec<Mark>,
    /// `psi[k]` is `s ↦ ψ(s, ζ_k)`.
    psi: Vec<StepFunction>,
}

impl InsiderSpec {
    /// `Y = ∫ β dB`.
    pub fn gaussian(beta: StepFunction) -> Result<Self, DonskerError> {
        let spec = Self {
            kind: InsiderKind::Gaussian,
            horizon: beta.horizon(),
            beta,
            marks: Vec::new(),
            psi: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `Y = βB(T₀) + Ñ(T₀)` with `Ñ` a compensated Poisson process of rate `λ`.
    pub fn brownian_poisson(beta: f64, lambda: f64, horizon: f64) -> Result<Self, DonskerError> {
        let spec = Self {
            kind: InsiderKind::BrownianPoisson,
            horizon,
            beta: StepFunction::constant(beta, horizon),
            marks: vec![Mark { zeta: 1.0, intensity: lambda }],
            psi: vec![StepFunction::constant(1.0, horizon)],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// General first-order chaos with a discrete mark measure.
    pub fn general(beta: StepFunction, marks: Vec<Mark>, psi: Vec<StepFunction>) -> Result<Self, DonskerError> {
        let spec = Self {
            kind: InsiderKind::GeneralChaos,
            horizon: beta.horizon(),
            beta,
            marks,
            psi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DonskerError> {
        let bad = |msg: String| Err(DonskerError::InvalidSpec(msg));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.beta.values().iter().any(|v| !v.is_finite()) {
            return bad("beta has non-finite values".into());
        }
        // ∫_t^{T₀} β² > 0 for all t < T₀ iff the last cell is nonzero.
        if *self.beta.values().last().unwrap() == 0.0 {
            return bad("beta must be nonzero on the final cell so that the remaining variance stays positive".into());
        }
        if self.psi.len() != self.marks.len() {
            return bad(format!("{} marks but {} psi tables", self.marks.len(), self.psi.len()));
        }
        for (m, psi) in self.marks.iter().zip(&self.psi) {
            if !(m.intensity >= 0.0) || !m.intensity.is_finite() || !m.zeta.is_finite() {
                return bad(format!("mark {:?} must have a finite nonnegative intensity", m));
            }
            if (psi.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
                return bad("psi horizon differs from beta horizon".into());
            }
            if psi.values().iter().any(|v| !v.is_finite()) {
                return bad("psi has non-finite values".into());
            }
        }
        if !self.marks.is_empty() && !self.marks.iter().any(|m| m.intensity > 0.0) {
            return bad("jump measure present but every intensity is zero".into());
        }
        if self.kind == InsiderKind::BrownianPoisson && !(self.marks[0].intensity > 0.0) {
            return bad("Brownian-Poisson insider needs lambda > 0".into());
        }
        Ok(())
    }

    pub fn kind(&self) -> InsiderKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn beta(&self) -> &StepFunction {
        &self.beta
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn psi(&self, mark: usize) -> Option<&StepFunction> {
        self.psi.get(mark)
    }

    pub fn total_intensity(&self) -> f64 {
        self.marks.iter().map(|m| m.intensity).sum()
    }

    /// Jump of `Y` caused by a mark `k` event at time `s`.
    pub fn jump_size(&self, s: f64, mark: usize) -> f64 {
        self.psi[mark].value_at(s)
    }

    /// `∫_t^{T₀} β(s)² ds`.
    pub fn remaining_variance(&self, t: f64) -> f64 {
        self.beta.integral_sq(t, self.horizon)
    }

    /// `Var Y = ∫ β² ds + Σ_k ν_k ∫ ψ_k² ds`.
    pub fn unconditional_variance(&self) -> f64 {
        let jumps: f64 = self
            .marks
            .iter()
            .zip(&self.psi)
            .map(|(m, psi)| m.intensity * psi.integral_sq(0.0, self.horizon))
            .sum();
        self.remaining_variance(0.0) + jumps
    }

    /// Uniform grid of `points` values over ±`width_sd` unconditional standard
    /// deviations of `Y` (mean zero).
    pub fn y_grid(&self, points: usize, width_sd: f64) -> Vec<f64> {
        let half = width_sd * self.unconditional_variance().sqrt();
        if points == 1 {
            return vec![0.0];
        }
        (0..points)
            .map(|i| -half + 2.0 * half * i as f64 / (points - 1) as f64)
            .collect()
    }

    /// Default y-grid: 401 points over ±8 standard deviations.
    pub fn default_y_grid(&self) -> Vec<f64> {
        self.y_grid(401, 8.0)
    }

    fn require(&self, kind: InsiderKind) -> Result<(), DonskerError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(DonskerError::WrongKind { expected: kind, found: self.kind })
        }
    }

    fn check_time(&self, t: f64) -> Result<f64, DonskerError> {
        if !(t >= 0.0) || t >= self.horizon {
            return Err(DonskerError::HorizonViolation { t, horizon: self.horizon });
        }
        let variance = self.remaining_variance(t);
        if variance <= VARIANCE_FLOOR {
            return Err(DonskerError::DegenerateVariance { t, variance });
        }
        Ok(variance)
    }
}

/// Observed stochastic integrals up to time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservedState {
    /// `∫₀ᵗ β dB`.
    pub brownian: f64,
    /// `∫₀ᵗ∫ ψ Ñ(ds,dζ)`.
    pub jump: f64,
}

impl ObservedState {
    /// State of the Brownian-Poisson insider from `B(t)` and `Ñ(t)`.
    pub fn brownian_poisson(beta: f64, b_t: f64, n_tilde_t: f64) -> Self {
        Self { brownian: beta * b_t, jump: n_tilde_t }
    }

    pub fn y_t(&self) -> f64 {
        self.jump + self.brownian
    }
}

/// `(M, Φ, Ψ)` at one `(t, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub t: f64,
    pub y: f64,
    pub m: f64,
    /// `None` when `m` is at or below [`DENSITY_FLOOR`].
    pub phi: Option<f64>,
    /// `(ζ_k, Ψ(t,y,ζ_k))` per mark.
    pub psi_ratio: Vec<(f64, Option<f64>)>,
    pub imag_residual: f64,
}

/// Integrand `g(x)` (damping excluded) of the conditional density.
#[derive(Debug, Clone)]
pub struct DensityIntegrand {
    shift: f64,
    variance: f64,
    jump_terms: Vec<(f64, f64)>,
}

impl DensityIntegrand {
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Frequency beyond which the Fourier transform of the damped integrand
    /// (the density of `Y(T₀) − Y(t)` seen from `y`) is negligible.
    pub fn bandwidth(&self, extra_shift: f64) -> f64 {
        let mut mean_jumps = 0.0;
        let mut drift = 0.0;
        let mut max_size: f64 = 0.0;
        for &(weight, size) in &self.jump_terms {
            mean_jumps += weight;
            drift += weight * size.abs();
            max_size = max_size.max(size.abs());
        }
        let jump_count = mean_jumps + 10.0 * mean_jumps.sqrt() + 25.0;
        let extent = 12.0 * self.variance.sqrt() + drift + max_size * jump_count;
        self.shift.abs() + extra_shift.abs() + extent
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let mut exponent = Complex64::new(0.0, x * self.shift);
        for &(weight, size) in &self.jump_terms {
            let ixs = Complex64::new(0.0, x * size);
            exponent += weight * ((ixs.exp() - 1.0) - ixs);
        }
        exponent.exp()
    }
}

/// Brownian-Poisson integrand built term-by-term from
/// `exp[ixÑ(t) + ixβB(t) + λ(T₀−t)(e^{ix}−1−ix) − ixy]`.
pub fn bp_integrand(spec: &InsiderSpec, t: f64, y: f64, b_t: f64, n_tilde_t: f64) -> Result<DensityIntegrand, DonskerError> {
    spec.require(InsiderKind::BrownianPoisson)?;
    let beta = spec.beta.value_at(0.0);
    let tau = spec.horizon - t;
    let variance = beta * beta * tau;
    if !(t >= 0.0) || tau <= 0.0 {
        return Err(DonskerError::HorizonViolation { t, horizon: spec.horizon });
    }
    if variance <= VARIANCE_FLOOR {
        return Err(DonskerError::DegenerateVariance { t, variance });
    }
    let lambda = spec.marks[0].intensity;
    Ok(DensityIntegrand {
        shift: (n_tilde_t + beta * b_t) - y,
        variance,
        jump_terms: vec![(lambda * tau, 1.0)],
    })
}

/// General first-order-chaos integrand; the compensator exponent is the exact
/// run-sum of the piecewise-constant `ψ` against the discrete `ν`.
pub fn general_integrand(spec: &InsiderSpec, t: f64, y: f64, state: ObservedState) -> Result<DensityIntegrand, DonskerError> {
    let variance = spec.check_time(t)?;
    let mut jump_terms = Vec::new();
    for (mark, psi) in spec.marks.iter().zip(&spec.psi) {
        if mark.intensity == 0.0 {
            continue;
        }
        for (start, end, size) in psi.runs(t, spec.horizon) {
            if size != 0.0 {
                jump_terms.push((mark.intensity * (end - start), size));
            }
        }
    }
    Ok(DensityIntegrand { shift: state.y_t() - y, variance, jump_terms })
}

fn integrate<F>(
    integrand: &DensityIntegrand,
    factor: F,
    factor_shift: f64,
    quad: &QuadratureConfig,
) -> Result<Complex64, DonskerError>
where
    F: Fn(f64) -> Complex64,
{
    let out = damped_oscillatory_integral_band_limited(
        |x| integrand.eval(x) * factor(x),
        integrand.variance,
        integrand.bandwidth(factor_shift),
        quad,
    )?;
    Ok(out.value / (2.0 * PI))
}

fn imag_ratio(value: Complex64) -> f64 {
    value.im.abs() / value.re.abs().max(DENSITY_FLOOR)
}

fn density_value(integrand: &DensityIntegrand, quad: &QuadratureConfig) -> Result<(f64, f64), DonskerError> {
    let value = integrate(integrand, |_| Complex64::new(1.0, 0.0), 0.0, quad)?;
    let ratio = imag_ratio(value);
    if ratio >= IMAG_TOL {
        return Err(DonskerError::ImaginaryResidual { ratio });
    }
    Ok((value.re, ratio))
}

fn ratio_over(numerator: Complex64, m: f64, t: f64, y: f64) -> Result<f64, DonskerError> {
    if m <= DENSITY_FLOOR {
        return Err(DonskerError::DensityFloor { t, y, density: m });
    }
    let ratio = imag_ratio(numerator);
    if ratio >= IMAG_TOL {
        return Err(DonskerError::ImaginaryResidual { ratio });
    }
    Ok(numerator.re / m)
}

// ---------------------------------------------------------------------------
// Gaussian closed forms

/// `(2πv)^{-1/2} exp(−(y_t − y)²/2v)`, `v = ∫_t^{T₀} β²`.
pub fn gaussian_cond_density(spec: &InsiderSpec, t: f64, y: f64, y_t: f64) -> Result<f64, DonskerError> {
    spec.require(InsiderKind::Gaussian)?;
    let v = spec.check_time(t)?;
    let d = y_t - y;
    Ok((-(d * d) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
}

/// `Φ(t,y) = (y − y_t) β(t) / v`.
pub fn gaussian_phi(spec: &InsiderSpec, t: f64, y: f64, y_t: f64) -> Result<f64, DonskerError> {
    spec.require(InsiderKind::Gaussian)?;
    let v = spec.check_time(t)?;
    Ok((y - y_t) * spec.beta.value_at(t) / v)
}

// ---------------------------------------------------------------------------
// Brownian-Poisson

pub fn bp_cond_density(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    b_t: f64,
    n_tilde_t: f64,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    let integrand = bp_integrand(spec, t, y, b_t, n_tilde_t)?;
    Ok(density_value(&integrand, quad)?.0)
}

pub fn bp_phi(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    b_t: f64,
    n_tilde_t: f64,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    let integrand = bp_integrand(spec, t, y, b_t, n_tilde_t)?;
    let (m, _) = density_value(&integrand, quad)?;
    let beta = spec.beta.value_at(t);
    let num = integrate(&integrand, |x| Complex64::new(0.0, x * beta), 0.0, quad)?;
    ratio_over(num, m, t, y)
}

pub fn bp_psi(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    b_t: f64,
    n_tilde_t: f64,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    let integrand = bp_integrand(spec, t, y, b_t, n_tilde_t)?;
    let (m, _) = density_value(&integrand, quad)?;
    let num = integrate(&integrand, |x| Complex64::new(0.0, x).exp() - 1.0, 1.0, quad)?;
    ratio_over(num, m, t, y)
}

// ---------------------------------------------------------------------------
// General first-order chaos

pub fn general_cond_density(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    spec.require(InsiderKind::GeneralChaos)?;
    let integrand = general_integrand(spec, t, y, state)?;
    Ok(density_value(&integrand, quad)?.0)
}

pub fn general_phi(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    spec.require(InsiderKind::GeneralChaos)?;
    let integrand = general_integrand(spec, t, y, state)?;
    let (m, _) = density_value(&integrand, quad)?;
    let beta = spec.beta.value_at(t);
    let num = integrate(&integrand, |x| Complex64::new(0.0, x * beta), 0.0, quad)?;
    ratio_over(num, m, t, y)
}

/// `Ψ(t, y, ζ_mark)`.
pub fn general_psi(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    mark: usize,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    spec.require(InsiderKind::GeneralChaos)?;
    if mark >= spec.marks.len() {
        return Err(DonskerError::UnknownMark(mark));
    }
    let integrand = general_integrand(spec, t, y, state)?;
    let (m, _) = density_value(&integrand, quad)?;
    let size = spec.jump_size(t, mark);
    if size == 0.0 {
        // e^{ix·0} − 1 vanishes identically.
        ratio_over(Complex64::new(0.0, 0.0), m, t, y)?;
        return Ok(0.0);
    }
    let num = integrate(&integrand, |x| Complex64::new(0.0, x * size).exp() - 1.0, size, quad)?;
    ratio_over(num, m, t, y)
}

// ---------------------------------------------------------------------------
// Dispatch over kinds

/// `M(t,y)` for any insider kind.
pub fn cond_density(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    match spec.kind {
        InsiderKind::Gaussian => gaussian_cond_density(spec, t, y, state.y_t()),
        InsiderKind::BrownianPoisson => {
            let beta = spec.beta.value_at(0.0);
            bp_cond_density(spec, t, y, state.brownian / beta, state.jump, quad)
        }
        InsiderKind::GeneralChaos => general_cond_density(spec, t, y, state, quad),
    }
}

/// `Φ(t,y)` for any insider kind.
pub fn phi(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<f64, DonskerError> {
    match spec.kind {
        InsiderKind::Gaussian => {
            let m = gaussian_cond_density(spec, t, y, state.y_t())?;
            if m <= DENSITY_FLOOR {
                return Err(DonskerError::DensityFloor { t, y, density: m });
            }
            gaussian_phi(spec, t, y, state.y_t())
        }
        InsiderKind::BrownianPoisson => {
            let beta = spec.beta.value_at(0.0);
            bp_phi(spec, t, y, state.brownian / beta, state.jump, quad)
        }
        InsiderKind::GeneralChaos => general_phi(spec, t, y, state, quad),
    }
}

/// Full `(M, Φ, Ψ)` at `(t, y)`; ratios are `None` below the density floor.
pub fn density_state(
    spec: &InsiderSpec,
    t: f64,
    y: f64,
    state: ObservedState,
    quad: &QuadratureConfig,
) -> Result<DensityState, DonskerError> {
    if spec.kind == InsiderKind::Gaussian {
        let m = gaussian_cond_density(spec, t, y, state.y_t())?;
        let phi = if m > DENSITY_FLOOR { Some(gaussian_phi(spec, t, y, state.y_t())?) } else { None };
        return Ok(DensityState { t, y, m, phi, psi_ratio: Vec::new(), imag_residual: 0.0 });
    }
    let integrand = match spec.kind {
        InsiderKind::BrownianPoisson => {
            let beta = spec.beta.value_at(0.0);
            bp_integrand(spec, t, y, state.brownian / beta, state.jump)?
        }
        _ => general_integrand(spec, t, y, state)?,
    };
    let (m, imag_residual) = density_value(&integrand, quad)?;
    let available = m > DENSITY_FLOOR;
    let phi = if available {
        let beta = spec.beta.value_at(t);
        let num = integrate(&integrand, |x| Complex64::new(0.0, x * beta), 0.0, quad)?;
        Some(ratio_over(num, m, t, y)?)
    } else {
        None
    };
    let mut psi_ratio = Vec::with_capacity(spec.marks.len());
    for (k, mark) in spec.marks.iter().enumerate() {
        let value = if available {
            let size = spec.jump_size(t, k);
            if size == 0.0 {
                Some(0.0)
            } else {
                let num = integrate(&integrand, |x| Complex64::new(0.0, x * size).exp() - 1.0, size, quad)?;
                Some(ratio_over(num, m, t, y)?)
            }
        } else {
            None
        };
        psi_ratio.push((mark.zeta, value));
    }
    Ok(DensityState { t, y, m, phi, psi_ratio, imag_residual })
}
