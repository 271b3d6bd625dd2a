//! Gaussian-damped oscillatory integrals over the real line.
//!
//! Every conditional density in [`crate::donsker`] is a Fourier inversion of
//! the form
//!
//! ```text
//!     ∫_ℝ g(x) · exp(-½ σ² x²) dx
//! ```
//!
//! where `g` is a bounded, complex-valued, oscillating factor (phase terms and
//! compound-Poisson exponents). The Gaussian factor makes the integrand
//! negligible outside a radius that depends only on `σ²` and an envelope of
//! `|g|`, so the integral is truncated to `[-R, R]` and evaluated by dyadic
//! trapezoid refinement with Richardson (Romberg) acceleration.

use num_complex::Complex64;
use thiserror::Error;

/// Number of envelope probe points used to bound `|g|` before truncation.
pub const ENVELOPE_PROBES: usize = 64;

/// Panel count of the first refinement level.
const INITIAL_PANELS: usize = 16;

/// Refinement levels are not accepted below this panel count, so that a
/// coarse grid cannot agree with itself by aliasing.
const MIN_ACCEPT_PANELS: usize = 64;

/// Depth of the Richardson table (trapezoid, Simpson, Boole, ...).
const ROMBERG_DEPTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("damping variance must be positive, got {0}")]
    InvalidDamping(f64),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence within {panels} panels (last change {residual:e})")]
    QuadratureDivergence { panels: usize, residual: f64 },
    #[error("truncation radius is not finite (envelope {envelope:e})")]
    TruncationFailure { envelope: f64 },
}

/// Tolerances and limits for [`damped_oscillatory_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the number of trapezoid panels; a power of two.
    pub max_panels: usize,
    /// Integrand magnitude, relative to the envelope of `|g|`, below which the
    /// tails are dropped.
    pub truncation_eps: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_panels: 1 << 20,
            truncation_eps: 1e-16,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QuadratureError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("truncation_eps", self.truncation_eps)?;
        if !self.max_panels.is_power_of_two() || self.max_panels < MIN_ACCEPT_PANELS {
            return Err(QuadratureError::InvalidConfig(format!(
                "max_panels must be a power of two >= {MIN_ACCEPT_PANELS}, got {}",
                self.max_panels
            )));
        }
        Ok(())
    }
}

/// Result of a converged integration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureOutput {
    pub value: Complex64,
    pub panels_used: usize,
    /// Magnitude of the last level-to-level change.
    pub residual_estimate: f64,
    /// Truncation radius `R`; the integral is taken over `[-R, R]`.
    pub radius: f64,
    /// Level-to-level changes, one entry per refinement after the first.
    pub residual_history: Vec<f64>,
}

/// Truncation radius `R = sqrt(2 ln(sup|g| / eps) / σ²)`.
///
/// `sup|g|` is the maximum of `|g|` over [`ENVELOPE_PROBES`] points spread over
/// the radius implied by the damping alone, floored at 1 so that the tails are
/// always cut relative to an O(1) scale.
pub fn truncation_radius<G>(g: &G, sigma_sq: f64, cfg: &QuadratureConfig) -> Result<f64, QuadratureError>
where
    G: Fn(f64) -> Complex64,
{
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(QuadratureError::InvalidDamping(sigma_sq));
    }
    let log_ratio = |sup: f64| (sup / cfg.truncation_eps).ln();
    let base = (2.0 * log_ratio(1.0) / sigma_sq).sqrt();
    let mut envelope: f64 = 1.0;
    for k in 0..ENVELOPE_PROBES {
        let x = -base + 2.0 * base * (k as f64 + 0.5) / ENVELOPE_PROBES as f64;
        let mag = g(x).norm();
        if mag.is_nan() {
            return Err(QuadratureError::TruncationFailure { envelope: mag });
        }
        envelope = envelope.max(mag);
    }
    let radius = (2.0 * log_ratio(envelope) / sigma_sq).sqrt();
    if radius.is_finite() && radius > 0.0 {
        Ok(radius)
    } else {
        Err(QuadratureError::TruncationFailure { envelope })
    }
}

/// Integrate `g(x)·exp(-½ σ² x²)` over the real line.
pub fn damped_oscillatory_integral<G>(
    g: G,
    sigma_sq: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureOutput, QuadratureError>
where
    G: Fn(f64) -> Complex64,
{
    cfg.validate()?;
    let radius = truncation_radius(&g, sigma_sq, cfg)?;
    integrate_on_interval(g, sigma_sq, radius, cfg)
}

/// [`damped_oscillatory_integral`] with a bound on the node spacing.
///
/// The trapezoid sum with step `h` equals the exact integral plus copies of
/// the integrand's Fourier transform shifted by multiples of `2π/h`. When the
/// caller knows that transform is negligible beyond frequency `bandwidth`,
/// no level with `2π/h < bandwidth` is accepted: such levels can agree with
/// each other while all carrying the same aliased image.
pub fn damped_oscillatory_integral_band_limited<G>(
    g: G,
    sigma_sq: f64,
    bandwidth: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureOutput, QuadratureError>
where
    G: Fn(f64) -> Complex64,
{
    cfg.validate()?;
    let radius = truncation_radius(&g, sigma_sq, cfg)?;
    let max_step = if bandwidth > 0.0 { 2.0 * std::f64::consts::PI / bandwidth } else { f64::INFINITY };
    integrate_with_step_limit(g, sigma_sq, radius, max_step, cfg)
}

/// Same as [`damped_oscillatory_integral`] with a caller-chosen radius.
pub fn integrate_on_interval<G>(
    g: G,
    sigma_sq: f64,
    radius: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureOutput, QuadratureError>
where
    G: Fn(f64) -> Complex64,
{
    integrate_with_step_limit(g, sigma_sq, radius, f64::INFINITY, cfg)
}

fn integrate_with_step_limit<G>(
    g: G,
    sigma_sq: f64,
    radius: f64,
    max_step: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureOutput, QuadratureError>
where
    G: Fn(f64) -> Complex64,
{
    cfg.validate()?;
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(QuadratureError::InvalidDamping(sigma_sq));
    }
    let f = |x: f64| g(x) * (-0.5 * sigma_sq * x * x).exp();

    let mut panels = INITIAL_PANELS;
    let mut h = 2.0 * radius / panels as f64;
    // Nodes are visited in mirrored pairs (x, -x) so that conjugate-symmetric
    // integrands produce imaginary parts that cancel pairwise instead of
    // accumulating rounding across the whole sweep.
    let mut node_sum = (f(-radius) + f(radius)) * 0.5 + f(0.0);
    for i in 1..panels / 2 {
        let x = i as f64 * h;
        node_sum += f(x) + f(-x);
    }
    let mut row = vec![node_sum * h];
    let mut prev_trapezoid = row[0];
    let mut prev_extrapolated = row[0];
    let mut history = Vec::new();

    while panels < cfg.max_panels {
        // Midpoints of the current panels become new nodes.
        let mut mid = Complex64::new(0.0, 0.0);
        for i in 0..panels / 2 {
            let x = (i as f64 + 0.5) * h;
            mid += f(x) + f(-x);
        }
        node_sum += mid;
        panels *= 2;
        h *= 0.5;

        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(node_sum * h);
        let mut factor = 1.0;
        for j in 1..=row.len().min(ROMBERG_DEPTH - 1) {
            factor *= 4.0;
            let refined = next[j - 1] + (next[j - 1] - row[j - 1]) / (factor - 1.0);
            next.push(refined);
        }
        // The trapezoid rule converges geometrically once the integrand has
        // decayed at ±R, where mixing in coarse levels only slows it down;
        // the extrapolated column wins otherwise. Keep whichever sequence
        // moved less on this level.
        let trapezoid = next[0];
        let extrapolated = *next.last().unwrap();
        let change_trapezoid = (trapezoid - prev_trapezoid).norm();
        let change_extrapolated = (extrapolated - prev_extrapolated).norm();
        let (best, residual) = if change_trapezoid <= change_extrapolated {
            (trapezoid, change_trapezoid)
        } else {
            (extrapolated, change_extrapolated)
        };
        history.push(residual);
        prev_trapezoid = trapezoid;
        prev_extrapolated = extrapolated;
        row = next;

        let target = (cfg.rel_tol * best.norm()).max(cfg.abs_tol);
        if panels >= MIN_ACCEPT_PANELS && h <= max_step && residual < target {
            return Ok(QuadratureOutput {
                value: best,
                panels_used: panels,
                residual_estimate: residual,
                radius,
                residual_history: history,
            });
        }
    }
    Err(QuadratureError::QuadratureDivergence {
        panels,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}
