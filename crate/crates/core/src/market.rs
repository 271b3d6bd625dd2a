//! Scenario simulation and wealth under y-parametrized policies.
//!
//! A whole path on `[0, T₀]` is generated first, `Y` is read off it, and a
//! policy `π(t, y)` is then evaluated at `y = Y`. Wealth uses the exact
//! exponential solution
//!
//! ```text
//!     x(t,y) = x₀ exp( ∫₀ᵗ {πb₀ − ½π²σ₀² − Σ_k ν_k πγ₀(ζ_k)} ds + ∫₀ᵗ πσ₀ dB + Σ_{jumps ≤ t} ln(1 + πγ₀(ζ)) )
//! ```
//!
//! which is the usual `ln(1+πγ₀) dÑ` form with the compensator terms combined.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::donsker::{DonskerError, InsiderKind, InsiderSpec, ObservedState};

pub const ADMISSIBILITY_FLOOR: f64 = 1e-9;
pub const DEFAULT_STEPS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("trading horizon {horizon} is not a point of the grid with step {dt}")]
    GridMismatch { horizon: f64, dt: f64 },
    #[error("1 + πγ₀ = {margin:e} at t={t}, ζ={zeta} is below the admissibility floor")]
    AdmissibilityViolation { t: f64, zeta: f64, margin: f64 },
    #[error("invalid market specification: {0}")]
    InvalidSpec(String),
    #[error("wealth is not finite at t={t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Donsker(#[from] DonskerError),
    #[error("policy evaluation failed: {0}")]
    Policy(String),
}

type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Field3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Deterministic coefficient field in `(t, y)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(Field2),
}

impl Coefficient {
    pub fn field<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Field(Arc::new(f))
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Field(f) => f(t, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(c) if *c == 0.0)
    }
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// Jump coefficient field in `(t, y, ζ)`.
#[derive(Clone)]
pub enum MarkCoefficient {
    Constant(f64),
    Field(Field3),
}

impl MarkCoefficient {
    pub fn field<F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Field(Arc::new(f))
    }

    pub fn eval(&self, t: f64, y: f64, zeta: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Field(f) => f(t, y, zeta),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(c) if *c == 0.0)
    }
}

impl std::fmt::Debug for MarkCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// Single risky asset with unit risk-free price.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    pub b0: Coefficient,
    pub sigma0: Coefficient,
    pub gamma0: MarkCoefficient,
    pub x0: f64,
    /// Trading horizon `T`.
    pub horizon: f64,
}

impl MarketSpec {
    /// Market with constant coefficients.
    pub fn constant(b0: f64, sigma0: f64, gamma0: f64, x0: f64, horizon: f64) -> Self {
        Self {
            b0: Coefficient::Constant(b0),
            sigma0: Coefficient::Constant(sigma0),
            gamma0: MarkCoefficient::Constant(gamma0),
            x0,
            horizon,
        }
    }

    pub fn validate(&self, insider: &InsiderSpec) -> Result<(), MarketError> {
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(MarketError::InvalidSpec(format!("initial wealth must be positive, got {}", self.x0)));
        }
        if !(self.horizon > 0.0 && self.horizon < insider.horizon()) {
            return Err(MarketError::InvalidSpec(format!(
                "trading horizon {} must lie in (0, {})",
                self.horizon,
                insider.horizon()
            )));
        }
        Ok(())
    }

    /// True when the market has a jump part driven by the insider's marks.
    pub fn has_jumps(&self, insider: &InsiderSpec) -> bool {
        !self.gamma0.is_zero() && insider.total_intensity() > 0.0
    }
}

/// Uniform grid `0 = t₀ < … < t_N = T₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self { horizon, steps }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    /// Index of `t` on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize, MarketError> {
        let k = t / self.dt();
        let i = k.round();
        if (k - i).abs() > 1e-9 * k.max(1.0) || i < 0.0 || i as usize > self.steps {
            return Err(MarketError::GridMismatch { horizon: t, dt: self.dt() });
        }
        Ok(i as usize)
    }
}

/// Jump event of the driving Poisson random measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    /// Index into the insider's marks.
    pub mark: usize,
    pub zeta: f64,
    /// Grid cell `(t_i, t_{i+1}]` containing the jump.
    pub step: usize,
}

/// One simulated scenario on `[0, T₀]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub db: Vec<f64>,
    /// Jumps in increasing time order.
    pub jumps: Vec<Jump>,
    pub realized_y: f64,
    /// `B(t_i)`, length `N + 1`.
    pub b: Vec<f64>,
    /// `∫₀^{t_i} β dB`, length `N + 1`.
    pub y_brownian: Vec<f64>,
    /// `∫₀^{t_i}∫ ψ Ñ(ds,dζ)`, length `N + 1`.
    pub y_jump: Vec<f64>,
    /// `Ñ_k(t_i) = N_k(t_i) − ν_k t_i` per mark.
    pub n_tilde: Vec<Vec<f64>>,
}

impl PathBundle {
    pub fn observed(&self, i: usize) -> ObservedState {
        ObservedState { brownian: self.y_brownian[i], jump: self.y_jump[i] }
    }

    pub fn y_at(&self, i: usize) -> f64 {
        self.y_brownian[i] + self.y_jump[i]
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// The same scenario on a grid `factor` times coarser.
    pub fn coarsen(&self, insider: &InsiderSpec, factor: usize) -> PathBundle {
        assert!(factor >= 1 && self.grid.steps % factor == 0, "factor must divide the step count");
        let grid = TimeGrid::new(self.grid.horizon, self.grid.steps / factor);
        let db: Vec<f64> = self.db.chunks(factor).map(|c| c.iter().sum()).collect();
        let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        let mut y_brownian = vec![0.0; grid.steps + 1];
        for i in 0..grid.steps {
            y_brownian[i + 1] = y_brownian[i] + insider.beta().value_at(grid.time(i)) * db[i];
        }
        let y_jump = pick(&self.y_jump);
        let jumps = self.jumps.iter().map(|j| Jump { step: j.step / factor, ..*j }).collect();
        PathBundle {
            grid,
            realized_y: y_brownian[grid.steps] + y_jump[grid.steps],
            b: pick(&self.b),
            db,
            jumps,
            y_brownian,
            y_jump,
            n_tilde: self.n_tilde.iter().map(|v| pick(v)).collect(),
        }
    }

    /// Jumps in the grid cell `(t_i, t_{i+1}]`.
    pub fn jumps_in_step(&self, i: usize) -> &[Jump] {
        let lo = self.jumps.partition_point(|j| j.step < i);
        let hi = self.jumps.partition_point(|j| j.step <= i);
        &self.jumps[lo..hi]
    }
}

/// Generator for the `index`-th path of a seeded run.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates one path; Brownian increments and jumps use disjoint parts of
/// the path's stream, so the two drivers are independent.
pub fn simulate_path(insider: &InsiderSpec, grid: TimeGrid, seed: u64, index: u64) -> PathBundle {
    let mut rng = path_rng(seed, index);
    let n = grid.steps;
    let dt = grid.dt();
    let sd = dt.sqrt();
    let db: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();

    let marks = insider.marks();
    let mut jumps = Vec::new();
    for (k, mark) in marks.iter().enumerate() {
        let mean = mark.intensity * grid.horizon;
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean).expect("positive Poisson mean").sample(&mut rng) as usize;
        for _ in 0..count {
            let time: f64 = grid.horizon * (1.0 - rng.gen::<f64>());
            let step = ((time / dt).ceil() as usize).clamp(1, n) - 1;
            jumps.push(Jump { time, mark: k, zeta: mark.zeta, step });
        }
    }
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut b = vec![0.0; n + 1];
    let mut y_brownian = vec![0.0; n + 1];
    for i in 0..n {
        b[i + 1] = b[i] + db[i];
        y_brownian[i + 1] = y_brownian[i] + insider.beta().value_at(grid.time(i)) * db[i];
    }

    let mut y_jump = vec![0.0; n + 1];
    let mut n_tilde = vec![vec![0.0; n + 1]; marks.len()];
    let mut counts = vec![0usize; marks.len()];
    let mut raw_jump = 0.0;
    let mut cursor = 0;
    for i in 1..=n {
        let t = grid.time(i);
        while cursor < jumps.len() && jumps[cursor].step < i {
            let j = jumps[cursor];
            raw_jump += insider.jump_size(j.time, j.mark);
            counts[j.mark] += 1;
            cursor += 1;
        }
        let compensator: f64 = (0..marks.len())
            .map(|k| marks[k].intensity * insider.psi(k).map_or(0.0, |p| p.integral(0.0, t)))
            .sum();
        y_jump[i] = raw_jump - compensator;
        for k in 0..marks.len() {
            n_tilde[k][i] = counts[k] as f64 - marks[k].intensity * t;
        }
    }
    let realized_y = y_brownian[n] + y_jump[n];
    PathBundle { grid, db, jumps, realized_y, b, y_brownian, y_jump, n_tilde }
}

fn check_grid(insider: &InsiderSpec, market: &MarketSpec, grid: TimeGrid) -> Result<(), MarketError> {
    market.validate(insider)?;
    if grid.steps == 0 || grid.horizon != insider.horizon() {
        return Err(MarketError::InvalidSpec("grid must cover [0, T₀] with at least one step".into()));
    }
    grid.index_of(market.horizon).map(|_| ())
}

/// `n_paths` paths on a uniform grid of `steps` cells over `[0, T₀]`.
pub fn simulate_paths(
    insider: &InsiderSpec,
    market: &MarketSpec,
    n_paths: usize,
    seed: u64,
    steps: usize,
) -> Result<Vec<PathBundle>, MarketError> {
    map_paths(insider, market, n_paths, seed, steps, |_, p| Ok(p.clone()))
}

/// Simulates paths in parallel and maps each through `f` without keeping it.
/// Results are in path order and independent of the thread count.
pub fn map_paths<R, F>(
    insider: &InsiderSpec,
    market: &MarketSpec,
    n_paths: usize,
    seed: u64,
    steps: usize,
    f: F,
) -> Result<Vec<R>, MarketError>
where
    R: Send,
    F: Fn(usize, &PathBundle) -> Result<R, MarketError> + Sync,
{
    if n_paths == 0 {
        return Err(MarketError::InvalidSpec("at least one path is required".into()));
    }
    let grid = TimeGrid::new(insider.horizon(), steps);
    check_grid(insider, market, grid)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| f(i, &simulate_path(insider, grid, seed, i as u64)))
        .collect()
}

/// Wealth `x(t_i, y)` for `t_i ≤ T` under `policy(path, i, y)`, evaluated at
/// left grid points.
pub fn wealth_exact<P>(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    policy: P,
    y: f64,
) -> Result<Vec<f64>, MarketError>
where
    P: Fn(&PathBundle, usize, f64) -> Result<f64, MarketError>,
{
    let grid = path.grid;
    let last = grid.index_of(market.horizon)?;
    let dt = grid.dt();
    let marks = insider.marks();
    let jumps = market.has_jumps(insider);
    let mut out = Vec::with_capacity(last + 1);
    let mut log_x = market.x0.ln();
    out.push(market.x0);
    for i in 0..last {
        let t = grid.time(i);
        let pi = policy(path, i, y)?;
        let b0 = market.b0.eval(t, y);
        let sigma = market.sigma0.eval(t, y);
        let mut drift = pi * b0 - 0.5 * pi * pi * sigma * sigma;
        if jumps {
            for mark in marks {
                let gamma = market.gamma0.eval(t, y, mark.zeta);
                check_margin(t, mark.zeta, 1.0 + pi * gamma)?;
                drift -= mark.intensity * pi * gamma;
            }
        }
        log_x += drift * dt + pi * sigma * path.db[i];
        if jumps {
            for j in path.jumps_in_step(i) {
                let gamma = market.gamma0.eval(t, y, j.zeta);
                log_x += (1.0 + pi * gamma).ln();
            }
        }
        let x = log_x.exp();
        if !x.is_finite() || x <= 0.0 {
            return Err(MarketError::NonFinite { t: grid.time(i + 1) });
        }
        out.push(x);
    }
    Ok(out)
}

fn check_margin(t: f64, zeta: f64, margin: f64) -> Result<(), MarketError> {
    if margin > ADMISSIBILITY_FLOOR {
        Ok(())
    } else {
        Err(MarketError::AdmissibilityViolation { t, zeta, margin })
    }
}

/// Terminal wealth `X(T) = x(T, Y)` of the insider.
pub fn insider_wealth<P>(
    path: &PathBundle,
    insider: &InsiderSpec,
    market: &MarketSpec,
    policy: P,
) -> Result<f64, MarketError>
where
    P: Fn(&PathBundle, usize, f64) -> Result<f64, MarketError>,
{
    let traj = wealth_exact(path, insider, market, policy, path.realized_y)?;
    Ok(*traj.last().expect("trajectory has the initial point"))
}

/// `Y(T₀)` recomputed directly from increments and jumps.
pub fn recompute_realized_y(path: &PathBundle, insider: &InsiderSpec) -> f64 {
    let grid = path.grid;
    let brownian: f64 = (0..grid.steps).map(|i| insider.beta().value_at(grid.time(i)) * path.db[i]).sum();
    let jumps: f64 = path.jumps.iter().map(|j| insider.jump_size(j.time, j.mark)).sum();
    let compensator: f64 = insider
        .marks()
        .iter()
        .enumerate()
        .map(|(k, m)| m.intensity * insider.psi(k).map_or(0.0, |p| p.integral(0.0, grid.horizon)))
        .sum();
    brownian + jumps - compensator
}

/// Convenience for Brownian-Poisson insiders: `(B(t_i), Ñ(t_i))`.
pub fn bp_state(path: &PathBundle, insider: &InsiderSpec, i: usize) -> Option<(f64, f64)> {
    (insider.kind() == InsiderKind::BrownianPoisson).then(|| (path.b[i], path.n_tilde[0][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::StepFunction;

    fn brownian_insider() -> InsiderSpec {
        InsiderSpec::gaussian(StepFunction::constant(1.0, 1.0)).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let insider = InsiderSpec::brownian_poisson(1.0, 2.0, 1.0).unwrap();
        let market = MarketSpec::constant(0.1, 0.2, 0.1, 1.0, 0.5);
        let a = simulate_paths(&insider, &market, 3, 42, 64).unwrap();
        let b = simulate_paths(&insider, &market, 3, 42, 64).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].db, a[1].db);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let market = MarketSpec::constant(0.1, 0.2, 0.0, 1.0, 0.3);
        let err = simulate_paths(&brownian_insider(), &market, 1, 1, 4).unwrap_err();
        assert!(matches!(err, MarketError::GridMismatch { .. }));
    }

    #[test]
    fn zero_policy_keeps_initial_wealth() {
        let insider = InsiderSpec::brownian_poisson(1.0, 2.0, 1.0).unwrap();
        let market = MarketSpec::constant(0.1, 0.2, 0.3, 2.5, 0.5);
        let path = &simulate_paths(&insider, &market, 1, 7, 64).unwrap()[0];
        let traj = wealth_exact(path, &insider, &market, |_, _, _| Ok(0.0), 0.3).unwrap();
        assert!(traj.iter().all(|&x| x == 2.5));
    }

    #[test]
    fn deterministic_growth() {
        let market = MarketSpec::constant(0.07, 0.0, 0.0, 1.5, 0.5);
        let insider = brownian_insider();
        let path = &simulate_paths(&insider, &market, 1, 3, 128).unwrap()[0];
        let traj = wealth_exact(path, &insider, &market, |_, _, _| Ok(2.0), 0.0).unwrap();
        let exact = 1.5 * (2.0f64 * 0.07 * 0.5).exp();
        assert!((traj.last().unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn admissibility_violation_names_the_mark() {
        let insider = InsiderSpec::brownian_poisson(1.0, 1.0, 1.0).unwrap();
        let market = MarketSpec::constant(0.1, 0.2, -0.5, 1.0, 0.5);
        let path = &simulate_paths(&insider, &market, 1, 3, 16).unwrap()[0];
        let err = wealth_exact(path, &insider, &market, |_, _, _| Ok(2.0), 0.0).unwrap_err();
        assert_eq!(err, MarketError::AdmissibilityViolation { t: 0.0, zeta: 1.0, margin: 0.0 });
    }

    #[test]
    fn jumps_land_in_their_cells() {
        let insider = InsiderSpec::brownian_poisson(1.0, 50.0, 1.0).unwrap();
        let market = MarketSpec::constant(0.0, 1.0, 0.0, 1.0, 0.5);
        let path = &simulate_paths(&insider, &market, 1, 9, 32).unwrap()[0];
        let dt = path.grid.dt();
        for j in &path.jumps {
            assert!(j.time > j.step as f64 * dt - 1e-15 && j.time <= (j.step + 1) as f64 * dt + 1e-15);
        }
        let total: usize = (0..32).map(|i| path.jumps_in_step(i).len()).sum();
        assert_eq!(total, path.jump_count());
        assert_eq!(path.n_tilde[0][32], path.jump_count() as f64 - 50.0);
    }
}
