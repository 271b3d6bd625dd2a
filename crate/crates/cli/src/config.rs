//! Experiment configuration.
//!
//! A TOML file with a mandatory `schema_version`; every other key is
//! optional and falls back to [`defaults`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use insider_core::adjoint::UtilitySpec;
use insider_core::donsker::{InsiderSpec, Mark};
use insider_core::market::MarketSpec;
use insider_core::quadrature::QuadratureConfig;
use insider_core::step::StepFunction;
use serde::Deserialize;

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// Every default value used when a key is absent.
pub mod defaults {
    pub const N_PATHS: usize = 10_000;
    pub const STEPS: usize = 2048;
    pub const OUTPUT_DIR: &str = "out";

    pub const INSIDER_KIND: &str = "gaussian";
    pub const INSIDER_HORIZON: f64 = 1.0;
    pub const BETA: f64 = 1.0;
    pub const LAMBDA: f64 = 1.0;

    pub const B0: f64 = 0.1;
    pub const SIGMA0: f64 = 0.2;
    pub const GAMMA0: f64 = 0.0;
    pub const X0: f64 = 1.0;
    pub const MARKET_HORIZON: f64 = 0.5;

    pub const UTILITY: &str = "log";
    pub const RHO: f64 = 0.5;

    pub const DENSITY_Y_POINTS: usize = 401;
    pub const DENSITY_Y_WIDTH_SD: f64 = 8.0;

    pub const POLICY_Y_POINTS: usize = 41;
    pub const POLICY_Y_WIDTH_SD: f64 = 3.0;

    pub const SIMULATE_INSIDER_POLICY: &str = "optimal";

    pub const FOC_B0: f64 = 0.05;
    pub const FOC_SIGMA0: f64 = 0.2;
    pub const FOC_PHI: f64 = 0.0;
    pub const FOC_GAMMA: f64 = 0.3;
    pub const FOC_NU: f64 = 0.1;
    pub const FOC_PSI: f64 = 0.0;

    pub const SOLVE_C_Y: [f64; 3] = [-1.0, 0.0, 1.0];
    pub const SOLVE_C_INFORMATION: &str = "insider";

    pub const VERIFY_PATHS: usize = 20_000;
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: Option<u32>,
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub steps: Option<usize>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub insider: InsiderSection,
    #[serde(default)]
    pub market: MarketSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub foc: FocSection,
    #[serde(default)]
    pub solve_c: SolveCSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InsiderSection {
    pub kind: Option<String>,
    pub horizon: Option<f64>,
    /// Cell values of `β` on equal cells of `[0, T₀]`.
    pub beta: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub marks: Option<Vec<MarkSection>>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct MarkSection {
    pub zeta: f64,
    pub intensity: f64,
    /// Cell values of `ψ(·, ζ)`.
    pub psi: Vec<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub b0: Option<f64>,
    pub sigma0: Option<f64>,
    pub gamma0: Option<f64>,
    pub x0: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    pub kind: Option<String>,
    pub rho: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_panels: Option<usize>,
    pub truncation_eps: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub times: Option<Vec<f64>>,
    pub y_points: Option<usize>,
    pub y_width_sd: Option<f64>,
    pub brownian: Option<f64>,
    pub jump: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub times: Option<Vec<f64>>,
    pub y_points: Option<usize>,
    pub y_width_sd: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub insider_policy: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FocSection {
    pub b0: Option<f64>,
    pub sigma0: Option<f64>,
    pub phi: Option<f64>,
    pub jumps: Option<Vec<FocJump>>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct FocJump {
    pub gamma: f64,
    pub nu: f64,
    pub psi: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolveCSection {
    pub y: Option<Vec<f64>>,
    pub information: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub paths: Option<usize>,
    /// Extra density evaluation times; a time too close to `T₀` makes the
    /// remaining variance degenerate and fails the suite.
    pub density_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsiderPolicy {
    Optimal,
    Merton,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub steps: usize,
    pub output_dir: PathBuf,
    pub insider: InsiderSpec,
    pub market: MarketSpec,
    pub utility: UtilitySpec,
    pub quadrature: QuadratureConfig,
    pub density_times: Vec<f64>,
    pub density_y: Vec<f64>,
    pub density_brownian: f64,
    pub density_jump: f64,
    pub policy_times: Vec<f64>,
    pub policy_y: Vec<f64>,
    pub insider_policy: InsiderPolicy,
    pub foc_b0: f64,
    pub foc_sigma0: f64,
    pub foc_phi: f64,
    pub foc_jumps: Vec<FocJump>,
    pub solve_c_y: Vec<f64>,
    pub solve_c_informed: bool,
    pub verify_paths: usize,
    pub verify_density_times: Vec<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n_paths: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub fn parse(text: &str) -> Result<RawConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    match raw.schema_version {
        Some(SCHEMA_VERSION) => Ok(raw),
        Some(v) => Err(config_err(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
        None => Err(config_err("missing schema_version")),
    }
}

pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    let raw = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            parse(&text)?
        }
        None => RawConfig { schema_version: Some(SCHEMA_VERSION), ..Default::default() },
    };
    resolve(raw, overrides)
}

/// Resolves configuration text as if read from a file.
pub fn load_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    resolve(parse(text)?, overrides)
}

fn insider_spec(s: &InsiderSection) -> Result<InsiderSpec, HarnessError> {
    let horizon = s.horizon.unwrap_or(defaults::INSIDER_HORIZON);
    let beta = StepFunction::from_values(
        s.beta.clone().filter(|b| !b.is_empty()).unwrap_or_else(|| vec![defaults::BETA]),
        horizon,
    );
    let kind = s.kind.as_deref().unwrap_or(defaults::INSIDER_KIND);
    let spec = match kind {
        "gaussian" => InsiderSpec::gaussian(beta),
        "brownian_poisson" => {
            if !beta.is_constant() {
                return Err(config_err("brownian_poisson insider needs a constant beta"));
            }
            InsiderSpec::brownian_poisson(beta.values()[0], s.lambda.unwrap_or(defaults::LAMBDA), horizon)
        }
        "general" => {
            let marks = s.marks.clone().unwrap_or_default();
            InsiderSpec::general(
                beta,
                marks.iter().map(|m| Mark { zeta: m.zeta, intensity: m.intensity }).collect(),
                marks.iter().map(|m| StepFunction::from_values(m.psi.clone(), horizon)).collect(),
            )
        }
        other => return Err(config_err(format!("unknown insider kind {other:?}"))),
    };
    spec.map_err(|e| config_err(e.to_string()))
}

fn default_times(horizon: f64) -> Vec<f64> {
    vec![0.0, 0.5 * horizon, horizon]
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    let seed = overrides
        .seed
        .or(raw.seed)
        .ok_or_else(|| config_err("a seed is required (config `seed` or --seed)"))?;
    let insider = insider_spec(&raw.insider)?;
    let m = &raw.market;
    let market = MarketSpec::constant(
        m.b0.unwrap_or(defaults::B0),
        m.sigma0.unwrap_or(defaults::SIGMA0),
        m.gamma0.unwrap_or(defaults::GAMMA0),
        m.x0.unwrap_or(defaults::X0),
        m.horizon.unwrap_or(defaults::MARKET_HORIZON),
    );
    market.validate(&insider).map_err(|e| config_err(e.to_string()))?;

    let utility = match raw.utility.kind.as_deref().unwrap_or(defaults::UTILITY) {
        "log" => UtilitySpec::Log,
        "power" => UtilitySpec::Power(raw.utility.rho.unwrap_or(defaults::RHO)),
        other => return Err(config_err(format!("unknown utility kind {other:?}"))),
    };
    utility.validate().map_err(|e| config_err(e.to_string()))?;

    let base = QuadratureConfig::default();
    let q = &raw.quadrature;
    let quadrature = QuadratureConfig {
        rel_tol: q.rel_tol.unwrap_or(base.rel_tol),
        abs_tol: q.abs_tol.unwrap_or(base.abs_tol),
        max_panels: q.max_panels.unwrap_or(base.max_panels),
        truncation_eps: q.truncation_eps.unwrap_or(base.truncation_eps),
    };
    quadrature.validate().map_err(|e| config_err(e.to_string()))?;

    let steps = raw.steps.unwrap_or(defaults::STEPS);
    if steps == 0 {
        return Err(config_err("steps must be positive"));
    }
    let n_paths = overrides.n_paths.or(raw.n_paths).unwrap_or(defaults::N_PATHS);
    if n_paths == 0 {
        return Err(config_err("n_paths must be positive"));
    }
    let t_trade = market.horizon;
    let d = &raw.density;
    let density_times = d.times.clone().unwrap_or_else(|| default_times(t_trade));
    let density_y = insider.y_grid(
        d.y_points.unwrap_or(defaults::DENSITY_Y_POINTS),
        d.y_width_sd.unwrap_or(defaults::DENSITY_Y_WIDTH_SD),
    );
    let p = &raw.policy;
    let policy_y = insider.y_grid(
        p.y_points.unwrap_or(defaults::POLICY_Y_POINTS),
        p.y_width_sd.unwrap_or(defaults::POLICY_Y_WIDTH_SD),
    );
    let insider_policy = match raw.simulate.insider_policy.as_deref().unwrap_or(defaults::SIMULATE_INSIDER_POLICY) {
        "optimal" => InsiderPolicy::Optimal,
        "merton" => InsiderPolicy::Merton,
        other => return Err(config_err(format!("unknown simulate.insider_policy {other:?}"))),
    };
    let f = &raw.foc;
    let solve_c_informed = match raw.solve_c.information.as_deref().unwrap_or(defaults::SOLVE_C_INFORMATION) {
        "insider" => true,
        "uninformed" => false,
        other => return Err(config_err(format!("unknown solve_c.information {other:?}"))),
    };
    Ok(ExperimentConfig {
        seed,
        n_paths,
        steps,
        output_dir: overrides
            .output_dir
            .clone()
            .or(raw.output_dir)
            .unwrap_or_else(|| PathBuf::from(defaults::OUTPUT_DIR)),
        density_times,
        density_y,
        density_brownian: d.brownian.unwrap_or(0.0),
        density_jump: d.jump.unwrap_or(0.0),
        policy_times: p.times.clone().unwrap_or_else(|| vec![0.0, 0.5 * t_trade]),
        policy_y,
        insider_policy,
        foc_b0: f.b0.unwrap_or(defaults::FOC_B0),
        foc_sigma0: f.sigma0.unwrap_or(defaults::FOC_SIGMA0),
        foc_phi: f.phi.unwrap_or(defaults::FOC_PHI),
        foc_jumps: f.jumps.clone().unwrap_or_else(|| {
            vec![FocJump { gamma: defaults::FOC_GAMMA, nu: defaults::FOC_NU, psi: defaults::FOC_PSI }]
        }),
        solve_c_y: raw.solve_c.y.clone().unwrap_or_else(|| defaults::SOLVE_C_Y.to_vec()),
        solve_c_informed,
        verify_paths: overrides.n_paths.or(raw.verify.paths).unwrap_or(defaults::VERIFY_PATHS),
        verify_density_times: raw.verify.density_times.clone().unwrap_or_default(),
        insider,
        market,
        utility,
        quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("schema_version = 1\nsed = 3\n").unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        let err = parse("schema_version = 1\n[market]\nsigma = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("sigma"));
    }

    #[test]
    fn schema_version_is_mandatory() {
        assert!(parse("seed = 1\n").is_err());
        assert!(parse("schema_version = 2\nseed = 1\n").is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let raw = parse("schema_version = 1\n").unwrap();
        assert!(resolve(raw, &Overrides::default()).is_err());
        let raw = parse("schema_version = 1\n").unwrap();
        let cfg = resolve(raw, &Overrides { seed: Some(5), ..Default::default() }).unwrap();
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = resolve(parse("schema_version = 1\nseed = 9\n").unwrap(), &Overrides::default()).unwrap();
        assert_eq!(cfg.steps, defaults::STEPS);
        assert_eq!(cfg.density_times, vec![0.0, 0.25, 0.5]);
        assert_eq!(cfg.density_y.len(), defaults::DENSITY_Y_POINTS);
    }

    #[test]
    fn general_insider_from_marks() {
        let text = r#"
schema_version = 1
seed = 1
[insider]
kind = "general"
beta = [1.0, 0.5]
marks = [{ zeta = 1.0, intensity = 0.3, psi = [1.0] }, { zeta = -0.5, intensity = 0.2, psi = [-0.5] }]
"#;
        let cfg = resolve(parse(text).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(cfg.insider.marks().len(), 2);
    }
}
