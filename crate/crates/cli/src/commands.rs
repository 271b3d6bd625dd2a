//! Experiment runners behind the CLI subcommands.

use std::path::PathBuf;

use insider_core::adjoint::{self, Information, UtilitySpec};
use insider_core::donsker::{self, DensityState, InsiderSpec, ObservedState};
use insider_core::market::{insider_wealth, map_paths, MarketError, PathBundle};
use insider_core::portfolio::{self, JumpTerm, LocalMarket, PolicyResult, PolicyStatus};
use serde::Serialize;

use crate::config::{ExperimentConfig, InsiderPolicy};
use crate::output::{finite, fmt_f64, fmt_opt, write_csv, write_json, Csv};
use crate::HarnessError;

fn numerical(context: impl std::fmt::Display, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(format!("{context}: {e}"))
}

fn state_at(cfg: &ExperimentConfig, t: f64) -> ObservedState {
    if t == 0.0 {
        ObservedState::default()
    } else {
        ObservedState { brownian: cfg.density_brownian, jump: cfg.density_jump }
    }
}

fn psi_columns(insider: &InsiderSpec) -> Vec<String> {
    (0..insider.marks().len()).map(|k| format!("psi_{k}")).collect()
}

#[derive(Debug, Serialize)]
pub struct MarkInfo {
    pub column: String,
    pub zeta: f64,
    pub intensity: f64,
}

fn mark_info(insider: &InsiderSpec) -> Vec<MarkInfo> {
    insider
        .marks()
        .iter()
        .enumerate()
        .map(|(k, m)| MarkInfo { column: format!("psi_{k}"), zeta: m.zeta, intensity: m.intensity })
        .collect()
}

/// Density rows `(t, y, M, Φ, Ψ_k…, imaginary residual)` over the configured grid.
pub fn density_table(cfg: &ExperimentConfig) -> Result<(Csv, Vec<(f64, f64)>), HarnessError> {
    let mut header = vec!["t".to_string(), "y".into(), "m".into(), "phi".into()];
    header.extend(psi_columns(&cfg.insider));
    header.push("imag_residual".into());
    let mut csv = Csv::new(header);
    let dy = cfg.density_y[1] - cfg.density_y[0];
    let mut mass = Vec::new();
    for &t in &cfg.density_times {
        let state = state_at(cfg, t);
        let mut total = 0.0;
        for &y in &cfg.density_y {
            let d = donsker::density_state(&cfg.insider, t, y, state, &cfg.quadrature)
                .map_err(|e| numerical(format_args!("density at t={t}, y={y}"), e))?;
            total += d.m * dy;
            let mut row = vec![fmt_f64(t), fmt_f64(y), fmt_f64(d.m), fmt_opt(d.phi)];
            row.extend(d.psi_ratio.iter().map(|(_, v)| fmt_opt(*v)));
            row.push(fmt_f64(d.imag_residual));
            csv.push(row);
        }
        mass.push((t, total));
    }
    Ok((csv, mass))
}

#[derive(Debug, Serialize)]
struct DensitySummary {
    rows: usize,
    marks: Vec<MarkInfo>,
    mass_by_time: Vec<TimeMass>,
}

#[derive(Debug, Serialize)]
struct TimeMass {
    t: f64,
    mass: f64,
}

pub fn run_density(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let (csv, mass) = density_table(cfg)?;
    let summary = DensitySummary {
        rows: csv.len(),
        marks: mark_info(&cfg.insider),
        mass_by_time: mass.into_iter().map(|(t, mass)| TimeMass { t, mass }).collect(),
    };
    Ok(vec![
        write_csv(&cfg.output_dir, "density.csv", &csv)?,
        write_json(&cfg.output_dir, "density_summary.json", &summary)?,
    ])
}

fn status_name(s: PolicyStatus) -> &'static str {
    match s {
        PolicyStatus::ClosedForm => "closed_form",
        PolicyStatus::Converged => "converged",
    }
}

fn policy_at(cfg: &ExperimentConfig, t: f64, y: f64, d: &DensityState) -> Result<PolicyResult, String> {
    let local = LocalMarket::at(&cfg.market, &cfg.insider, t, y);
    let phi = d.phi.ok_or("density below floor")?;
    let psi: Vec<f64> = d
        .psi_ratio
        .iter()
        .map(|(_, v)| v.ok_or("density below floor"))
        .collect::<Result<_, _>>()?;
    portfolio::log_optimal_from_ratios(&local, phi, &psi).map_err(|e| e.to_string())
}

pub fn run_policy(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let mut csv = Csv::new([
        "t",
        "y",
        "m",
        "phi",
        "pi",
        "foc_residual",
        "admissibility_margin",
        "hamiltonian_grad",
        "status",
    ]);
    for &t in &cfg.policy_times {
        let state = state_at(cfg, t);
        for &y in &cfg.policy_y {
            let d = donsker::density_state(&cfg.insider, t, y, state, &cfg.quadrature)
                .map_err(|e| numerical(format_args!("policy at t={t}, y={y}"), e))?;
            let mut row = vec![fmt_f64(t), fmt_f64(y), fmt_f64(d.m), fmt_opt(d.phi)];
            match policy_at(cfg, t, y, &d) {
                Ok(p) => row.extend([
                    fmt_f64(p.pi),
                    fmt_f64(p.foc_residual),
                    fmt_f64(p.admissibility_margin),
                    fmt_opt(p.hamiltonian_grad),
                    status_name(p.status).to_string(),
                ]),
                Err(_) => row.extend(["", "", "", "", "no_solution"].map(String::from)),
            }
            csv.push(row);
        }
    }
    Ok(vec![write_csv(&cfg.output_dir, "policy.csv", &csv)?])
}

#[derive(Debug, Clone, Copy)]
pub struct PathOutcome {
    pub realized_y: f64,
    pub wealth_insider: f64,
    pub wealth_merton: f64,
    pub utility_insider: f64,
    pub utility_merton: f64,
}

fn policy_error(e: impl std::fmt::Display) -> MarketError {
    MarketError::Policy(e.to_string())
}

/// Terminal wealth of both arms on one path.
pub fn simulate_one(cfg: &ExperimentConfig, path: &PathBundle) -> Result<PathOutcome, MarketError> {
    let (insider, market) = (&cfg.insider, &cfg.market);
    let merton = |p: &PathBundle, i: usize, y: f64| {
        portfolio::log_optimal_uninformed(insider, market, p.grid.time(i), y)
            .map(|r| r.pi)
            .map_err(policy_error)
    };
    let wealth_merton = insider_wealth(path, insider, market, merton)?;
    let wealth_insider = match cfg.insider_policy {
        InsiderPolicy::Merton => wealth_merton,
        InsiderPolicy::Optimal => insider_wealth(path, insider, market, |p: &PathBundle, i: usize, y: f64| {
            portfolio::log_optimal_policy(insider, market, p.grid.time(i), y, p.observed(i), &cfg.quadrature)
                .map(|r| r.pi)
                .map_err(policy_error)
        })?,
    };
    Ok(PathOutcome {
        realized_y: path.realized_y,
        wealth_insider,
        wealth_merton,
        utility_insider: cfg.utility.utility(wealth_insider),
        utility_merton: cfg.utility.utility(wealth_merton),
    })
}

pub fn simulate_outcomes(cfg: &ExperimentConfig) -> Result<Vec<PathOutcome>, HarnessError> {
    map_paths(&cfg.insider, &cfg.market, cfg.n_paths, cfg.seed, cfg.steps, |i, path| {
        simulate_one(cfg, path).map_err(|e| MarketError::Policy(format!("path {i}: {e}")))
    })
    .map_err(|e| numerical("simulate", e))
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub n_paths: usize,
    pub steps: usize,
    pub mean_utility_insider: f64,
    pub se_utility_insider: Option<f64>,
    pub mean_utility_merton: f64,
    pub se_utility_merton: Option<f64>,
    pub advantage: f64,
    pub advantage_se: Option<f64>,
}

pub fn summarize(cfg: &ExperimentConfig, outcomes: &[PathOutcome]) -> SimulateSummary {
    let ui: Vec<f64> = outcomes.iter().map(|o| o.utility_insider).collect();
    let um: Vec<f64> = outcomes.iter().map(|o| o.utility_merton).collect();
    let diff: Vec<f64> = outcomes.iter().map(|o| o.utility_insider - o.utility_merton).collect();
    let (mi, si) = adjoint::mean_se(&ui);
    let (mm, sm) = adjoint::mean_se(&um);
    let (md, sd) = adjoint::mean_se(&diff);
    SimulateSummary {
        seed: cfg.seed,
        n_paths: outcomes.len(),
        steps: cfg.steps,
        mean_utility_insider: mi,
        se_utility_insider: finite(si),
        mean_utility_merton: mm,
        se_utility_merton: finite(sm),
        advantage: md,
        advantage_se: finite(sd),
    }
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let outcomes = simulate_outcomes(cfg)?;
    let mut csv = Csv::new([
        "path",
        "realized_y",
        "wealth_insider",
        "wealth_merton",
        "utility_insider",
        "utility_merton",
    ]);
    for (i, o) in outcomes.iter().enumerate() {
        csv.push(vec![
            i.to_string(),
            fmt_f64(o.realized_y),
            fmt_f64(o.wealth_insider),
            fmt_f64(o.wealth_merton),
            fmt_f64(o.utility_insider),
            fmt_f64(o.utility_merton),
        ]);
    }
    let summary = summarize(cfg, &outcomes);
    Ok(vec![
        write_csv(&cfg.output_dir, "simulate.csv", &csv)?,
        write_json(&cfg.output_dir, "simulate_summary.json", &summary)?,
    ])
}

#[derive(Debug, Serialize)]
struct FocReport {
    b0: f64,
    sigma0: f64,
    phi: f64,
    pi: f64,
    foc_residual: f64,
    admissibility_margin: f64,
    hamiltonian_grad: Option<f64>,
    status: &'static str,
    bracket_lower: Option<f64>,
    bracket_upper: Option<f64>,
}

pub fn run_foc(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let jumps: Vec<JumpTerm> = cfg.foc_jumps.iter().map(|j| JumpTerm { gamma: j.gamma, nu: j.nu, psi: j.psi }).collect();
    let r = portfolio::solve_foc_levy(cfg.foc_b0, cfg.foc_sigma0, cfg.foc_phi, &jumps)
        .map_err(|e| numerical("foc", e))?;
    let (lo, hi) = portfolio::admissible_bracket(&jumps);
    let report = FocReport {
        b0: cfg.foc_b0,
        sigma0: cfg.foc_sigma0,
        phi: cfg.foc_phi,
        pi: r.pi,
        foc_residual: r.foc_residual,
        admissibility_margin: r.admissibility_margin,
        hamiltonian_grad: r.hamiltonian_grad,
        status: status_name(r.status),
        bracket_lower: finite(lo),
        bracket_upper: finite(hi),
    };
    Ok(vec![write_json(&cfg.output_dir, "foc.json", &report)?])
}

#[derive(Debug, Serialize)]
struct SolveCRow {
    y: f64,
    c: f64,
    budget: f64,
    budget_se: Option<f64>,
    iterations: usize,
}

#[derive(Debug, Serialize)]
struct SolveCReport {
    seed: u64,
    n_paths: usize,
    utility: String,
    informed: bool,
    rows: Vec<SolveCRow>,
}

pub fn run_solve_c(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let info = if cfg.solve_c_informed { Information::Insider(cfg.quadrature) } else { Information::Uninformed };
    let mut csv = Csv::new(["y", "c", "budget", "budget_se", "iterations"]);
    let mut rows = Vec::new();
    for &y in &cfg.solve_c_y {
        let sol = adjoint::solve_c(&cfg.insider, &cfg.market, &cfg.utility, y, &info, cfg.n_paths, cfg.seed, cfg.steps)
            .map_err(|e| numerical(format_args!("solve-c at y={y}"), e))?;
        csv.push(vec![
            fmt_f64(y),
            fmt_f64(sol.c),
            fmt_f64(sol.budget),
            fmt_f64(sol.budget_se),
            sol.iterations.to_string(),
        ]);
        rows.push(SolveCRow { y, c: sol.c, budget: sol.budget, budget_se: finite(sol.budget_se), iterations: sol.iterations });
    }
    let utility = match cfg.utility {
        UtilitySpec::Log => "log".to_string(),
        UtilitySpec::Power(rho) => format!("power({rho})"),
    };
    let report = SolveCReport { seed: cfg.seed, n_paths: cfg.n_paths, utility, informed: cfg.solve_c_informed, rows };
    Ok(vec![
        write_csv(&cfg.output_dir, "solve_c.csv", &csv)?,
        write_json(&cfg.output_dir, "solve_c.json", &report)?,
    ])
}
