//! End-to-end acceptance checks, one PASS/FAIL line each.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::process::Command;
use std::time::Instant;

use insider_cli::commands::{simulate_outcomes, summarize};
use insider_cli::config::{self, Overrides};
use insider_core::adjoint::{self, Information, UtilitySpec};
use insider_core::donsker::{
    bp_cond_density, gaussian_cond_density, gaussian_phi, general_cond_density, InsiderSpec, Mark, ObservedState,
};
use insider_core::market::{insider_wealth, map_paths, MarketError, MarketSpec, PathBundle};
use insider_core::portfolio::{
    log_pi_brownian, log_utility_adjoint, solve_foc_bp, solve_foc_levy, solve_foc_poisson_pure, JumpTerm,
};
use insider_core::quadrature::QuadratureConfig;
use insider_core::step::StepFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

type Check = Result<String, String>;

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn poisson_pmf(k: u64, mean: f64) -> f64 {
    let ln = k as f64 * mean.ln() - mean - (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    ln.exp()
}

/// Density of `y_t + βW(τ) + N(λτ) − λτ` at `y`, with extra variance `extra`.
fn poisson_mixture(y: f64, y_t: f64, var: f64, mean_jumps: f64, extra: f64) -> f64 {
    (0..200u64)
        .map(|k| poisson_pmf(k, mean_jumps) * normal_pdf(y, y_t + k as f64 - mean_jumps, var + extra))
        .sum()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn policy_err(e: impl std::fmt::Display) -> MarketError {
    MarketError::Policy(e.to_string())
}

fn unit_gaussian() -> InsiderSpec {
    InsiderSpec::gaussian(StepFunction::constant(1.0, 1.0)).unwrap()
}

fn gaussian_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let beta = StepFunction::from_values(vec![1.0, 0.6, 1.4, 0.9], 1.0);
    let gaussian = InsiderSpec::gaussian(beta.clone()).unwrap();
    let general = InsiderSpec::general(
        beta.clone(),
        vec![Mark { zeta: 1.0, intensity: 0.7 }],
        vec![StepFunction::constant(0.0, 1.0)],
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.gen_range(0.0..0.95);
        let y_t = rng.gen_range(-2.0..2.0);
        let v = beta.integral_sq(t, 1.0);
        let y = y_t + v.sqrt() * rng.gen_range(-4.0..4.0);
        let reference = normal_pdf(y, y_t, v);
        let closed = gaussian_cond_density(&gaussian, t, y, y_t).map_err(|e| e.to_string())?;
        let fourier = general_cond_density(&general, t, y, ObservedState { brownian: y_t, jump: 0.0 }, &quad())
            .map_err(|e| e.to_string())?;
        worst = worst.max((fourier - closed).abs() / closed).max((closed - reference).abs() / reference);
    }
    ensure(worst < 1e-6, format!("max relative error {worst:.2e} (< 1e-6)"))
}

fn normalization() -> Check {
    let specs = [unit_gaussian(), InsiderSpec::brownian_poisson(1.0, 1.0, 1.0).unwrap()];
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let grid = spec.default_y_grid();
        let dy = grid[1] - grid[0];
        for t in [0.0, 0.25, 0.5] {
            let state = if t == 0.0 { ObservedState::default() } else { ObservedState { brownian: 0.2, jump: 0.0 } };
            let mut total = 0.0;
            for &y in &grid {
                total += insider_core::donsker::cond_density(spec, t, y, state, &quad()).map_err(|e| e.to_string())? * dy;
            }
            worst = worst.max((total - 1.0).abs());
        }
    }
    ensure(worst < 1e-3, format!("max |∫m dy − 1| = {worst:.2e} (< 1e-3)"))
}

fn martingale() -> Check {
    let (beta, lambda) = (1.0, 1.0);
    let spec = InsiderSpec::brownian_poisson(beta, lambda, 1.0).unwrap();
    let ys = [-1.5, -0.5, 0.3, 1.0, 2.0];
    let n = 100_000;
    // Grid of quarter steps; m(t, y) is read at t = ¼, ½, ¾ along each path.
    let market = MarketSpec::constant(0.0, 1.0, 0.0, 1.0, 0.5);
    let rows = map_paths(&spec, &market, n, 303, 4, |_, p| {
        let mut out = [0.0; 15];
        for i in 1..=3 {
            for (k, &y) in ys.iter().enumerate() {
                out[(i - 1) * 5 + k] = bp_cond_density(&spec, p.grid.time(i), y, p.b[i], p.n_tilde[0][i], &quad())?;
            }
        }
        Ok(out)
    })
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, &y) in ys.iter().enumerate() {
        let unconditional = poisson_mixture(y, 0.0, beta * beta, lambda, 0.0);
        for i in 0..3 {
            let (m, se) = mean_se(&rows.iter().map(|r| r[i * 5 + k]).collect::<Vec<_>>());
            worst = worst.max((m - unconditional).abs() / se);
        }
    }
    ensure(worst < 3.0, format!("max deviation {worst:.2} SE over 3 t × 5 y, 1e5 paths (< 3)"))
}

fn density_oracle() -> Check {
    let (beta, lambda, t0) = (1.0f64, 1.0, 1.0f64);
    let spec = InsiderSpec::brownian_poisson(beta, lambda, t0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let pois = Poisson::new(lambda * t0).unwrap();
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            beta * t0.sqrt() * z + pois.sample(&mut rng) - lambda * t0
        })
        .collect();
    let h: f64 = 0.1;
    let mut worst: f64 = 0.0;
    for k in -4..=4 {
        let y = 0.6 * k as f64;
        let kernel: Vec<f64> = draws.iter().map(|&d| normal_pdf(y, d, h * h)).collect();
        let (kde, se) = mean_se(&kernel);
        let m = bp_cond_density(&spec, 0.0, y, 0.0, 0.0, &quad()).map_err(|e| e.to_string())?;
        // The kernel estimate targets m convolved with N(0, h²).
        let bias = poisson_mixture(y, 0.0, beta * beta * t0, lambda * t0, h * h)
            - poisson_mixture(y, 0.0, beta * beta * t0, lambda * t0, 0.0);
        worst = worst.max((kde - (m + bias)).abs() / se);
    }
    ensure(worst < 3.0, format!("max deviation {worst:.2} SE at 9 y from 1e6 draws (< 3)"))
}

fn insider_advantage() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for (horizon, target) in [(0.5, 0.5 * LN_2), (0.75, LN_2)] {
        let text = format!(
            "schema_version = 1\nseed = 505\nn_paths = 100000\nsteps = 2048\n\
             [market]\nb0 = 0.0\nsigma0 = 1.0\nhorizon = {horizon}\n"
        );
        let cfg = config::load_str(&text, &Overrides::default()).map_err(|e| e.to_string())?;
        let outcomes = simulate_outcomes(&cfg).map_err(|e| e.to_string())?;
        let s = summarize(&cfg, &outcomes);
        let se = s.advantage_se.unwrap();
        let z = (s.advantage - target).abs() / se;
        ok &= z < 3.0;
        notes.push(format!("T={horizon}: {:.5} ± {:.5} vs {target:.6} ({z:.2} SE)", s.advantage, se));
    }
    ensure(ok, notes.join("; "))
}

/// First-order condition `b − πσ² + σΦ + Σνγ(Ψ − πγ)/(1 + πγ)`.
fn foc(pi: f64, b: f64, sigma: f64, phi: f64, jumps: &[(f64, f64, f64)]) -> f64 {
    b - pi * sigma * sigma
        + sigma * phi
        + jumps.iter().map(|&(g, nu, psi)| nu * g * (psi - pi * g) / (1.0 + pi * g)).sum::<f64>()
}

fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 1_000_000;
    let h = (hi - lo) / n as f64;
    let mut a = lo + 0.5 * h;
    let mut fa = f(a);
    for i in 1..n {
        let b = lo + (i as f64 + 0.5) * h;
        let fb = f(b);
        if fa.signum() != fb.signum() {
            let (mut a, mut b) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m).signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        a = b;
        fa = fb;
    }
    f64::NAN
}

fn random_sets() -> Vec<(f64, f64, f64, Vec<(f64, f64, f64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    (0..20)
        .map(|case| {
            let b = rng.gen_range(-0.2..0.2);
            let sigma = rng.gen_range(0.05..0.5);
            let phi = rng.gen_range(-1.0..1.0);
            let jumps = (0..1 + case % 2)
                .map(|_| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (sign * rng.gen_range(0.05..0.6), rng.gen_range(0.1..3.0), rng.gen_range(-0.5..1.0))
                })
                .collect();
            (b, sigma, phi, jumps)
        })
        .collect()
}

fn solve(b: f64, sigma: f64, phi: f64, jumps: &[(f64, f64, f64)]) -> Result<f64, String> {
    let r = if let [(g, nu, psi)] = jumps {
        solve_foc_bp(b, sigma, *g, *nu, phi, *psi)
    } else {
        let terms: Vec<JumpTerm> = jumps.iter().map(|&(gamma, nu, psi)| JumpTerm { gamma, nu, psi }).collect();
        solve_foc_levy(b, sigma, phi, &terms)
    };
    r.map(|r| r.pi).map_err(|e| e.to_string())
}

fn foc_correctness() -> Check {
    let mut worst: f64 = 0.0;
    for (b, sigma, phi, jumps) in random_sets() {
        let mut lo: f64 = -200.0;
        let mut hi: f64 = 200.0;
        for &(g, _, _) in &jumps {
            if g > 0.0 {
                lo = lo.max(-1.0 / g);
            } else {
                hi = hi.min(-1.0 / g);
            }
        }
        let oracle = bisect(|p| foc(p, b, sigma, phi, &jumps), lo, hi);
        worst = worst.max((solve(b, sigma, phi, &jumps)? - oracle).abs());
    }
    let mut limit: f64 = 0.0;
    for (b, sigma, phi) in [(0.1, 0.2, 0.0), (0.05, 0.3, 0.7), (-0.02, 0.15, -1.2)] {
        let bp = solve_foc_bp(b, sigma, 1e-8, 1.0, phi, 0.2).map_err(|e| e.to_string())?.pi;
        let brownian = log_pi_brownian(b, sigma, phi).map_err(|e| e.to_string())?.pi;
        limit = limit.max((bp - brownian).abs());
    }
    ensure(
        worst < 1e-8 && limit < 1e-5,
        format!("max |Δπ| = {worst:.2e} (< 1e-8); γ₀ → 0 gap {limit:.2e} (< 1e-5)"),
    )
}

fn stationarity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    let grad = |x: f64, b: f64, sigma: f64, p: f64, q: f64, jumps: &[(f64, f64, f64)], r: &[f64]| {
        x * (b * p + sigma * q + jumps.iter().zip(r).map(|(&(g, nu, _), r)| g * r * nu).sum::<f64>())
    };
    for _ in 0..20 {
        let (b, sigma, p, x) = (rng.gen_range(-0.2..0.2), rng.gen_range(0.05..0.5), rng.gen_range(0.1..2.0), rng.gen_range(0.1..5.0));
        // Brownian market: the adjoint at the solution must be q = −(b₀/σ₀)p.
        let phi = rng.gen_range(-1.0..1.0);
        let pi = log_pi_brownian(b, sigma, phi).map_err(|e| e.to_string())?.pi;
        let q = log_utility_adjoint(p, pi, sigma, phi, &[]).q;
        worst = worst.max((q + (b / sigma) * p).abs());
        worst = worst.max(grad(x, b, sigma, p, q, &[], &[]).abs());
        // Pure-jump market: r = −(b₀/(λγ₀))p.
        let (gamma, lambda, psi) = (rng.gen_range(0.2..0.8), rng.gen_range(0.5..3.0), rng.gen_range(-0.5..1.0));
        let b = rng.gen_range(0.0..0.9) * lambda * gamma;
        let pi = solve_foc_poisson_pure(b, gamma, lambda, psi).map_err(|e| e.to_string())?.pi;
        let a = log_utility_adjoint(p, pi, 0.0, 0.0, &[(1.0, JumpTerm { gamma, nu: lambda, psi })]);
        let r = a.r[0].1;
        worst = worst.max((r + b / (lambda * gamma) * p).abs());
        worst = worst.max(grad(x, b, 0.0, p, 0.0, &[(gamma, lambda, psi)], &[r]).abs());
    }
    for (b, sigma, phi, jumps) in random_sets() {
        let pi = solve(b, sigma, phi, &jumps)?;
        let p = rng.gen_range(0.1..2.0);
        let marks: Vec<(f64, JumpTerm)> = jumps
            .iter()
            .enumerate()
            .map(|(k, &(gamma, nu, psi))| (k as f64, JumpTerm { gamma, nu, psi }))
            .collect();
        let a = log_utility_adjoint(p, pi, sigma, phi, &marks);
        let r: Vec<f64> = a.r.iter().map(|(_, r)| *r).collect();
        worst = worst.max(grad(rng.gen_range(0.1..5.0), b, sigma, a.p, a.q, &jumps, &r).abs());
    }
    ensure(worst < 1e-10, format!("max |∂H/∂π| = {worst:.2e} over 60 solutions (< 1e-10)"))
}

fn bsde_closure() -> Check {
    let insider = unit_gaussian();
    let (b0, sigma0, x0) = (0.1, 0.2, 2.0);
    let market = MarketSpec::constant(b0, sigma0, 0.0, x0, 0.5);
    let info = Information::Insider(quad());
    let sol = adjoint::solve_c(&insider, &market, &UtilitySpec::Log, 0.3, &info, 20_000, 808, 512).map_err(|e| e.to_string())?;
    let pairs = adjoint::simulate_pairs(&insider, &market, 0.3, &info, 20_000, 808, 512).map_err(|e| e.to_string())?;
    let (_, se) = mean_se(&pairs.iter().map(|p| p.gamma0_t / p.gamma_t).collect::<Vec<_>>());
    let z = (sol.c - 1.0 / x0).abs() / (se / x0);

    // Pathwise: I(cΓ) with c = 1/x₀ against closed-form-policy wealth on a
    // 16384-step reference grid, over coupled paths.
    let x0 = 1.0;
    let market = MarketSpec::constant(b0, sigma0, 0.0, x0, 0.25);
    let theta = b0 / sigma0;
    let policy = |p: &PathBundle, i: usize, y: f64| {
        let phi = gaussian_phi(&insider, p.grid.time(i), y, p.y_at(i))?;
        log_pi_brownian(b0, sigma0, phi).map(|r| r.pi).map_err(policy_err)
    };
    let rows = map_paths(&insider, &market, 2000, 809, 16384, |_, fine| {
        let reference = insider_wealth(fine, &insider, &market, policy)?;
        let y = fine.realized_y;
        let last = fine.grid.index_of(0.25)?;
        // Continuous-time wealth: x₀·exp(θB(T) + ½θ²T)·M(T)/M(0).
        let ratio = normal_pdf(y, fine.b[last], 0.75) / normal_pdf(y, 0.0, 1.0);
        let exact = x0 * (theta * fine.b[last] + 0.5 * theta * theta * 0.25).exp() * ratio;
        let mut out = [0.0; 4];
        for (k, factor) in [8usize, 4].into_iter().enumerate() {
            let coarse = fine.coarsen(&insider, factor);
            let gamma = adjoint::gamma_path(&coarse, &insider, &market, y, &info).map_err(policy_err)?;
            let bsde = UtilitySpec::Log.inverse_marginal(gamma / x0);
            out[k] = (bsde / reference - 1.0).abs();
            out[k + 2] = (bsde / exact - 1.0).abs();
        }
        Ok(out)
    })
    .map_err(|e| e.to_string())?;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
    let (e2048, e4096) = (mean(0), mean(1));
    let rate = (e2048 / e4096).log2();
    let exact_rate = (mean(2) / mean(3)).log2();
    ensure(
        z < 3.0 && e2048 < 1e-2 && rate >= 0.5,
        format!(
            "c = {:.5} vs 1/x₀ ({z:.2} SE); pathwise error {e2048:.2e} at 2048 (< 1e-2), {e4096:.2e} at 4096, \
             rate {rate:.2} (≥ 0.5); against the continuous-time wealth the rate is {exact_rate:.2}",
            sol.c
        ),
    )
}

fn budget_feasibility() -> Check {
    let insider = unit_gaussian();
    let x0 = 1.0;
    let market = MarketSpec::constant(0.1, 0.2, 0.0, x0, 0.5);
    let utility = UtilitySpec::Power(0.5);
    let info = Information::Insider(quad());
    let pairs = adjoint::simulate_pairs(&insider, &market, 0.3, &info, 50_000, 909, 512).map_err(|e| e.to_string())?;
    let sol = adjoint::solve_c_from_pairs(&pairs, &utility, x0).map_err(|e| e.to_string())?;
    let limit = (1e-8 * x0).max(0.5 * sol.budget_se);
    let gap = (sol.budget - x0).abs();
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for k in -48..=48 {
        let v = adjoint::budget(&pairs, &utility, sol.c * 2f64.powf(k as f64 / 8.0)).0;
        monotone &= v < prev;
        prev = v;
    }
    ensure(
        gap < limit && monotone,
        format!("|budget − x₀| = {gap:.2e} (< {limit:.2e}); budget map strictly decreasing: {monotone}"),
    )
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    fs::write(
        p.join("c.toml"),
        "schema_version = 1\nseed = 1010\nsteps = 256\n[insider]\nkind = \"brownian_poisson\"\n\
         [market]\nb0 = 0.05\nsigma0 = 0.0\ngamma0 = 0.1\n[density]\ny_points = 41\n[policy]\ny_points = 11\n[verify]\npaths = 200\n",
    )
    .map_err(|e| e.to_string())?;
    let commands = ["density", "policy", "simulate", "foc", "solve-c", "verify"];
    for out in ["a", "b"] {
        for cmd in commands {
            let o = Command::new(env!("CARGO_BIN_EXE_insider"))
                .args([cmd, "--config", "c.toml", "--paths", "100", "--out", out])
                .current_dir(p)
                .output()
                .map_err(|e| e.to_string())?;
            if o.status.code().map_or(true, |c| c > 1) {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&o.stderr)));
            }
        }
    }
    let mut files = 0;
    for entry in fs::read_dir(p.join("a")).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = fs::read(p.join("a").join(&name)).map_err(|e| e.to_string())?;
        let b = fs::read(p.join("b").join(&name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name:?} differs between runs"));
        }
        files += 1;
    }
    ensure(files == 9, format!("{files} output files byte-identical across two runs of all 6 subcommands"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("gaussian reduction", gaussian_reduction),
        ("normalization", normalization),
        ("martingale", martingale),
        ("monte carlo density oracle", density_oracle),
        ("insider advantage", insider_advantage),
        ("foc correctness", foc_correctness),
        ("maximum-principle stationarity", stationarity),
        ("bsde closure", bsde_closure),
        ("budget feasibility", budget_feasibility),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {:>2} PASS {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
