#![allow(dead_code)]
//! Independent oracles shared by the integration tests. Nothing here calls
//! into the quadrature or density code under test.

use std::f64::consts::PI;

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    let mut log = -mean + k as f64 * mean.ln();
    for j in 1..=k {
        log -= (j as f64).ln();
    }
    log.exp()
}

/// Density at `y` of `y_t + β(W) + Σ_j s_j (N_j − μ_j)` with `W ~ N(0, gauss_var)`
/// and independent `N_j ~ Poisson(μ_j)`, summed over Poisson counts.
pub fn compound_mixture_density(y: f64, y_t: f64, gauss_var: f64, jumps: &[(f64, f64)]) -> f64 {
    fn rec(y: f64, centre: f64, var: f64, jumps: &[(f64, f64)], weight: f64) -> f64 {
        match jumps.split_first() {
            None => weight * normal_pdf(y, centre, var),
            Some((&(mu, size), rest)) => {
                let kmax = (mu + 12.0 * mu.sqrt() + 30.0) as u64;
                (0..=kmax)
                    .map(|k| {
                        let p = poisson_pmf(k, mu);
                        rec(y, centre + size * (k as f64 - mu), var, rest, weight * p)
                    })
                    .sum()
            }
        }
    }
    rec(y, y_t, gauss_var, jumps, 1.0)
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
