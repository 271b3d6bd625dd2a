//! Conditional Donsker-delta densities, optimal insider portfolios and the
//! Monte Carlo machinery to evaluate them in jump-diffusion markets.
//!
//! * [`quadrature`]: Gaussian-damped oscillatory integrals.
//! * [`donsker`]: conditional densities `M(t,y)` and the ratios `Φ`, `Ψ`.
//! * [`market`]: seeded path simulation and exact wealth exponentials.
//! * [`portfolio`]: log-utility policies, first-order conditions, Hamiltonian.
//! * [`adjoint`]: stochastic exponentials, budget constant and adjoint processes.

pub mod adjoint;
pub mod donsker;
pub mod market;
pub mod portfolio;
pub mod quadrature;
pub mod step;
