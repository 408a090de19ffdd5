//! Independent ground truth for the acceptance checks. Nothing here calls
//! into the solvers it is used to verify.

mod binomial;
mod brute_snell;
mod fd_vi;
mod markov;
mod sup_moment;

pub use binomial::binomial_american;
pub use brute_snell::{brute_force_expectation, brute_force_snell, DEFAULT_BUDGET};
pub use fd_vi::{fd_variational_inequality, FdMesh, FdSolution};
pub use markov::{MarkovianSpec, TimeSpaceFn};
pub use sup_moment::{brownian_sup_cdf, brownian_sup_moment};
