//! Lattice discretization of the drift/volatility-controlled family: upper
//! and lower expectations, the nonlinear Snell envelope and the test-class
//! membership harness.

mod expectation;
mod lattice;
mod snell;
mod viscosity;

pub use expectation::{lower_expectation, positive_hitting_check, upper_expectation};
pub use lattice::{Action, Lattice};
pub use snell::{snell_general, snell_one_step_checks, snell_upper, SnellResult, StopRule};
pub use viscosity::{test_membership, viscosity_spot_check, MembershipReport, ViscositySpotCheck};
