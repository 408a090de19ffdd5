//! Backward solvers: reflected and penalized BSDEs on trees and simulated
//! paths, the value functional and its dynamic programming checks.

mod dpp;
mod lsmc;
mod regression;
mod skorokhod;
mod solution;
mod step;
mod tree;
mod value;

pub use dpp::{dpp_residual, DppOptions, DppReport, DppVariant};
pub use lsmc::{solve_lsmc_with, solve_rbsde_lsmc, BundleData, LsmcOptions, LsmcTargets, PathData};
pub use regression::BasisSpec;
pub use skorokhod::{skorokhod_report, SkorokhodReport};
pub use solution::{DriverMode, Layout, Penalty, PenaltyScheme, RbsdeSolution, StepSummary};
pub use tree::{solve_penalized, solve_rbsde_tree, TreeControl, TreeOptions};
pub use value::{policy_family, value_at_point, value_functional, ValueEstimate, ValueMethod, ValueOptions};
