//! Solvers for obstacle problems of fully nonlinear path-dependent PDEs,
//! built on second-order reflected BSDEs.

// `!(x > 0.0)` rejects NaN on purpose, and index loops mirror the
// stencils they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod frozen;
pub mod model;
pub mod nonlinear;
pub mod oracle;
pub mod path_space;
pub mod rbsde;
pub mod simulate;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use model::{ProblemData, ProblemSpec};
pub use path_space::{DiscretePath, PathPoint, PathState};
