//! Seeded simulation of the controlled state and path bundles.

mod bundle;
mod moments;
mod policy;

pub use bundle::{euler_bundle, euler_bundle_from_state, path_rng, PathBundle};
pub use moments::{common_noise_gap, moment_report, MomentReport};
pub use policy::ControlPolicy;
