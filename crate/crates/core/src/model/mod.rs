//! Problem data, the generator `G`, polynomial test functionals with the
//! operator `L`, the exponential change of unknown, and assumption checks.

mod data;
mod families;
mod generator;
mod test_functional;
mod transform;
mod validate;

pub use data::{Controls, DriverFn, Modulus, PathFn, ProblemData};
pub use families::{DriverSpec, PathFunctionalSpec, ProblemSpec, SigmaSpec, PRESETS};
pub use generator::{generator_g, generator_g1, operator_l};
pub use test_functional::TestFunctional;
pub use transform::{change_of_variable, Transform};
pub use validate::{
    default_radius, monotonicity_probes, random_state, validate, Clause, MonotonicityReport, ValidationReport,
};
