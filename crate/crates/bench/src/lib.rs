//! Shared fixtures for the benchmarks.

use ppde_core::{PathState, ProblemData, ProblemSpec};

pub fn preset(name: &str) -> ProblemData {
    ProblemSpec::preset(name).expect("known preset").build().expect("preset builds")
}

pub fn origin() -> PathState {
    PathState::origin(0.0, 1)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert_eq!(super::preset("american-put").dim(), 1);
    }
}
