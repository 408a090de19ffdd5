use serde::{Deserialize, Serialize};

use super::lsmc::{solve_rbsde_lsmc, LsmcOptions};
use super::tree::{solve_rbsde_tree, TreeControl, TreeOptions};
use crate::error::{parameter, Result};
use crate::model::ProblemData;
use crate::path_space::{PathPoint, PathState};
use crate::simulate::{euler_bundle_from_state, ControlPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueMethod {
    /// Tree in dimension one, policy family otherwise.
    #[default]
    Auto,
    Tree,
    /// Maximum of regression values over the policy family.
    Lsmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueOptions {
    pub method: ValueMethod,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub tree: TreeOptions,
    pub lsmc: LsmcOptions,
}

impl Default for ValueOptions {
    fn default() -> Self {
        Self {
            method: ValueMethod::Auto,
            n_steps: 50,
            n_paths: 20_000,
            seed: 1,
            tree: TreeOptions::default(),
            lsmc: LsmcOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: String,
    /// Number of policies compared (zero for the per-node tree supremum).
    pub family_size: usize,
    pub best_policy: Option<ControlPolicy>,
    pub warnings: Vec<String>,
}

/// All constant policies and all one-switch policies at the middle step.
pub fn policy_family(n_controls: usize, n_steps: usize) -> Vec<ControlPolicy> {
    let mut out: Vec<ControlPolicy> = (0..n_controls).map(ControlPolicy::constant).collect();
    if n_steps >= 2 {
        for a in 0..n_controls {
            for b in 0..n_controls {
                if a != b {
                    out.push(ControlPolicy::one_switch(a, b, n_steps / 2, n_steps));
                }
            }
        }
    }
    out
}

/// Estimate of `u⁰(t, ω) = sup_k Y^k_t` at the given path features.
pub fn value_functional(data: &ProblemData, root: &PathState, opts: &ValueOptions) -> Result<ValueEstimate> {
    let use_tree = match opts.method {
        ValueMethod::Auto => data.dim() == 1,
        ValueMethod::Tree => true,
        ValueMethod::Lsmc => false,
    };
    if use_tree {
        let topts = TreeOptions { n_steps: opts.n_steps, control: TreeControl::Sup, ..opts.tree.clone() };
        let s = solve_rbsde_tree(data, root, &topts)?;
        return Ok(ValueEstimate {
            value: s.y0,
            std_error: 0.0,
            method: s.kind,
            family_size: 0,
            best_policy: None,
            warnings: s.warnings,
        });
    }
    if opts.n_paths < 2 {
        return Err(parameter("the regression estimate needs at least two paths"));
    }
    let mut best: Option<ValueEstimate> = None;
    let family = policy_family(data.controls.len(), opts.n_steps);
    let size = family.len();
    for policy in family {
        // Common random numbers across the family.
        let b = euler_bundle_from_state(data, root, &policy, opts.n_steps, opts.n_paths, opts.seed, true)?;
        let s = solve_rbsde_lsmc(data, &b, &opts.lsmc)?;
        if best.as_ref().is_none_or(|e| s.y0 > e.value) {
            best = Some(ValueEstimate {
                value: s.y0,
                std_error: s.std_error,
                method: s.kind,
                family_size: size,
                best_policy: Some(policy),
                warnings: s.warnings,
            });
        }
    }
    Ok(best.expect("the policy family is never empty"))
}

pub fn value_at_point(data: &ProblemData, point: &PathPoint, opts: &ValueOptions) -> Result<ValueEstimate> {
    value_functional(data, &point.state(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemSpec;

    #[test]
    fn family_size() {
        assert_eq!(policy_family(2, 10).len(), 4);
        assert_eq!(policy_family(3, 10).len(), 9);
        assert_eq!(policy_family(3, 1).len(), 3);
    }

    #[test]
    fn singleton_reduces_to_plain_solve() {
        let d = ProblemSpec::preset("martingale-quadratic").unwrap().build().unwrap();
        let root = PathState::origin(0.0, 1);
        let v = value_functional(&d, &root, &ValueOptions { n_steps: 30, ..ValueOptions::default() }).unwrap();
        let s = solve_rbsde_tree(&d, &root, &TreeOptions::steps(30)).unwrap();
        assert_eq!(v.value, s.y0);
    }

    #[test]
    fn policy_family_matches_tree_on_convex_case() {
        let d = ProblemSpec::preset("two-vol-convex").unwrap().build().unwrap();
        let root = PathState::origin(0.0, 1);
        let opts = ValueOptions { method: ValueMethod::Lsmc, n_steps: 10, n_paths: 20_000, ..ValueOptions::default() };
        let v = value_functional(&d, &root, &opts).unwrap();
        assert_eq!(v.best_policy, Some(ControlPolicy::constant(1)));
        assert!((v.value - 1.0).abs() < 3.0 * v.std_error + 1e-2, "{v:?}");
    }
}
