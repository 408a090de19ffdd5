use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Piecewise-constant assignment of a control index to each time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlPolicy {
    Constant {
        control: usize,
    },
    /// One index per step; the last entry repeats.
    Schedule {
        controls: Vec<usize>,
    },
    /// `table[step][bucket]` with buckets of the first coordinate cut at
    /// `edges` (ascending). Rows past the table repeat the last row.
    Feedback {
        edges: Vec<f64>,
        table: Vec<Vec<usize>>,
    },
}

impl ControlPolicy {
    pub fn constant(k: usize) -> Self {
        Self::Constant { control: k }
    }

    /// Control `k1` on steps `< switch`, `k2` afterwards.
    pub fn one_switch(k1: usize, k2: usize, switch: usize, n_steps: usize) -> Self {
        Self::Schedule { controls: (0..n_steps.max(1)).map(|i| if i < switch { k1 } else { k2 }).collect() }
    }

    #[inline]
    pub fn control(&self, step: usize, x: &[f64]) -> usize {
        match self {
            Self::Constant { control } => *control,
            Self::Schedule { controls } => controls[step.min(controls.len() - 1)],
            Self::Feedback { edges, table } => {
                let row = &table[step.min(table.len() - 1)];
                let bucket = edges.partition_point(|e| *e <= x[0]);
                row[bucket.min(row.len() - 1)]
            }
        }
    }

    pub fn check(&self, n_controls: usize) -> Result<()> {
        let bad = |k: &usize| *k >= n_controls;
        let ok = match self {
            Self::Constant { control } => !bad(control),
            Self::Schedule { controls } => !controls.is_empty() && !controls.iter().any(bad),
            Self::Feedback { edges, table } => {
                !table.is_empty()
                    && edges.windows(2).all(|w| w[0] <= w[1])
                    && table.iter().all(|r| !r.is_empty() && !r.iter().any(bad))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("policy uses controls outside 0..{n_controls} or is empty")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feedback_buckets() {
        let p = ControlPolicy::Feedback { edges: vec![0.0], table: vec![vec![0, 1]] };
        assert_eq!(p.control(3, &[-0.5]), 0);
        assert_eq!(p.control(3, &[0.5]), 1);
        assert!(p.check(2).is_ok());
        assert!(p.check(1).is_err());
    }

    #[test]
    fn one_switch_schedule() {
        let p = ControlPolicy::one_switch(0, 1, 2, 4);
        let ks: Vec<_> = (0..6).map(|i| p.control(i, &[0.0])).collect();
        assert_eq!(ks, vec![0, 0, 1, 1, 1, 1]);
    }
}
