//! Experiment configuration shared by the command line runner and the
//! acceptance suite. Every knob has a default, so an empty file is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frozen::{HittingGapOptions, ReplayOptions, SandwichOptions};
use crate::model::{change_of_variable, ProblemData, ProblemSpec, Transform};
use crate::rbsde::{DppOptions, ValueOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Built-in instance; ignored when `spec` is given.
    pub preset: String,
    pub spec: Option<ProblemSpec>,
    /// Solve the exponentially transformed problem instead.
    pub transform: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { preset: "martingale-quadratic".into(), spec: None, transform: false }
    }
}

/// Grids swept by `converge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub steps: Vec<usize>,
    pub paths: Vec<usize>,
    pub m: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            steps: vec![10, 20, 40, 80],
            paths: vec![2_000, 8_000, 32_000],
            m: vec![1.0, 4.0, 16.0, 64.0, 256.0],
            alphas: vec![0.4, 0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnellConfig {
    pub n_steps: usize,
    /// Drift bound of the nonlinear expectation.
    pub l: f64,
    pub c0: f64,
    pub dx: Option<f64>,
    /// Forced stop from this time on.
    pub stop_cap: Option<f64>,
    /// Radii of the hitting-time positivity check.
    pub deltas: Vec<f64>,
}

impl Default for SnellConfig {
    fn default() -> Self {
        Self { n_steps: 50, l: 0.5, c0: 0.5, dx: None, stop_cap: None, deltas: vec![0.1, 0.2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub probes: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { probes: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run seed; copied into every seeded component.
    pub seed: u64,
    pub out: String,
    /// Worker threads; `None` leaves the pool at its default size.
    pub threads: Option<usize>,
    pub problem: ProblemConfig,
    pub value: ValueOptions,
    pub converge: ConvergeConfig,
    pub sandwich: SandwichOptions,
    pub snell: SnellConfig,
    pub dpp: DppOptions,
    pub hitting: HittingGapOptions,
    pub replay: ReplayOptions,
    pub validate: ValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: "out".into(),
            threads: None,
            problem: ProblemConfig::default(),
            value: ValueOptions::default(),
            converge: ConvergeConfig::default(),
            sandwich: SandwichOptions::default(),
            snell: SnellConfig::default(),
            dpp: DppOptions::default(),
            hitting: HittingGapOptions::default(),
            replay: ReplayOptions::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Replaces the seed and propagates it to every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.value.seed = seed;
        self.sandwich.scheme.seed = seed;
        self.hitting.seed = seed;
        self.replay.seed = seed;
        self
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match &self.problem.spec {
            Some(s) => Ok(s.clone()),
            None => ProblemSpec::preset(&self.problem.preset),
        }
    }

    /// The configured problem, transformed when requested, together with the
    /// transform used.
    pub fn build_problem(&self) -> Result<(ProblemData, Option<Transform>)> {
        let data = self.problem_spec()?.build()?;
        if self.problem.transform {
            let tr = Transform::standard(&data);
            Ok((change_of_variable(&data, tr), Some(tr)))
        } else {
            Ok((data, None))
        }
    }

    /// Cheap checks run before any solve.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.value.n_steps == 0 {
            return bad("value.n_steps must be positive");
        }
        if self.converge.steps.contains(&0) || self.converge.paths.iter().any(|&p| p < 2) {
            return bad("converge grids need positive steps and at least two paths");
        }
        if self.converge.m.iter().chain(&self.converge.alphas).any(|v| !(*v > 0.0)) {
            return bad("penalty and level grids must be positive");
        }
        if self.sandwich.alphas.is_empty() || self.sandwich.alphas.iter().any(|a| !(*a > 0.0)) {
            return bad("sandwich.alphas must be positive and nonempty");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        self.build_problem().map(|_| ())
    }
}
