use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::data::{Controls, DriverFn, Modulus, PathFn, ProblemData};
use crate::error::{domain, Error, Result};
use crate::path_space::PathState;

/// Built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    #[default]
    Zero,
    /// `F = y_coef·y + z_coef·Σ(σz)_i + constant`.
    Linear { y_coef: f64, z_coef: f64, constant: f64 },
    /// `F = −rate·y`.
    Discount { rate: f64 },
}

/// Built-in barrier and terminal functionals of the stopped path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathFunctionalSpec {
    Constant {
        value: f64,
    },
    /// `coef·Σ x_i`.
    Linear {
        coef: f64,
    },
    /// `coef·|x|² + time_coef·t`.
    Quadratic {
        coef: f64,
        #[serde(default)]
        time_coef: f64,
    },
    /// `coef·|x|`.
    Abs {
        coef: f64,
    },
    /// Put payoff on the geometric state `s0·exp((rate − vol²/2)·t + x)`.
    Put {
        s0: f64,
        strike: f64,
        rate: f64,
        vol: f64,
    },
    /// `coef·max_{s≤t} x_1(s)`.
    RunningMax {
        coef: f64,
    },
}

impl PathFunctionalSpec {
    pub fn build(&self) -> PathFn {
        match *self {
            Self::Constant { value } => Arc::new(move |_: &PathState| value),
            Self::Linear { coef } => Arc::new(move |s: &PathState| coef * s.x.iter().sum::<f64>()),
            Self::Quadratic { coef, time_coef } => {
                Arc::new(move |s: &PathState| coef * s.x.iter().map(|v| v * v).sum::<f64>() + time_coef * s.t)
            }
            Self::Abs { coef } => Arc::new(move |s: &PathState| coef * s.norm()),
            Self::Put { s0, strike, rate, vol } => Arc::new(move |s: &PathState| {
                let spot = s0 * ((rate - 0.5 * vol * vol) * s.t + s.x[0]).exp();
                (strike - spot).max(0.0)
            }),
            Self::RunningMax { coef } => Arc::new(move |s: &PathState| coef * s.run_max[0]),
        }
    }

    pub fn path_dependent(&self) -> bool {
        matches!(self, Self::RunningMax { .. })
    }
}

impl DriverSpec {
    pub fn build(&self) -> DriverFn {
        match *self {
            Self::Zero => Arc::new(|_: &PathState, _: f64, _: &[f64], _: usize| 0.0),
            Self::Linear { y_coef, z_coef, constant } => Arc::new(move |_: &PathState, y: f64, z: &[f64], _: usize| {
                y_coef * y + z_coef * z.iter().sum::<f64>() + constant
            }),
            Self::Discount { rate } => Arc::new(move |_: &PathState, y: f64, _: &[f64], _: usize| -rate * y),
        }
    }
}

/// A volatility entry: a scalar (dimension one) or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// Serializable problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub name: String,
    pub horizon: f64,
    pub sigmas: Vec<SigmaSpec>,
    #[serde(default)]
    pub driver: DriverSpec,
    pub barrier: PathFunctionalSpec,
    pub terminal: PathFunctionalSpec,
    pub m0: f64,
    pub l0: f64,
    #[serde(default)]
    pub rho0: Modulus,
    pub c0: f64,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemData> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        let mut mats = Vec::with_capacity(self.sigmas.len());
        for s in &self.sigmas {
            mats.push(match s {
                SigmaSpec::Scalar(v) => DMatrix::from_element(1, 1, *v),
                SigmaSpec::Matrix(rows) => {
                    let n = rows.len();
                    if n == 0 || rows.iter().any(|r| r.len() != n) {
                        return Err(domain("volatility matrix must be square"));
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
            });
        }
        Ok(ProblemData {
            name: self.name.clone(),
            horizon: self.horizon,
            controls: Controls::new(mats)?,
            driver: self.driver.build(),
            barrier: self.barrier.build(),
            terminal: self.terminal.build(),
            m0: self.m0,
            l0: self.l0,
            rho0: self.rho0,
            c0: self.c0,
            path_dependent: self.barrier.path_dependent() || self.terminal.path_dependent(),
        })
    }

    /// Named built-in instances.
    pub fn preset(name: &str) -> Result<Self> {
        use PathFunctionalSpec as P;
        let floor = P::Constant { value: -10.0 };
        let base = |name: &str, sigmas: Vec<f64>, barrier, terminal| ProblemSpec {
            name: name.to_string(),
            horizon: 1.0,
            sigmas: sigmas.into_iter().map(SigmaSpec::Scalar).collect(),
            driver: DriverSpec::Zero,
            barrier,
            terminal,
            m0: 10.0,
            l0: 0.5,
            rho0: Modulus { c: 1.0, beta: 0.5 },
            c0: 0.5,
        };
        let spec = match name {
            "martingale-quadratic" => base(name, vec![1.0], floor, P::Quadratic { coef: 1.0, time_coef: 0.0 }),
            "abs-stopping" => base(name, vec![1.0], P::Abs { coef: 1.0 }, P::Abs { coef: 1.0 }),
            "linear-terminal" => base(name, vec![1.0], floor, P::Linear { coef: 1.0 }),
            "two-vol-convex" => base(name, vec![0.5, 1.0], floor, P::Quadratic { coef: 1.0, time_coef: 0.0 }),
            "two-vol-concave" => base(name, vec![0.5, 1.0], floor, P::Quadratic { coef: -1.0, time_coef: 0.0 }),
            "running-max" => base(name, vec![1.0], floor, P::RunningMax { coef: 1.0 }),
            "american-put" => {
                let put = P::Put { s0: 36.0, strike: 40.0, rate: 0.06, vol: 0.2 };
                ProblemSpec {
                    driver: DriverSpec::Discount { rate: 0.06 },
                    m0: 40.0,
                    rho0: Modulus { c: 60.0, beta: 1.0 },
                    c0: 0.2,
                    ..base(name, vec![0.2], put.clone(), put)
                }
            }
            _ => return Err(Error::Config(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))),
        };
        Ok(spec)
    }
}

pub const PRESETS: &[&str] = &[
    "martingale-quadratic",
    "abs-stopping",
    "linear-terminal",
    "two-vol-convex",
    "two-vol-concave",
    "running-max",
    "american-put",
];
