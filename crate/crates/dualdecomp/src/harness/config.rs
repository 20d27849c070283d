//! Experiment configuration, mirrored one-to-one by the JSON config files
//! the CLI consumes.

use serde::{Deserialize, Serialize};

use crate::bench::Family;
use crate::error::{Error, Result};
use crate::oracles::OracleFamily;
use crate::pricing::StepRule;
use crate::recovery::{ObjectiveMode, SelectionMode};
use crate::scalar::{s, Scalar};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Instance JSON file written by `gen`.
    File { path: String },
    /// Generate in-process.
    Generator {
        family: Family,
        #[serde(default = "default_params")]
        params: serde_json::Value,
        seed: u64,
    },
}

fn default_params() -> serde_json::Value {
    serde_json::json!({})
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    Subgradient {
        step_rule: StepRule,
        #[serde(default = "default_patience")]
        patience: usize,
        #[serde(default = "default_min_improvement")]
        min_improvement: f64,
    },
    Accpm {
        #[serde(default = "default_newton_tol")]
        newton_tol: f64,
        #[serde(default = "default_max_newton")]
        max_newton: usize,
        #[serde(default = "default_lambda_tol")]
        lambda_tol: f64,
    },
}

fn default_patience() -> usize {
    50
}
fn default_min_improvement() -> f64 {
    1e-9
}
fn default_newton_tol() -> f64 {
    1e-8
}
fn default_max_newton() -> usize {
    100
}
fn default_lambda_tol() -> f64 {
    1e-6
}

/// Oracle settings: exactly one of `epsilon` (single oracle family) or
/// `mixing` (budget split across suboptimality levels) must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSettings<T> {
    pub family: OracleFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<Vec<(T, usize)>>,
    /// N_i, responses per agent per iteration.
    pub responses: usize,
    /// History window H (1 = fresh bundle only).
    #[serde(default = "default_history")]
    pub history: usize,
    #[serde(default = "default_abs_floor")]
    pub abs_floor: f64,
}

fn default_history() -> usize {
    1
}
fn default_abs_floor() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoverySettings<T> {
    pub objective: ObjectiveMode,
    pub selection: SelectionMode,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Run recovery every `cadence` iterations.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_tol: Option<T>,
}

fn default_samples() -> usize {
    16
}
fn default_cadence() -> usize {
    1
}

/// Coupling-feasibility rule for the logged points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityThreshold<T> {
    /// `r_p / ‖b‖₂ < τ`; invalid when `b = 0`.
    Relative(T),
    /// `r_p < τ`.
    Absolute(T),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrackConfig {
    #[serde(default = "default_true")]
    pub projection: bool,
    #[serde(default)]
    pub dual_average: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Per-iteration CSV log (written incrementally).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Optional JSON-lines file of per-iteration price snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig<T> {
    pub instance: InstanceSource,
    pub method: MethodConfig,
    pub oracle: OracleSettings<T>,
    pub recovery: RecoverySettings<T>,
    pub max_iters: usize,
    pub feasibility: FeasibilityThreshold<T>,
    #[serde(default)]
    pub output: OutputConfig,
    pub seed: u64,
    #[serde(default)]
    pub track: TrackConfig,
    /// Optional residual stopping rule `r_p + r_c <= ε_r` on the recovered
    /// point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_residual: Option<T>,
    /// Solve tolerance for oracles and the reference solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_tol: Option<T>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.oracle.epsilon, &self.oracle.mixing) {
            (Some(_), None) | (None, Some(_)) => {}
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "oracle: give either a single epsilon or a mixing list, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "oracle: one of epsilon or mixing is required".into(),
                ))
            }
        }
        if let Some(mix) = &self.oracle.mixing {
            let total: usize = mix.iter().map(|&(_, c)| c).sum();
            if total != self.oracle.responses {
                return Err(Error::Config(format!(
                    "oracle: mixing counts sum to {total}, expected {}",
                    self.oracle.responses
                )));
            }
        }
        if self.oracle.responses == 0 {
            return Err(Error::Config("oracle: needs at least one response".into()));
        }
        if self.oracle.history == 0 {
            return Err(Error::Config("oracle: history window must be >= 1".into()));
        }
        if self.recovery.cadence == 0 {
            return Err(Error::Config("recovery: cadence must be >= 1".into()));
        }
        if self.recovery.selection == SelectionMode::IntegralHeuristic
            && self.recovery.samples == 0
        {
            return Err(Error::Config("recovery: heuristic needs samples >= 1".into()));
        }
        match self.feasibility {
            FeasibilityThreshold::Relative(v) | FeasibilityThreshold::Absolute(v) => {
                if v <= T::zero() {
                    return Err(Error::Config("feasibility threshold must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn solve_tol_or_default(&self) -> T {
        self.solve_tol.unwrap_or_else(crate::solver::default_tol)
    }

    pub fn recovery_tol_or_default(&self) -> T {
        self.recovery.solve_tol.unwrap_or_else(|| s(1e-9))
    }
}
