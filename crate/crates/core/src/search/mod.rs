//! Search drivers: robustness gradient descent, simulated annealing, their
//! combination, and the repeated-run experiment harness.

mod experiment;
mod gd;
mod sa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::HybridAutomaton;
use crate::descent::{guard_fallback_target, Anchor, DescentError, GuardTarget, Objective};
use crate::input::InputError;
use crate::sensitivity::{simulate_with_sensitivity, AugmentedTrajectory};
use crate::simulate::{simulate, SimError, SimOptions};
use crate::space::{SearchPoint, SearchSpace};
use crate::tl::{eval_robustness, Formula, RobustnessResult, TlError};

pub use experiment::{run_experiment, ArmSummary, ExperimentConfig, ExperimentSummary, RunRow};
pub use gd::{gradient_descent, inbox, search_direction, GdConfig, Scaling};
pub use sa::{run_seed, sa_plus_gd, simulated_annealing, SaConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tl(#[from] TlError),
    #[error(transparent)]
    Input(#[from] InputError),
}

/// Everything a driver needs to score a search point.
#[derive(Debug, Clone)]
pub struct Problem {
    pub automaton: HybridAutomaton,
    /// Formula whose robustness is minimized.
    pub formula: Formula,
    pub space: SearchSpace,
    pub horizon: f64,
    pub sim: SimOptions,
}

/// One simulation and its robustness.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub point: SearchPoint,
    /// Sensitivities are empty unless requested.
    pub aug: AugmentedTrajectory,
    pub robustness: RobustnessResult,
    pub objective: Objective,
    pub fallback: Option<GuardTarget>,
}

impl Evaluation {
    pub fn r(&self) -> f64 {
        self.robustness.r
    }

    pub fn switching(&self) -> Vec<usize> {
        self.aug.base.switching_sequence()
    }

    pub fn has_sensitivities(&self) -> bool {
        !self.aug.sens.is_empty()
    }

    /// Where the next descent direction is taken from.
    pub fn anchor(&self) -> Result<Anchor, DescentError> {
        match &self.fallback {
            Some(g) => Ok(g.anchor.clone()),
            None => Anchor::from_robustness(&self.robustness),
        }
    }
}

impl Problem {
    pub fn evaluate(&self, point: &SearchPoint, with_sensitivity: bool) -> Result<Evaluation, EvalError> {
        let input = self.space.input_for(point)?;
        let x0 = point.x0_vector();
        let aug = if with_sensitivity {
            simulate_with_sensitivity(&self.automaton, &x0, &input, self.horizon, &self.sim)?
        } else {
            AugmentedTrajectory { base: simulate(&self.automaton, &x0, &input, self.horizon, &self.sim)?, sens: vec![] }
        };
        let robustness = eval_robustness(&self.formula, &aug.base)?;
        let mut fallback = None;
        let objective = match robustness.witness_location() {
            Some(l) if robustness.is_sentinel() => match guard_fallback_target(&self.automaton, &aug.base, l) {
                Ok(g) => {
                    let o = Objective::Fallback { hops: g.hops, distance: g.anchor.distance };
                    fallback = Some(g);
                    o
                }
                Err(_) => Objective::Finite(robustness.r),
            },
            _ => Objective::Finite(robustness.r),
        };
        Ok(Evaluation { point: point.clone(), aug, robustness, objective, fallback })
    }
}

/// Which driver produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sa,
    Gd,
}

/// One simulation made by a driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based simulation count at this record.
    pub sim: usize,
    pub phase: Phase,
    /// SA sample index, or GD outer iteration (0 for the start point).
    pub iteration: usize,
    /// GD step-shrink attempt within the iteration.
    pub attempt: usize,
    pub point: SearchPoint,
    /// Robustness of this sample; `None` if the simulation failed.
    pub r: Option<f64>,
    /// Robustness of the point it is compared against.
    pub r_incumbent: Option<f64>,
    pub objective: Option<Objective>,
    pub t_star: Option<f64>,
    /// GD step size, or SA temperature.
    pub step: f64,
    pub accepted: bool,
    pub switching: Vec<usize>,
    /// Surrogate cost against the incumbent's witness (GD only).
    pub j: Option<f64>,
    /// Predicted first-order change of the surrogate (GD only).
    pub dj: Option<f64>,
    pub note: Option<String>,
}

/// Full record of one driver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub driver: String,
    pub seed: Option<u64>,
    pub records: Vec<TraceRecord>,
    pub best: SearchPoint,
    pub best_r: f64,
    pub best_objective: Objective,
    pub sims: usize,
    pub falsified: bool,
    pub stop: String,
    /// SA moves to a worse sample.
    pub worse_accepted: usize,
    pub gd_dispatches: usize,
    /// Some SA sample reached the GD dispatch threshold.
    pub reached_threshold: bool,
}

impl RunTrace {
    fn new(driver: &str, seed: Option<u64>, start: &SearchPoint) -> Self {
        Self {
            driver: driver.to_string(),
            seed,
            records: Vec::new(),
            best: start.clone(),
            best_r: f64::INFINITY,
            best_objective: Objective::Finite(f64::INFINITY),
            sims: 0,
            falsified: false,
            stop: String::new(),
            worse_accepted: 0,
            gd_dispatches: 0,
            reached_threshold: false,
        }
    }

    fn offer(&mut self, ev: &Evaluation) {
        if ev.objective < self.best_objective || self.best_r.is_infinite() && ev.r() < self.best_r {
            self.best = ev.point.clone();
            self.best_r = ev.r();
            self.best_objective = ev.objective;
        }
        self.falsified = self.best_r <= 0.0;
    }

    /// Robustness of accepted GD records, in order.
    pub fn accepted_gd_robustness(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.phase == Phase::Gd && r.accepted).filter_map(|r| r.r).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
