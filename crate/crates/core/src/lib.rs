//! Falsification of hybrid automata by robustness-guided local descent.
//!
//! The pipeline: [`simulate_with_sensitivity`] produces a trajectory together
//! with `∂x/∂x0` and `∂x/∂θ`; [`eval_robustness`] finds the critical time and
//! predicate of a formula on it; [`descent_direction`] turns both into a step
//! in the search space; [`gradient_descent`], [`simulated_annealing`] and
//! [`sa_plus_gd`] drive the search.

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub mod automaton;
pub mod benchmarks;
pub mod descent;
pub mod fd;
pub mod input;
pub mod search;
pub mod sensitivity;
pub mod simulate;
pub mod space;
pub mod tl;

pub use automaton::{
    validate_automaton, Guard, GuardShape, HybridAutomaton, InitialMap, Invariant, Location, Reset, Transition,
    ValidationReport, VectorField, Violation,
};
pub use input::{InputChannel, InputError, PiecewiseConstantInput, Selector};
pub use sensitivity::{
    jump_sensitivities, sensitivity_rhs, simulate_with_sensitivity, transition_time_gradients, AugmentedTrajectory,
    SensitivityState,
};
pub use simulate::{
    apply_reset, locate_crossing, simulate, HybridTrajectory, Integrator, Sample, SimError, SimOptions,
    TransitionRecord,
};
pub use space::{SearchPoint, SearchSpace};
pub use descent::{
    descent_direction, guard_fallback_target, normalized_direction, surrogate_j, Anchor, DescentDirection,
    DescentError, DescentTarget, GuardTarget, Objective,
};
pub use search::{
    gradient_descent, inbox, run_experiment, run_seed, sa_plus_gd, search_direction, simulated_annealing, ArmSummary, EvalError,
    Evaluation, ExperimentConfig, ExperimentSummary, GdConfig, Phase, Problem, RunRow, RunTrace, SaConfig, Scaling,
    TraceRecord,
};
pub use tl::{eval_robustness, parse_formula, Formula, PredicateSet, RobustnessResult};
