//! The three example systems: a bouncing billiard ball, a glycemic control
//! loop and a planar vehicle with off-centre thrusters.

mod billiard;
mod glycemic;
mod vehicle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::HybridAutomaton;
use crate::search::Problem;
use crate::simulate::SimOptions;
use crate::space::{SearchPoint, SearchSpace};
use crate::tl::Formula;

pub use billiard::make_billiard;
pub use glycemic::{glycemic_rhs, make_glycemic, GlycemicRouting};
pub use vehicle::{make_planar_vehicle, vehicle_rhs, VehicleGeometry};

pub const NAMES: [&str; 3] = ["billiard", "glycemic", "vehicle"];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown model `{0}` (available: billiard, glycemic, vehicle)")]
pub struct UnknownModel(pub String);

/// A registered model with its requirement and search space.
#[derive(Debug, Clone)]
pub struct BenchmarkDef {
    pub name: &'static str,
    pub automaton: HybridAutomaton,
    /// The requirement as stated.
    pub requirement: Formula,
    /// The formula the search minimizes: the requirement itself for
    /// falsification, its negation when the aim is to satisfy it.
    pub objective: Formula,
    pub space: SearchSpace,
    pub horizon: f64,
    /// Demonstration start point; may lie outside `space`.
    pub start: SearchPoint,
    /// Published values used as acceptance references.
    pub reference: Vec<(&'static str, f64)>,
}

impl BenchmarkDef {
    pub fn reference(&self, key: &str) -> Option<f64> {
        self.reference.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn problem(&self, sim: SimOptions) -> Problem {
        self.problem_with(self.objective.clone(), sim)
    }

    pub fn problem_with(&self, formula: Formula, sim: SimOptions) -> Problem {
        Problem { automaton: self.automaton.clone(), formula, space: self.space.clone(), horizon: self.horizon, sim }
    }
}

/// Model variants selectable from the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Vehicle: heading angle in the thrust terms and `0.1·x5` damping.
    pub corrected_dynamics: bool,
    /// Glycemic: route `u1` into `Ġ` and `u2` into `İ` as printed.
    pub printed_glycemic_routing: bool,
    pub vehicle_geometry: VehicleGeometry,
    /// Vehicle: tie each region to the location it lies in.
    pub located_vehicle_sets: bool,
}

pub fn by_name(name: &str, opts: &BenchmarkOptions) -> Result<BenchmarkDef, UnknownModel> {
    match name {
        "billiard" => Ok(make_billiard()),
        "glycemic" => Ok(make_glycemic(if opts.printed_glycemic_routing {
            GlycemicRouting::Printed
        } else {
            GlycemicRouting::Swapped
        })),
        "vehicle" => Ok(make_planar_vehicle(opts.corrected_dynamics, opts.vehicle_geometry, opts.located_vehicle_sets)),
        other => Err(UnknownModel(other.to_string())),
    }
}
