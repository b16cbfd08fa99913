use serde::{Deserialize, Serialize};

use super::BenchmarkDef;
use crate::automaton::{Guard, HybridAutomaton, Invariant, Location, Transition, VectorField};
use crate::input::{InputChannel, PiecewiseConstantInput};
use crate::space::{SearchPoint, SearchSpace};
use crate::tl::{Formula, PredicateSet};
use crate::{Matrix, Vector};

const G_B: f64 = 4.5;
const I_B: f64 = 15.0;
const P2: f64 = 0.025;
const V_I: f64 = 12.0;
const N: f64 = 0.093;
const G_SWITCH: f64 = 6.0;
const PHASE_ENDS: [f64; 2] = [30.0, 120.0];
const HORIZON: f64 = 200.0;

/// Which state each infusion term drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlycemicRouting {
    /// Glucose infusion `u1` in `Ġ`, insulin infusion `u2 / V_I` in `İ`.
    Printed,
    /// The time schedule in `Ġ` and the glucose-triggered term `u1 / V_I` in `İ`.
    Swapped,
}

fn glucose_feedback(high: bool, g: f64) -> (f64, f64) {
    if high {
        (50.0 / 3.0, 0.0)
    } else {
        (1.0 + 2.0 * g / 9.0, 2.0 / 9.0)
    }
}

fn schedule(phase: usize, t: f64) -> f64 {
    match phase {
        0 => t / 60.0,
        1 => (120.0 - t) / 180.0,
        _ => 0.0,
    }
}

/// Right-hand side in location `(high, phase)`; `u = (p1, p3)`.
pub fn glycemic_rhs(routing: GlycemicRouting, high: bool, phase: usize, x: &Vector, u: &Vector, t: f64) -> Vector {
    let (g, xx, i) = (x[0], x[1], x[2]);
    let (p1, p3) = (u[0], u[1]);
    let (u1, _) = glucose_feedback(high, g);
    let u2 = schedule(phase, t);
    let (to_g, to_i) = match routing {
        GlycemicRouting::Printed => (u1, u2),
        GlycemicRouting::Swapped => (u2, u1),
    };
    Vector::from_vec(vec![-p1 * g - xx * (g + G_B) + to_g, -P2 * xx + p3 * i, -N * (i + I_B) + to_i / V_I])
}

fn field(routing: GlycemicRouting, high: bool, phase: usize) -> VectorField {
    VectorField::new(move |x, u, t| glycemic_rhs(routing, high, phase, x, u, t))
        .with_state_jacobian(move |x, u, _| {
            let (g, xx) = (x[0], x[1]);
            let (_, du1) = glucose_feedback(high, g);
            let mut a = Matrix::zeros(3, 3);
            a[(0, 0)] = -u[0] - xx;
            a[(0, 1)] = -(g + G_B);
            a[(1, 1)] = -P2;
            a[(1, 2)] = u[1];
            a[(2, 2)] = -N;
            match routing {
                GlycemicRouting::Printed => a[(0, 0)] += du1,
                GlycemicRouting::Swapped => a[(2, 0)] = du1 / V_I,
            }
            a
        })
        .with_input_jacobian(|x, _, _| {
            let mut b = Matrix::zeros(3, 2);
            b[(0, 0)] = -x[0];
            b[(1, 1)] = x[2];
            b
        })
}

fn loc(high: bool, phase: usize) -> Location {
    3 * usize::from(high) + phase
}

fn invariant(high: bool, phase: usize) -> Invariant {
    Invariant::new(move |x, t| {
        let branch = if high { x[0] - G_SWITCH } else { G_SWITCH - x[0] };
        let window = match phase {
            0 => PHASE_ENDS[0] - t,
            1 => (t - PHASE_ENDS[0]).min(PHASE_ENDS[1] - t),
            _ => t - PHASE_ENDS[1],
        };
        branch.min(window)
    })
}

/// Glucose–insulin model `(G, X, I)` with patient parameters `p1`, `p3` as
/// constant input channels. Locations are `3·branch + phase`, where branch
/// 1 means `G ≥ 6` and the phases split time at 30 and 120.
pub fn make_glycemic(routing: GlycemicRouting) -> BenchmarkDef {
    let mut ha = HybridAutomaton::new("glycemic", 3, 2).with_state_names(["G", "X", "I"]);
    for high in [false, true] {
        for phase in 0..3 {
            ha = ha.location(loc(high, phase), field(routing, high, phase), invariant(high, phase));
        }
    }
    for high in [false, true] {
        for (phase, at) in PHASE_ENDS.iter().enumerate() {
            ha = ha.transition(
                Transition::new(loc(high, phase), loc(high, phase + 1), Guard::timed(3, *at))
                    .with_label(format!("t={at}")),
            );
        }
    }
    for phase in 0..3 {
        ha = ha
            .transition(
                Transition::new(loc(false, phase), loc(true, phase), Guard::threshold(3, 0, G_SWITCH, true))
                    .with_label("G rises to 6"),
            )
            .transition(
                Transition::new(loc(true, phase), loc(false, phase), Guard::threshold(3, 0, G_SWITCH, false))
                    .with_label("G falls to 6"),
            );
    }
    let automaton = ha.initial(loc(true, 0));

    let band = |a: f64, b: f64, lo: f64, hi: f64| {
        Formula::always(a, b, Formula::inside(PredicateSet::in_box(vec![0], vec![lo], vec![hi]).expect("valid box")))
    };
    let requirement = Formula::and(vec![band(0.0, 30.0, -3.0, 10.0), band(30.0, 120.0, -1.5, 5.1), band(120.0, 200.0, 2.0, 5.0)]);
    let input = PiecewiseConstantInput::new(vec![
        InputChannel::constant(HORIZON, 0.01, (0.0, 0.02)),
        InputChannel::constant(HORIZON, 1.3e-5, (1e-5, 1e-4)),
    ])
    .expect("valid input");
    BenchmarkDef {
        name: "glycemic",
        automaton,
        objective: requirement.clone(),
        requirement,
        space: SearchSpace::new(vec![(6.0, 9.5), (0.15, 0.18), (-0.1, 0.1)], input),
        horizon: HORIZON,
        start: SearchPoint::new(vec![6.5, 0.17, 0.0], vec![0.01, 1.3e-5]),
        reference: vec![("start_robustness", 0.8287), ("final_robustness", -0.0213)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;

    #[test]
    fn structure_counts() {
        let b = make_glycemic(GlycemicRouting::Swapped);
        assert_eq!(b.automaton.locations.len(), 6);
        let timed = b.automaton.transitions.iter().filter(|t| t.guard.eval(&Vector::zeros(3), 0.0) < 0.0
            && t.guard.gradient(&Vector::zeros(3), 0.0).0.iter().all(|&v| v == 0.0)).count();
        assert_eq!(timed, 4);
        assert_eq!(b.automaton.transitions.len(), 10);
        assert_eq!(b.automaton.initial_location, 3);
    }

    #[test]
    fn rhs_at_rest_matches_symbolic_form() {
        // p1 = p3 = 0: Ġ = −X(G + G_B) + forcing
        let x = Vector::from_vec(vec![7.0, 0.16, 0.05]);
        let u = Vector::zeros(2);
        for routing in [GlycemicRouting::Printed, GlycemicRouting::Swapped] {
            let f = glycemic_rhs(routing, true, 0, &x, &u, 0.0);
            let forcing = if routing == GlycemicRouting::Printed { 50.0 / 3.0 } else { 0.0 };
            assert_eq!(f[0], -0.16 * (7.0 + G_B) + forcing);
            assert_eq!(f[1], -P2 * 0.16);
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        for routing in [GlycemicRouting::Printed, GlycemicRouting::Swapped] {
            for (high, phase) in [(false, 0), (true, 1), (false, 2)] {
                let f = field(routing, high, phase);
                let x = Vector::from_vec(vec![if high { 7.0 } else { 5.0 }, 0.16, 0.04]);
                let u = Vector::from_vec(vec![0.01, 3e-5]);
                let t = 50.0;
                let ax = fd::jacobian(|y| f.eval(y, &u, t), &x, 3);
                let bu = fd::jacobian(|v| f.eval(&x, v, t), &u, 3);
                assert!((ax - f.state_jacobian(&x, &u, t)).abs().max() < 1e-6);
                assert!((bu - f.input_jacobian(&x, &u, t)).abs().max() < 1e-6);
            }
        }
    }
}
