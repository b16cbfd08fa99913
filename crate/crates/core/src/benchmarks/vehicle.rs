use serde::{Deserialize, Serialize};

use super::BenchmarkDef;
use crate::automaton::{Guard, HybridAutomaton, Invariant, Location, Transition, VectorField};
use crate::input::{InputChannel, PiecewiseConstantInput};
use crate::space::{SearchPoint, SearchSpace};
use crate::tl::{Formula, PredicateSet};
use crate::{Matrix, Vector};

const HORIZON: f64 = 10.0;
const SEGMENTS: usize = 11;
const CENTERS: [(f64, f64); 2] = [(6.0, 3.0), (10.0, 3.0)];

/// Thruster offsets `a`, `b` and moment of inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub a: f64,
    pub b: f64,
    pub inertia: f64,
}

impl Default for VehicleGeometry {
    fn default() -> Self {
        Self { a: 0.25, b: 0.25, inertia: 1.0 }
    }
}

fn attraction(l: Location) -> (f64, f64) {
    match l {
        2 => (-1.0, 0.0),
        3 => (0.0, -2.0),
        _ => (0.0, 0.0),
    }
}

/// `(angle index, damping index of the ẋ5 row)`.
fn indices(corrected: bool) -> (usize, usize) {
    if corrected {
        (2, 4)
    } else {
        (4, 3)
    }
}

/// Right-hand side in location `l`; `u = (F1, F2)`.
pub fn vehicle_rhs(corrected: bool, geom: VehicleGeometry, l: Location, x: &Vector, u: &Vector) -> Vector {
    let (s1, s2) = attraction(l);
    let (q, d) = indices(corrected);
    let (c, s) = (x[q].cos(), x[q].sin());
    let (f1, f2) = (u[0], u[1]);
    let pull_x = s1 * (x[0] - CENTERS[0].0) + s2 * (x[0] - CENTERS[1].0);
    let pull_y = s1 * (x[1] - CENTERS[0].1) + s2 * (x[1] - CENTERS[1].1);
    Vector::from_vec(vec![
        x[3],
        x[4],
        x[5],
        0.1 * x[3] + pull_x + f1 * c - f2 * s,
        0.1 * x[d] + pull_y + f1 * s - f2 * c,
        (-geom.b * f1 + geom.a * f2) / geom.inertia,
    ])
}

fn field(corrected: bool, geom: VehicleGeometry, l: Location) -> VectorField {
    let (s1, s2) = attraction(l);
    let (q, d) = indices(corrected);
    VectorField::new(move |x, u, _| vehicle_rhs(corrected, geom, l, x, u))
        .with_state_jacobian(move |x, u, _| {
            let (c, s) = (x[q].cos(), x[q].sin());
            let (f1, f2) = (u[0], u[1]);
            let mut a = Matrix::zeros(6, 6);
            for j in 0..3 {
                a[(j, j + 3)] = 1.0;
            }
            a[(3, 0)] = s1 + s2;
            a[(3, 3)] += 0.1;
            a[(3, q)] += -f1 * s - f2 * c;
            a[(4, 1)] = s1 + s2;
            a[(4, d)] += 0.1;
            a[(4, q)] += f1 * c + f2 * s;
            a
        })
        .with_input_jacobian(move |x, _, _| {
            let (c, s) = (x[q].cos(), x[q].sin());
            Matrix::from_row_slice(
                6,
                2,
                &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, c, -s, s, -c, -geom.b / geom.inertia, geom.a / geom.inertia],
            )
        })
}

fn region(lo: [f64; 2], hi: [f64; 2]) -> PredicateSet {
    PredicateSet::in_box(vec![0, 1], lo.to_vec(), hi.to_vec()).expect("valid box")
}

/// Planar vehicle `(x1, x2, x3, ẋ1, ẋ2, ẋ3)` driven by two thrusters, with
/// locations 1, 2, 3 split at `x1 = 4` and `x1 = 8`. `corrected` selects the
/// heading-angle reading of the thrust terms; `located` ties each region to
/// its location.
pub fn make_planar_vehicle(corrected: bool, geom: VehicleGeometry, located: bool) -> BenchmarkDef {
    let line = |level: f64, increasing: bool| Guard::threshold(6, 0, level, increasing);
    let automaton = HybridAutomaton::new("vehicle", 6, 2)
        .location(1, field(corrected, geom, 1), Invariant::new(|x, _| 4.0 - x[0]))
        .location(2, field(corrected, geom, 2), Invariant::new(|x, _| (x[0] - 4.0).min(8.0 - x[0])))
        .location(3, field(corrected, geom, 3), Invariant::new(|x, _| x[0] - 8.0))
        .transition(Transition::new(1, 2, line(4.0, true)))
        .transition(Transition::new(2, 1, line(4.0, false)))
        .transition(Transition::new(2, 3, line(8.0, true)))
        .transition(Transition::new(3, 2, line(8.0, false)))
        .initial(1);

    let mut u1 = region([5.5, 2.5], [6.5, 3.5]);
    let mut u2 = region([9.5, 1.5], [10.5, 4.5]);
    let mut goal = region([12.5, 4.5], [13.0, 5.0]);
    if located {
        u1 = u1.at_location(2);
        u2 = u2.at_location(3);
        goal = goal.at_location(3);
    }
    let requirement = Formula::and(vec![
        Formula::always(0.0, HORIZON, Formula::not(Formula::or(vec![Formula::inside(u1), Formula::inside(u2)]))),
        Formula::eventually(0.0, HORIZON, Formula::inside(goal)),
    ]);

    let f1 = InputChannel::uniform(SEGMENTS, HORIZON, 0.2, (-1.0, 1.0));
    let mut f2 = InputChannel::uniform(SEGMENTS, HORIZON, 0.1, (-1.0, 1.0));
    // the second thruster reverses after t = 7.2
    for (v, &t) in f2.values.iter_mut().zip(&f2.grid) {
        if t > 7.2 {
            *v = -0.2;
        }
    }
    let input = PiecewiseConstantInput::new(vec![f1, f2]).expect("valid input");
    let mut x0_bounds = vec![(0.0, 1.0), (0.5, 1.0)];
    x0_bounds.extend([(0.0, 0.0); 4]);
    BenchmarkDef {
        name: "vehicle",
        automaton,
        objective: Formula::not(requirement.clone()),
        requirement,
        start: SearchPoint::new(vec![0.5, 0.6, 0.0, 0.0, 0.0, 0.0], input.flatten()),
        space: SearchSpace::new(x0_bounds, input),
        horizon: HORIZON,
        reference: vec![("start_robustness", 0.2950), ("improved_robustness", 0.8599)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;

    #[test]
    fn search_dimension_and_start_inputs() {
        let b = make_planar_vehicle(false, VehicleGeometry::default(), false);
        assert_eq!(b.space.search_dim(), 24);
        let f2 = &b.start.theta[SEGMENTS..];
        assert!(f2[..8].iter().all(|&v| v == 0.1));
        assert!(f2[8..].iter().all(|&v| v == -0.2));
    }

    #[test]
    fn free_drift_in_first_location() {
        let x = Vector::from_vec(vec![1.0, 2.0, 0.3, 0.5, -0.4, 0.2]);
        let u = Vector::zeros(2);
        let f = vehicle_rhs(false, VehicleGeometry::default(), 1, &x, &u);
        assert_eq!(f.as_slice(), &[0.5, -0.4, 0.2, 0.05, 0.05, 0.0]);
        let g = vehicle_rhs(true, VehicleGeometry::default(), 1, &x, &u);
        assert_eq!(g.as_slice(), &[0.5, -0.4, 0.2, 0.05, -0.04000000000000001, 0.0]);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        for corrected in [false, true] {
            for l in 1..=3 {
                let f = field(corrected, VehicleGeometry::default(), l);
                let x = Vector::from_vec(vec![5.0, 2.0, 0.3, 0.5, -0.4, 0.2]);
                let u = Vector::from_vec(vec![0.3, -0.7]);
                let ax = fd::jacobian(|y| f.eval(y, &u, 0.0), &x, 6);
                let bu = fd::jacobian(|v| f.eval(&x, v, 0.0), &u, 6);
                assert!((ax - f.state_jacobian(&x, &u, 0.0)).abs().max() < 1e-6);
                assert!((bu - f.input_jacobian(&x, &u, 0.0)).abs().max() < 1e-6);
            }
        }
    }
}
