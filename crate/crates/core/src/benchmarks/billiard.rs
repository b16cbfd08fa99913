use std::f64::consts::PI;

use super::BenchmarkDef;
use crate::automaton::{Guard, HybridAutomaton, InitialMap, Invariant, Reset, Transition, VectorField};
use crate::input::{InputChannel, PiecewiseConstantInput};
use crate::space::{SearchPoint, SearchSpace};
use crate::tl::{Formula, PredicateSet};
use crate::{Matrix, Vector};

const HORIZON: f64 = 10.0;
const SPEED: f64 = 1.0;

fn flip(index: usize) -> Reset {
    let mut m = Matrix::identity(4, 4);
    m[(index, index)] = -1.0;
    Reset::linear(m)
}

/// Ball on a table with walls at `y = 0`, `y = 2` and `x = 4`. State
/// `(x, y, vx, vy)`; the single parameter is the throw angle in degrees.
pub fn make_billiard() -> BenchmarkDef {
    let mut a = Matrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    let field = VectorField::new(|x, _, _| Vector::from_vec(vec![x[2], x[3], 0.0, 0.0]))
        .with_state_jacobian(move |_, _, _| a.clone())
        .with_input_jacobian(|_, _, _| Matrix::zeros(4, 1));

    let init = InitialMap::new(
        |x0, th| {
            let a = th[0].to_radians();
            Vector::from_vec(vec![x0[0], x0[1], SPEED * a.cos(), SPEED * a.sin()])
        },
        |_, _| {
            let mut j = Matrix::zeros(4, 4);
            j[(0, 0)] = 1.0;
            j[(1, 1)] = 1.0;
            j
        },
        |_, th| {
            let a = th[0].to_radians();
            Matrix::from_column_slice(4, 1, &[0.0, 0.0, -SPEED * a.sin() * PI / 180.0, SPEED * a.cos() * PI / 180.0])
        },
    );

    let automaton = HybridAutomaton::new("billiard", 4, 1)
        .with_state_names(["x", "y", "vx", "vy"])
        .location(0, field, Invariant::always())
        .transition(Transition::new(0, 0, Guard::threshold(4, 1, 2.0, true)).with_reset(flip(3)).with_label("top"))
        .transition(Transition::new(0, 0, Guard::threshold(4, 1, 0.0, false)).with_reset(flip(3)).with_label("bottom"))
        .transition(Transition::new(0, 0, Guard::threshold(4, 0, 4.0, true)).with_reset(flip(2)).with_label("right"))
        .initial(0)
        .with_initial_map(init);

    let hole = PredicateSet::ball(vec![0, 1], vec![0.2, 1.6], 0.1).expect("valid ball");
    let requirement = Formula::eventually(0.0, HORIZON, Formula::inside(hole));
    let input = PiecewiseConstantInput::new(vec![InputChannel::constant(HORIZON, 45.0, (30.0, 45.0))])
        .expect("valid input");
    BenchmarkDef {
        name: "billiard",
        automaton,
        objective: Formula::not(requirement.clone()),
        requirement,
        space: SearchSpace::new(vec![(0.0, 0.2), (0.0, 0.2), (0.0, 0.0), (0.0, 0.0)], input),
        horizon: HORIZON,
        start: SearchPoint::new(vec![0.1, 0.1, 0.0, 0.0], vec![48.5]),
        reference: vec![("start_angle_deg", 48.5)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimOptions};

    #[test]
    fn first_bounce_matches_kinematics() {
        let b = make_billiard();
        let p = SearchPoint::new(vec![0.1, 0.1, 0.0, 0.0], vec![45.0]);
        let input = b.space.input_for(&p).unwrap();
        // this shot runs exactly into the corner (4, 0) at t ≈ 5.515
        let corner = simulate(&b.automaton, &p.x0_vector(), &input, b.horizon, &SimOptions::default());
        assert!(matches!(corner, Err(crate::SimError::SimultaneousGuards { .. })));
        let traj = simulate(&b.automaton, &p.x0_vector(), &input, 5.0, &SimOptions::default()).unwrap();
        let first = &traj.transitions[0];
        assert_eq!(b.automaton.transitions[first.transition].label, "top");
        let tau = 1.9 / 45f64.to_radians().sin();
        assert!((first.tau - tau).abs() < 1e-9);
        assert!((first.x_minus[0] - 2.0).abs() < 1e-9 && (first.x_minus[1] - 2.0).abs() < 1e-9);
        for s in &traj.samples {
            assert!((s.x[2].hypot(s.x[3]) - 1.0).abs() < 1e-9);
        }
    }
}
