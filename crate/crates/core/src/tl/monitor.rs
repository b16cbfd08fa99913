//! Discrete-time robust semantics with witness tracking.
//!
//! Every subformula is evaluated to a signal over the trajectory's samples.
//! Each value carries the sample and leaf predicate it came from, so the top
//! level value points at the critical time and predicate. Ties go to the
//! earlier sample and, within a boolean node, to the earlier operand.

use std::collections::VecDeque;

use crate::automaton::Location;
use crate::simulate::{HybridTrajectory, Sample};
use crate::tl::predicate::{predicate_value, signed_distance_with_point, Polarity, PredicateSet, OFF_LOCATION};
use crate::tl::{Formula, TlError};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    pub sample: usize,
    pub leaf: usize,
    /// True when an odd number of negations sit above the leaf.
    pub negated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Val {
    v: f64,
    w: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    pub r: f64,
    pub t_star: f64,
    pub witness: Option<Witness>,
    /// Witness predicate and its polarity after negations are pushed down.
    pub p_star: Option<(PredicateSet, Polarity)>,
    /// Unit vector `(s(t*) − z)/‖s(t*) − z‖` in state space, zero where undefined.
    pub approach: Vector,
    /// Nearest point of the witness set (or of its boundary from inside),
    /// embedded in state space with unconstrained components taken from `s(t*)`.
    pub nearest_z: Vector,
}

impl RobustnessResult {
    /// The value is an off-location or empty-window placeholder, not a distance.
    pub fn is_sentinel(&self) -> bool {
        !self.r.is_finite() || self.r.abs() >= OFF_LOCATION
    }

    pub fn witness_location(&self) -> Option<Location> {
        self.p_star.as_ref().and_then(|(s, _)| s.location)
    }

    pub fn falsified(&self) -> bool {
        self.r <= 0.0
    }
}

/// Robustness at the first sample.
pub fn eval_robustness(phi: &Formula, traj: &HybridTrajectory) -> Result<RobustnessResult, TlError> {
    if let Some(first) = traj.samples.first() {
        phi.check(traj.final_time, first.x.len())?;
    }
    eval_samples(phi, &traj.samples)
}

/// Like [`eval_robustness`] on a bare sample list; interval bounds are not checked.
pub fn eval_samples(phi: &Formula, samples: &[Sample]) -> Result<RobustnessResult, TlError> {
    if samples.is_empty() {
        return Err(TlError::EmptyTrajectory);
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut leaf = 0;
    let top = eval_node(phi, samples, &times, &mut leaf)[0];
    let n = samples[0].x.len();
    let leaves = phi.leaves();
    let mut res = RobustnessResult {
        r: top.v,
        t_star: 0.0,
        witness: top.w,
        p_star: None,
        approach: Vector::zeros(n),
        nearest_z: samples[0].x.clone(),
    };
    if let Some(w) = top.w {
        let (set, pol) = leaves[w.leaf];
        let eff = if w.negated { pol.flip() } else { pol };
        let s = &samples[w.sample];
        res.t_star = s.t;
        res.p_star = Some((set.clone(), eff));
        res.nearest_z = s.x.clone();
        if !res.is_sentinel() {
            let (_, z) = signed_distance_with_point(&s.x, set, eff);
            let z_full = set.embed(&s.x, &z);
            let diff = &s.x - &z_full;
            let norm = diff.norm();
            if norm > 0.0 {
                res.approach = diff / norm;
            }
            res.nearest_z = z_full;
        }
    }
    Ok(res)
}

/// Robustness of `phi` at every sample.
pub fn robustness_signal(phi: &Formula, samples: &[Sample]) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut leaf = 0;
    eval_node(phi, samples, &times, &mut leaf).into_iter().map(|v| v.v).collect()
}

fn eval_node(f: &Formula, samples: &[Sample], times: &[f64], leaf: &mut usize) -> Vec<Val> {
    match f {
        Formula::Pred { set, polarity } => {
            let id = *leaf;
            *leaf += 1;
            samples
                .iter()
                .enumerate()
                .map(|(i, s)| Val {
                    v: predicate_value(&s.x, s.loc, set, *polarity),
                    w: Some(Witness { sample: i, leaf: id, negated: false }),
                })
                .collect()
        }
        Formula::Not(g) => negate(eval_node(g, samples, times, leaf)),
        Formula::And(gs) | Formula::Or(gs) => {
            let is_and = matches!(f, Formula::And(_));
            let empty = Val { v: if is_and { f64::INFINITY } else { f64::NEG_INFINITY }, w: None };
            let mut acc = vec![empty; samples.len()];
            for g in gs {
                let sig = eval_node(g, samples, times, leaf);
                for (a, b) in acc.iter_mut().zip(sig) {
                    if (is_and && b.v < a.v) || (!is_and && b.v > a.v) || a.w.is_none() && b.v == a.v {
                        *a = b;
                    }
                }
            }
            acc
        }
        Formula::Implies(a, b) => {
            let na = negate(eval_node(a, samples, times, leaf));
            let sb = eval_node(b, samples, times, leaf);
            na.into_iter().zip(sb).map(|(x, y)| if y.v > x.v { y } else { x }).collect()
        }
        Formula::Always { a, b, body } => {
            let sig = eval_node(body, samples, times, leaf);
            window(&sig, times, *a, *b, true)
        }
        Formula::Eventually { a, b, body } => {
            let sig = eval_node(body, samples, times, leaf);
            window(&sig, times, *a, *b, false)
        }
    }
}

fn negate(sig: Vec<Val>) -> Vec<Val> {
    sig.into_iter()
        .map(|x| Val { v: -x.v, w: x.w.map(|w| Witness { negated: !w.negated, ..w }) })
        .collect()
}

/// Sliding min (or max) over samples with `t_i + a ≤ t_j ≤ t_i + b`.
fn window(sig: &[Val], times: &[f64], a: f64, b: f64, min: bool) -> Vec<Val> {
    let n = sig.len();
    let empty = Val { v: if min { f64::INFINITY } else { f64::NEG_INFINITY }, w: None };
    let worse = |old: f64, new: f64| if min { old > new } else { old < new };
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut hi = 0;
    for &ti in times {
        let start = ti + a;
        let end = ti + b;
        while hi < n && times[hi] <= end {
            while let Some(&back) = dq.back() {
                if worse(sig[back].v, sig[hi].v) {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(hi);
            hi += 1;
        }
        while let Some(&front) = dq.front() {
            if times[front] < start {
                dq.pop_front();
            } else {
                break;
            }
        }
        out.push(dq.front().map_or(empty, |&j| sig[j]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tl::PredicateSet;

    fn scalar_traj(values: &[f64], dt: f64) -> Vec<Sample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample { t: i as f64 * dt, loc: 0, x: Vector::from_element(1, v) })
            .collect()
    }

    #[test]
    fn constant_signal_in_symmetric_band() {
        let alpha = 2.5;
        let samples = scalar_traj(&[1.0; 11], 0.1);
        let band = PredicateSet::in_box(vec![0], vec![-alpha], vec![alpha]).unwrap();
        let phi = Formula::always(0.0, 1.0, Formula::inside(band));
        let res = eval_samples(&phi, &samples).unwrap();
        assert_eq!(res.r, alpha - 1.0);
        assert_eq!(res.t_star, 0.0);
        assert_eq!(res.approach, Vector::from_element(1, -1.0));
        assert_eq!(res.nearest_z[0], alpha);
    }

    #[test]
    fn witness_is_earliest_extremum() {
        let samples = scalar_traj(&[3.0, 1.0, 2.0, 1.0, 5.0], 1.0);
        let set = PredicateSet::in_box(vec![0], vec![0.0], vec![0.5]).unwrap();
        let phi = Formula::always(0.0, 4.0, Formula::outside(set));
        let res = eval_samples(&phi, &samples).unwrap();
        assert_eq!(res.r, 0.5);
        assert_eq!(res.witness.unwrap().sample, 1);
        assert_eq!(res.t_star, 1.0);
    }

    #[test]
    fn negation_flips_witness_polarity() {
        let samples = scalar_traj(&[3.0, 1.0, 2.0], 1.0);
        let set = PredicateSet::in_box(vec![0], vec![0.0], vec![0.5]).unwrap();
        let phi = Formula::not(Formula::eventually(0.0, 2.0, Formula::inside(set)));
        let res = eval_samples(&phi, &samples).unwrap();
        assert_eq!(res.r, 0.5);
        assert_eq!(res.p_star.unwrap().1, Polarity::Out);
        assert!(res.witness.unwrap().negated);
    }

    #[test]
    fn empty_window_gives_infinity() {
        let samples = scalar_traj(&[1.0, 2.0], 1.0);
        let set = PredicateSet::in_box(vec![0], vec![0.0], vec![0.5]).unwrap();
        let phi = Formula::always(0.2, 0.4, Formula::outside(set));
        let res = eval_samples(&phi, &samples).unwrap();
        assert_eq!(res.r, f64::INFINITY);
        assert!(res.is_sentinel());
        assert!(res.witness.is_none());
    }

    #[test]
    fn location_constrained_witness_is_sentinel() {
        let samples = scalar_traj(&[1.0, 2.0], 1.0);
        let set = PredicateSet::in_box(vec![0], vec![5.0], vec![6.0]).unwrap().at_location(3);
        let res = eval_samples(&Formula::always(0.0, 1.0, Formula::outside(set)), &samples).unwrap();
        assert_eq!(res.r, OFF_LOCATION);
        assert!(res.is_sentinel());
        assert_eq!(res.witness_location(), Some(3));
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let set = PredicateSet::in_box(vec![0], vec![0.0], vec![0.5]).unwrap();
        assert_eq!(eval_samples(&Formula::inside(set), &[]).unwrap_err(), TlError::EmptyTrajectory);
    }
}
