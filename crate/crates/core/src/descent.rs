//! Descent directions in the `(x0, θ)` search space.
//!
//! Given the critical time `t*` of a trajectory and the unit vector `n`
//! pointing from the nearest set point to `s(t*)`, the chain rule gives the
//! direction `dx0 = −c1·p_x0(t*)ᵀn`, `dθ = −c2·p_θ(t*)ᵀn`, whose first-order
//! change of `J = ‖s(t*) − z‖` is `−c1‖p_x0ᵀn‖² − c2‖p_θᵀn‖²`. Inside the set
//! both `n` and `J` change sign, so a negative robustness keeps decreasing.
//!
//! When the witness predicate is tied to a location the trajectory never
//! reaches, the target becomes the zero set of the guard leading one hop
//! closer to that location.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{GuardShape, HybridAutomaton, Location};
use crate::sensitivity::AugmentedTrajectory;
use crate::simulate::HybridTrajectory;
use crate::tl::{PredicateSet, RobustnessResult, OFF_LOCATION};
use crate::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescentError {
    #[error("gradient vanishes at the critical time (dJ = {dj})")]
    ZeroGradient { dj: f64 },
    #[error("robustness has no finite witness")]
    NoWitness,
    #[error("location {to} is unreachable from every location the trajectory visits")]
    Unreachable { to: Location },
    #[error("trajectory already visits location {0}")]
    WitnessVisited(Location),
    #[error("no state-dependent guard leads from location {0} toward the witness location")]
    NoStateGuard(Location),
}

/// What a direction descends toward.
#[derive(Debug, Clone, PartialEq)]
pub enum DescentTarget {
    /// The witness predicate set.
    Set(PredicateSet),
    /// The zero set of a transition's guard.
    Guard { transition: usize },
}

/// A point on the reference trajectory and the set point it is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub sample: usize,
    pub t: f64,
    /// Gradient of the signed distance at `s(t*)`: `±(s − z)/‖s − z‖`,
    /// negative when the anchor lies inside the set it is measured against.
    pub approach: Vector,
    /// `+1` outside, `−1` inside.
    pub sign: f64,
    /// Nearest point, embedded in state space.
    pub nearest: Vector,
    /// State components the distance is measured on.
    pub components: Vec<usize>,
    /// Location the anchor sample must be in for the distance to count.
    pub location: Option<Location>,
    pub distance: f64,
    pub target: DescentTarget,
}

impl Anchor {
    /// Anchor at the robustness witness, if it is a finite distance.
    pub fn from_robustness(rr: &RobustnessResult) -> Result<Self, DescentError> {
        let (w, (set, _)) = match (&rr.witness, &rr.p_star) {
            (Some(w), Some(p)) if !rr.is_sentinel() => (w, p),
            _ => return Err(DescentError::NoWitness),
        };
        let sign = if rr.r < 0.0 { -1.0 } else { 1.0 };
        Ok(Self {
            sample: w.sample,
            t: rr.t_star,
            approach: &rr.approach * sign,
            sign,
            nearest: rr.nearest_z.clone(),
            components: set.projection.clone(),
            location: set.location,
            distance: rr.r.abs(),
            target: DescentTarget::Set(set.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentDirection {
    pub dx0: Vector,
    pub dtheta: Vector,
    /// Predicted first-order change of `J` per unit step.
    pub dj: f64,
    pub target: DescentTarget,
    pub t_star_used: f64,
}

impl DescentDirection {
    pub fn flat(&self) -> Vec<f64> {
        self.dx0.iter().chain(self.dtheta.iter()).copied().collect()
    }
}

const ZERO_GRADIENT: f64 = 1e-14;

/// Direction from the robustness witness with explicit weights `c1`, `c2`.
pub fn descent_direction(
    aug: &AugmentedTrajectory,
    rr: &RobustnessResult,
    c1: f64,
    c2: f64,
) -> Result<DescentDirection, DescentError> {
    let anchor = Anchor::from_robustness(rr)?;
    weighted_direction(aug, &anchor, c1, c2, None)
}

/// Raw projected gradients `(p_x0ᵀn, p_θᵀn)` at the anchor.
pub fn projected_gradients(aug: &AugmentedTrajectory, anchor: &Anchor) -> (Vector, Vector) {
    let s = aug.at(anchor.sample);
    (s.p_x0.tr_mul(&anchor.approach), s.p_theta.tr_mul(&anchor.approach))
}

/// Direction with weights `c1`, `c2`; components where `free` is false are zeroed.
pub fn weighted_direction(
    aug: &AugmentedTrajectory,
    anchor: &Anchor,
    c1: f64,
    c2: f64,
    free: Option<&[bool]>,
) -> Result<DescentDirection, DescentError> {
    let (mut gx, mut gt) = projected_gradients(aug, anchor);
    if let Some(mask) = free {
        let n = gx.len();
        for (i, &f) in mask.iter().enumerate() {
            if !f {
                if i < n {
                    gx[i] = 0.0;
                } else {
                    gt[i - n] = 0.0;
                }
            }
        }
    }
    let dj = -c1 * gx.norm_squared() - c2 * gt.norm_squared();
    if dj.abs() <= ZERO_GRADIENT || !dj.is_finite() {
        return Err(DescentError::ZeroGradient { dj });
    }
    Ok(DescentDirection {
        dx0: -gx * c1,
        dtheta: -gt * c2,
        dj,
        target: anchor.target.clone(),
        t_star_used: anchor.t,
    })
}

/// Direction scaled so that its largest free component has magnitude one.
pub fn normalized_direction(
    aug: &AugmentedTrajectory,
    anchor: &Anchor,
    free: &[bool],
) -> Result<DescentDirection, DescentError> {
    let raw = weighted_direction(aug, anchor, 1.0, 1.0, Some(free))?;
    let scale = raw.flat().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = 1.0 / scale;
    Ok(DescentDirection { dx0: raw.dx0 * c, dtheta: raw.dtheta * c, dj: raw.dj * c, ..raw })
}

/// State of `traj` at exactly `t`, preferring samples in `loc`, with linear
/// interpolation between neighbours when `t` is not a sample time.
pub fn state_at(traj: &HybridTrajectory, t: f64, loc: Option<Location>) -> Option<(Vector, Location)> {
    let at = traj.sample_indices_at(t);
    if !at.is_empty() {
        let pick = at.clone().find(|&i| loc.is_none_or(|l| traj.samples[i].loc == l)).unwrap_or(at.start);
        let s = &traj.samples[pick];
        return Some((s.x.clone(), s.loc));
    }
    let hi = at.start;
    if hi == 0 || hi >= traj.samples.len() {
        return None;
    }
    let (a, b) = (&traj.samples[hi - 1], &traj.samples[hi]);
    let w = (t - a.t) / (b.t - a.t);
    Some((&a.x * (1.0 - w) + &b.x * w, a.loc))
}

/// `J = ‖s'(t*) − z‖` over the constrained components, or the off-location
/// sentinel if `traj_new` is not in `l_witness` at `t*`.
pub fn surrogate_j(
    traj_new: &HybridTrajectory,
    z: &Vector,
    components: &[usize],
    t_star: f64,
    l_witness: Option<Location>,
) -> f64 {
    let Some((x, loc)) = state_at(traj_new, t_star, l_witness) else {
        return OFF_LOCATION;
    };
    if l_witness.is_some_and(|l| l != loc) {
        return OFF_LOCATION;
    }
    components.iter().map(|&i| (x[i] - z[i]).powi(2)).sum::<f64>().sqrt()
}

/// Surrogate cost of a new trajectory against a reference anchor, signed
/// like the anchor's robustness.
pub fn anchor_j(ha: &HybridAutomaton, traj_new: &HybridTrajectory, anchor: &Anchor) -> f64 {
    match anchor.target {
        DescentTarget::Set(_) => {
            let j = surrogate_j(traj_new, &anchor.nearest, &anchor.components, anchor.t, anchor.location);
            if j >= OFF_LOCATION {
                j
            } else {
                anchor.sign * j
            }
        }
        DescentTarget::Guard { transition } => {
            let Some((x, loc)) = state_at(traj_new, anchor.t, anchor.location) else {
                return OFF_LOCATION;
            };
            if anchor.location.is_some_and(|l| l != loc) {
                return OFF_LOCATION;
            }
            guard_projection(ha, transition, &x, anchor.t).0
        }
    }
}

/// Distance from `x` to the zero set of a transition's guard at time `t`, and the nearest point.
pub fn guard_projection(ha: &HybridAutomaton, transition: usize, x: &Vector, t: f64) -> (f64, Vector) {
    let guard = &ha.transitions[transition].guard;
    match guard.shape() {
        GuardShape::Affine { normal, time_coeff, offset } => {
            let nn = normal.norm_squared();
            if nn == 0.0 {
                return (f64::INFINITY, x.clone());
            }
            let g = normal.dot(x) + time_coeff * t - offset;
            (g.abs() / nn.sqrt(), x - normal * (g / nn))
        }
        GuardShape::Sphere { indices, center, radius, .. } => {
            let d: f64 = indices.iter().zip(center).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>().sqrt();
            let mut z = x.clone();
            for (&i, c) in indices.iter().zip(center) {
                z[i] = if d > 0.0 { c + radius * (x[i] - c) / d } else { c + if i == indices[0] { *radius } else { 0.0 } };
            }
            ((d - radius).abs(), z)
        }
        GuardShape::General => {
            // Gauss–Newton steps onto g = 0
            let mut z = x.clone();
            for _ in 0..50 {
                let g = guard.eval(&z, t);
                let (gx, _) = guard.gradient(&z, t);
                let nn = gx.norm_squared();
                if nn == 0.0 {
                    return (f64::INFINITY, x.clone());
                }
                let step = gx * (g / nn);
                z -= &step;
                if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                    break;
                }
            }
            ((x - &z).norm(), z)
        }
    }
}

/// Guard to descend toward when the trajectory misses the witness location.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardTarget {
    pub transition: usize,
    pub source: Location,
    /// Hops from `source` to the witness location.
    pub hops: usize,
    pub anchor: Anchor,
}

/// Pick the guard on a shortest location path from the last visited location
/// that can still reach `l_witness`, and the closest approach to its zero set.
pub fn guard_fallback_target(
    ha: &HybridAutomaton,
    traj: &HybridTrajectory,
    l_witness: Location,
) -> Result<GuardTarget, DescentError> {
    if traj.visits(l_witness) {
        return Err(DescentError::WitnessVisited(l_witness));
    }
    let hops = ha.hops_to(l_witness);
    let source = traj
        .location_sequence()
        .into_iter()
        .rev()
        .find(|l| hops.contains_key(l))
        .ok_or(DescentError::Unreachable { to: l_witness })?;
    let depth = hops[&source];
    let mut best: Option<(f64, usize, usize, Vector)> = None;
    for (idx, tr) in ha.outgoing(source) {
        if hops.get(&tr.target) != Some(&(depth - 1)) {
            continue;
        }
        for (i, s) in traj.samples.iter().enumerate().filter(|(_, s)| s.loc == source) {
            let (d, z) = guard_projection(ha, idx, &s.x, s.t);
            if d.is_finite() && best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, idx, i, z));
            }
        }
    }
    let (distance, transition, sample, nearest) = best.ok_or(DescentError::NoStateGuard(source))?;
    let s = &traj.samples[sample];
    let diff = &s.x - &nearest;
    let norm = diff.norm();
    let approach = if norm > 0.0 { diff / norm } else { Vector::zeros(s.x.len()) };
    Ok(GuardTarget {
        transition,
        source,
        hops: depth,
        anchor: Anchor {
            sample,
            t: s.t,
            approach,
            sign: 1.0,
            nearest,
            components: (0..s.x.len()).collect(),
            location: Some(source),
            distance,
            target: DescentTarget::Guard { transition },
        },
    })
}

/// Search objective: a finite robustness value beats any guard fallback,
/// and fallbacks compare by hops left, then distance to the guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    Finite(f64),
    Fallback { hops: usize, distance: f64 },
}

impl Objective {
    pub fn robustness(&self) -> f64 {
        match self {
            Objective::Finite(r) => *r,
            Objective::Fallback { .. } => OFF_LOCATION,
        }
    }
}

impl PartialOrd for Objective {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Objective::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), Fallback { .. }) => Some(Ordering::Less),
            (Fallback { .. }, Finite(_)) => Some(Ordering::Greater),
            (Fallback { hops: h1, distance: d1 }, Fallback { hops: h2, distance: d2 }) => match h1.cmp(h2) {
                Ordering::Equal => d1.partial_cmp(d2),
                o => Some(o),
            },
        }
    }
}
