use serde::{Deserialize, Serialize};

use super::{Evaluation, Phase, Problem, RunTrace, TraceRecord};
use crate::descent::{anchor_j, normalized_direction, weighted_direction, DescentDirection, DescentError, Objective};
use crate::space::{SearchPoint, SearchSpace};

/// How the raw gradient is scaled into a step direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Largest movable component has magnitude one.
    InfNorm,
    /// Fixed weights on the `x0` and `θ` blocks.
    Weights { c1: f64, c2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub h: f64,
    /// Outer iterations.
    pub k1: usize,
    /// Step shrinks per iteration.
    pub k2: usize,
    /// Shrink factor.
    pub p: f64,
    pub scaling: Scaling,
    /// Stop as soon as the robustness is nonpositive. Off when the aim is to
    /// push an already satisfied negated formula deeper.
    pub stop_on_falsification: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { h: 0.02, k1: 10, k2: 2, p: 0.5, scaling: Scaling::InfNorm, stop_on_falsification: true }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(format!("step size h must be positive, got {}", self.h));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(format!("shrink factor p must lie in (0, 1), got {}", self.p));
        }
        if self.k1 == 0 || self.k2 == 0 {
            return Err("k1 and k2 must be at least 1".into());
        }
        Ok(())
    }

    /// Largest number of simulations one run can make, start point included.
    pub fn max_sims(&self) -> usize {
        1 + self.k1 * (1 + self.k2)
    }
}

/// `point + h·dir`, clamped to the search box.
pub fn inbox(point: &SearchPoint, dir: &DescentDirection, h: f64, space: &SearchSpace) -> SearchPoint {
    let moved = SearchPoint {
        x0: point.x0.iter().zip(dir.dx0.iter()).map(|(a, d)| a + h * d).collect(),
        theta: point.theta.iter().zip(dir.dtheta.iter()).map(|(a, d)| a + h * d).collect(),
    };
    space.clamp(&moved)
}

/// The step direction the descent takes from `ev`: free components only,
/// with components pinned at a face they would push through also held.
pub fn search_direction(problem: &Problem, ev: &Evaluation, cfg: &GdConfig) -> Result<DescentDirection, DescentError> {
    let anchor = ev.anchor()?;
    let bounds = problem.space.bounds();
    let free = problem.space.free_mask();
    let raw = weighted_direction(&ev.aug, &anchor, 1.0, 1.0, Some(&free))?;
    let flat = ev.point.flat();
    let movable: Vec<bool> = raw
        .flat()
        .iter()
        .zip(flat.iter().zip(&bounds))
        .zip(&free)
        .map(|((d, (v, (lo, hi))), &f)| f && !(*d < 0.0 && v <= lo) && !(*d > 0.0 && v >= hi))
        .collect();
    match cfg.scaling {
        Scaling::InfNorm => normalized_direction(&ev.aug, &anchor, &movable),
        Scaling::Weights { c1, c2 } => weighted_direction(&ev.aug, &anchor, c1, c2, Some(&movable)),
    }
}

fn same_transitions(incumbent: &Evaluation, candidate: &Evaluation) -> bool {
    let (a, b) = (incumbent.switching(), candidate.switching());
    match incumbent.objective {
        Objective::Finite(_) => a == b,
        // while steering toward a guard, the path may grow past it
        Objective::Fallback { .. } => b.starts_with(&a),
    }
}

fn is_done(ev: &Evaluation, cfg: &GdConfig) -> bool {
    cfg.stop_on_falsification && ev.r() <= 0.0
}

pub(crate) fn record_for(ev: &Evaluation, sim: usize, phase: Phase, iteration: usize) -> TraceRecord {
    TraceRecord {
        sim,
        phase,
        iteration,
        attempt: 0,
        point: ev.point.clone(),
        r: Some(ev.r()),
        r_incumbent: None,
        objective: Some(ev.objective),
        t_star: Some(ev.robustness.t_star),
        step: 0.0,
        accepted: true,
        switching: ev.switching(),
        j: None,
        dj: None,
        note: None,
    }
}

/// Descend from an already simulated start. `budget` caps the further
/// simulations; returns the best evaluation reached.
pub(crate) fn descend(
    problem: &Problem,
    start: Evaluation,
    cfg: &GdConfig,
    budget: usize,
    trace: &mut RunTrace,
) -> (Evaluation, String) {
    let mut inc = start;
    let mut used = 0;
    if is_done(&inc, cfg) {
        return (inc, "falsified".into());
    }
    for iteration in 1..=cfg.k1 {
        let dir = match search_direction(problem, &inc, cfg) {
            Ok(d) => d,
            Err(e @ DescentError::ZeroGradient { .. }) => return (inc, format!("zero gradient: {e}")),
            Err(e) => return (inc, format!("no direction: {e}")),
        };
        let anchor = inc.anchor().expect("direction had an anchor");
        let mut h = cfg.h;
        let mut accepted = None;
        for attempt in 0..=cfg.k2 {
            if used >= budget {
                return (inc, "budget exhausted".into());
            }
            let cand = inbox(&inc.point, &dir, h, &problem.space);
            if cand == inc.point {
                return (inc, "step does not move the point".into());
            }
            used += 1;
            trace.sims += 1;
            let mut rec = TraceRecord {
                sim: trace.sims,
                phase: Phase::Gd,
                iteration,
                attempt,
                point: cand.clone(),
                r: None,
                r_incumbent: Some(inc.r()),
                objective: None,
                t_star: None,
                step: h,
                accepted: false,
                switching: vec![],
                j: None,
                dj: Some(dir.dj),
                note: None,
            };
            match problem.evaluate(&cand, true) {
                Ok(ev) => {
                    rec.r = Some(ev.r());
                    rec.objective = Some(ev.objective);
                    rec.t_star = Some(ev.robustness.t_star);
                    rec.switching = ev.switching();
                    rec.j = Some(anchor_j(&problem.automaton, &ev.aug.base, &anchor));
                    if !same_transitions(&inc, &ev) {
                        rec.note = Some("switching sequence changed".into());
                    } else if ev.objective <= inc.objective {
                        rec.accepted = true;
                    } else {
                        rec.note = Some("no improvement".into());
                    }
                    let ok = rec.accepted;
                    trace.records.push(rec);
                    if ok {
                        trace.offer(&ev);
                        accepted = Some(ev);
                        break;
                    }
                }
                Err(e) => {
                    rec.note = Some(e.to_string());
                    trace.records.push(rec);
                }
            }
            h *= cfg.p;
        }
        match accepted {
            Some(ev) => {
                inc = ev;
                if is_done(&inc, cfg) {
                    return (inc, "falsified".into());
                }
            }
            None => return (inc, "local minimum: every shrunk step was rejected".into()),
        }
    }
    (inc, "iteration limit".into())
}

/// Robustness gradient descent from `start`.
pub fn gradient_descent(problem: &Problem, start: &SearchPoint, cfg: &GdConfig) -> RunTrace {
    let mut trace = RunTrace::new("gd", None, start);
    trace.sims = 1;
    match problem.evaluate(start, true) {
        Ok(ev) => {
            trace.records.push(record_for(&ev, 1, Phase::Gd, 0));
            trace.offer(&ev);
            let (_, stop) = descend(problem, ev, cfg, cfg.max_sims() - 1, &mut trace);
            trace.stop = stop;
        }
        Err(e) => {
            trace.records.push(TraceRecord {
                sim: 1,
                phase: Phase::Gd,
                iteration: 0,
                attempt: 0,
                point: start.clone(),
                r: None,
                r_incumbent: None,
                objective: None,
                t_star: None,
                step: 0.0,
                accepted: false,
                switching: vec![],
                j: None,
                dj: None,
                note: Some(e.to_string()),
            });
            trace.stop = format!("start point failed to simulate: {e}");
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{InputChannel, PiecewiseConstantInput};
    use crate::Vector;

    fn space() -> SearchSpace {
        SearchSpace::new(
            vec![(0.0, 1.0), (0.0, 1.0)],
            PiecewiseConstantInput::new(vec![InputChannel::constant(1.0, 0.0, (-1.0, 1.0))]).unwrap(),
        )
    }

    fn dir(dx: [f64; 2], dt: f64) -> DescentDirection {
        DescentDirection {
            dx0: Vector::from_vec(dx.to_vec()),
            dtheta: Vector::from_element(1, dt),
            dj: -1.0,
            target: crate::descent::DescentTarget::Guard { transition: 0 },
            t_star_used: 0.0,
        }
    }

    #[test]
    fn inbox_cases() {
        let s = space();
        let p = SearchPoint::new(vec![0.5, 0.5], vec![0.0]);
        let d = dir([1.0, -1.0], 0.5);
        assert_eq!(inbox(&p, &d, 0.1, &s), SearchPoint::new(vec![0.6, 0.4], vec![0.05]));
        let out = inbox(&p, &d, 0.8, &s);
        assert_eq!(out.x0, vec![1.0, 0.0]);
        assert_eq!(out.theta, vec![0.4]);
        assert_eq!(inbox(&p, &d, 0.0, &s), p);
    }

    #[test]
    fn config_validation() {
        assert!(GdConfig::default().validate().is_ok());
        assert!(GdConfig { p: 1.0, ..Default::default() }.validate().is_err());
        assert!(GdConfig { h: 0.0, ..Default::default() }.validate().is_err());
        assert!(GdConfig { k2: 0, ..Default::default() }.validate().is_err());
        assert_eq!(GdConfig { k1: 10, k2: 2, ..Default::default() }.max_sims(), 31);
    }
}
