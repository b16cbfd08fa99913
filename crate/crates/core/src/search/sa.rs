use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gd::{descend, record_for, GdConfig};
use super::{Evaluation, Phase, Problem, RunTrace, TraceRecord};
use crate::space::{SearchPoint, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    /// Total simulations, GD probes included.
    pub budget: usize,
    /// Proposal standard deviation as a fraction of each box width.
    pub proposal_scale: f64,
    /// Starting temperature; the first sample's |r| when unset.
    pub initial_temperature: Option<f64>,
    /// Geometric cooling per sample.
    pub cooling: f64,
    /// Samples with `0 < r ≤ r_threshold` start a local descent.
    pub r_threshold: f64,
    /// Cap on simulations per descent; the remaining budget otherwise.
    pub gd_budget: Option<usize>,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            proposal_scale: 0.1,
            initial_temperature: None,
            cooling: 0.95,
            r_threshold: 2.5,
            gd_budget: None,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.budget == 0 {
            return Err("budget must be at least 1".into());
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale <= 1.0) {
            return Err(format!("proposal scale must lie in (0, 1], got {}", self.proposal_scale));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(format!("cooling factor must lie in (0, 1], got {}", self.cooling));
        }
        if self.initial_temperature.is_some_and(|t| !(t >= 0.0)) {
            return Err("initial temperature must be nonnegative".into());
        }
        if self.r_threshold.is_nan() {
            return Err("r_threshold is NaN".into());
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-run seed derived from a master seed.
pub fn run_seed(master: u64, run: u64) -> u64 {
    splitmix64(master ^ splitmix64(run))
}

fn propose<R: Rng>(rng: &mut R, space: &SearchSpace, from: &SearchPoint, scale: f64) -> SearchPoint {
    let flat: Vec<f64> = from
        .flat()
        .iter()
        .zip(space.bounds())
        .map(|(&v, (lo, hi))| {
            if hi <= lo {
                return lo;
            }
            let normal = Normal::new(v, scale * (hi - lo)).expect("positive width");
            // truncate by resampling; fall back to clamping after many misses
            for _ in 0..1000 {
                let s = normal.sample(rng);
                if (lo..=hi).contains(&s) {
                    return s;
                }
            }
            v.clamp(lo, hi)
        })
        .collect();
    space.from_flat(&flat)
}

fn sample_record(sim: usize, iteration: usize, point: &SearchPoint, ev: &Result<Evaluation, String>, temp: f64) -> TraceRecord {
    match ev {
        Ok(ev) => TraceRecord { step: temp, accepted: false, ..record_for(ev, sim, Phase::Sa, iteration) },
        Err(e) => TraceRecord {
            sim,
            phase: Phase::Sa,
            iteration,
            attempt: 0,
            point: point.clone(),
            r: None,
            r_incumbent: None,
            objective: None,
            t_star: None,
            step: temp,
            accepted: false,
            switching: vec![],
            j: None,
            dj: None,
            note: Some(e.clone()),
        },
    }
}

fn anneal(problem: &Problem, cfg: &SaConfig, gd: Option<&GdConfig>) -> RunTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = problem.space.uniform(&mut rng);
    let name = if gd.is_some() { "sa+gd" } else { "sa" };
    let mut trace = RunTrace::new(name, Some(cfg.seed), &first);
    let with_sens = gd.is_some_and(|_| cfg.r_threshold > 0.0);

    let mut current: Option<Evaluation> = None;
    let mut temperature = f64::NAN;
    let mut point = first;
    let mut iteration = 0;
    while trace.sims < cfg.budget {
        trace.sims += 1;
        let ev = problem.evaluate(&point, with_sens).map_err(|e| e.to_string());
        let mut rec = sample_record(trace.sims, iteration, &point, &ev, temperature);
        if let Ok(ev) = ev {
            trace.offer(&ev);
            if ev.r() <= cfg.r_threshold {
                trace.reached_threshold = true;
            }
            if temperature.is_nan() {
                let t0 = cfg.initial_temperature.unwrap_or(ev.r().abs());
                temperature = if t0.is_finite() { t0 } else { 1.0 };
                rec.step = temperature;
            }
            let accept = match &current {
                None => true,
                Some(cur) => {
                    let delta = ev.r() - cur.r();
                    if delta <= 0.0 {
                        true
                    } else if temperature > 0.0 && rng.random::<f64>() < (-delta / temperature).exp() {
                        trace.worse_accepted += 1;
                        true
                    } else {
                        false
                    }
                }
            };
            rec.r_incumbent = current.as_ref().map(|c| c.r());
            rec.accepted = accept;
            trace.records.push(rec);
            if accept {
                current = Some(ev);
            }
        } else {
            trace.records.push(rec);
        }
        if trace.falsified {
            trace.stop = "falsified".into();
            return trace;
        }

        if let (Some(gd_cfg), Some(cur)) = (gd, &current) {
            let r = cur.r();
            let fresh = trace.records.last().is_some_and(|r| r.accepted && r.phase == Phase::Sa);
            if fresh && r > 0.0 && r <= cfg.r_threshold && trace.sims < cfg.budget {
                let room = cfg.budget - trace.sims;
                let budget = cfg.gd_budget.map_or(room, |b| b.min(room));
                trace.gd_dispatches += 1;
                let (best, _) = descend(problem, cur.clone(), gd_cfg, budget, &mut trace);
                current = Some(best);
                if trace.falsified {
                    trace.stop = "falsified".into();
                    return trace;
                }
            }
        }

        iteration += 1;
        if temperature.is_finite() {
            temperature *= cfg.cooling;
        }
        point = match &current {
            Some(c) => propose(&mut rng, &problem.space, &c.point, cfg.proposal_scale),
            None => problem.space.uniform(&mut rng),
        };
    }
    trace.stop = "budget exhausted".into();
    trace
}

/// Simulated annealing over the search box.
pub fn simulated_annealing(problem: &Problem, cfg: &SaConfig) -> RunTrace {
    anneal(problem, cfg, None)
}

/// Simulated annealing that hands promising samples to gradient descent.
pub fn sa_plus_gd(problem: &Problem, cfg: &SaConfig, gd: &GdConfig) -> RunTrace {
    anneal(problem, cfg, Some(gd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_run_and_are_stable() {
        assert_ne!(run_seed(1, 0), run_seed(1, 1));
        assert_ne!(run_seed(1, 0), run_seed(2, 0));
        assert_eq!(run_seed(7, 3), run_seed(7, 3));
    }

    #[test]
    fn proposals_stay_in_box_and_skip_fixed_dims() {
        use crate::input::PiecewiseConstantInput;
        let space = SearchSpace::new(vec![(0.0, 1.0), (2.0, 2.0)], PiecewiseConstantInput::none());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let from = SearchPoint::new(vec![0.99, 2.0], vec![]);
        for _ in 0..200 {
            let p = propose(&mut rng, &space, &from, 0.5);
            assert!(space.contains(&p));
            assert_eq!(p.x0[1], 2.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SaConfig::default().validate().is_ok());
        assert!(SaConfig { budget: 0, ..Default::default() }.validate().is_err());
        assert!(SaConfig { proposal_scale: 0.0, ..Default::default() }.validate().is_err());
        assert!(SaConfig { r_threshold: f64::NEG_INFINITY, ..Default::default() }.validate().is_ok());
    }
}
