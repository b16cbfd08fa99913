//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hyfal_core::tl::predicate_value;
use hyfal_core::{
    simulate, simulate_with_sensitivity, AugmentedTrajectory, Formula, HybridTrajectory, Matrix, PredicateSet,
    Problem, Sample, SearchPoint, SimOptions, Vector,
};
use rand::Rng;

/// Central-difference step for a decision variable with value `v` in a box of width `width`.
pub fn fd_step(v: f64, width: f64) -> f64 {
    let s = v.abs().max(width);
    if s == 0.0 {
        1e-6
    } else {
        1e-6 * s
    }
}

/// Index of the unique sample at exactly `t`.
pub fn sample_at(traj: &HybridTrajectory, t: f64) -> Option<usize> {
    let hits: Vec<usize> = traj.samples.iter().enumerate().filter(|(_, s)| s.t == t).map(|(i, _)| i).collect();
    (hits.len() == 1).then(|| hits[0])
}

fn simulate_point(problem: &Problem, p: &SearchPoint, opts: &SimOptions) -> Option<HybridTrajectory> {
    let input = problem.space.input_for(p).ok()?;
    simulate(&problem.automaton, &p.x0_vector(), &input, problem.horizon, opts).ok()
}

pub fn simulate_aug(problem: &Problem, p: &SearchPoint, probes: &[f64]) -> Option<AugmentedTrajectory> {
    let opts = SimOptions { sample_times: probes.to_vec(), ..problem.sim.clone() };
    let input = problem.space.input_for(p).ok()?;
    simulate_with_sensitivity(&problem.automaton, &p.x0_vector(), &input, problem.horizon, &opts).ok()
}

/// `[p_x0 | p_θ]` at each probe time by central differences of the
/// simulator. `None` when a perturbed run fails or switches differently.
pub fn fd_sensitivities(problem: &Problem, p: &SearchPoint, probes: &[f64]) -> Option<Vec<Matrix>> {
    let opts = SimOptions { sample_times: probes.to_vec(), ..problem.sim.clone() };
    let base = simulate_point(problem, p, &opts)?;
    let seq = base.switching_sequence();
    let flat = p.flat();
    let bounds = problem.space.bounds();
    let n = problem.space.state_dim();
    let mut out = vec![Matrix::zeros(n, flat.len()); probes.len()];
    for k in 0..flat.len() {
        let h = fd_step(flat[k], bounds[k].1 - bounds[k].0);
        let mut states = Vec::new();
        for sign in [1.0, -1.0] {
            let mut w = flat.clone();
            w[k] += sign * h;
            let traj = simulate_point(problem, &problem.space.from_flat(&w), &opts)?;
            if traj.switching_sequence() != seq {
                return None;
            }
            let xs: Option<Vec<Vector>> =
                probes.iter().map(|&t| sample_at(&traj, t).map(|i| traj.samples[i].x.clone())).collect();
            states.push(xs?);
        }
        for (j, m) in out.iter_mut().enumerate() {
            m.set_column(k, &((&states[0][j] - &states[1][j]) / (2.0 * h)));
        }
    }
    Some(out)
}

pub fn within(fd: f64, an: f64, abs: f64, rel: f64) -> bool {
    (fd - an).abs() <= abs + rel * an.abs()
}

/// Piecewise-linear hybrid system solved with matrix exponentials:
/// `ẋ = A_m x` in mode `m`, guards `c·x − d` crossing upward, linear resets.
pub struct LinearChain {
    pub modes: Vec<Matrix>,
    /// `(from, to, c, d, R)`.
    pub guards: Vec<(usize, usize, Vector, f64, Matrix)>,
}

pub struct ChainResult {
    pub x: Vector,
    /// `∂x(T)/∂x(0)`.
    pub jac: Matrix,
    pub events: Vec<(f64, usize)>,
}

impl LinearChain {
    pub fn solve(&self, x0: &Vector, mode0: usize, horizon: f64) -> ChainResult {
        let n = x0.len();
        let (mut t, mut m, mut x, mut p) = (0.0, mode0, x0.clone(), Matrix::identity(n, n));
        let mut events = Vec::new();
        let ds = 1e-3;
        loop {
            let a = &self.modes[m];
            let g = |gi: usize, s: f64| {
                let (_, _, c, d, _) = &self.guards[gi];
                c.dot(&((a * s).exp() * &x)) - d
            };
            let mut hit: Option<(f64, usize)> = None;
            let cands: Vec<usize> = (0..self.guards.len()).filter(|&i| self.guards[i].0 == m).collect();
            let mut s0 = 0.0;
            while hit.is_none() && t + s0 < horizon {
                let s1 = (s0 + ds).min(horizon - t);
                for &gi in &cands {
                    if g(gi, s0) < 0.0 && g(gi, s1) >= 0.0 {
                        let (mut lo, mut hi) = (s0, s1);
                        for _ in 0..200 {
                            let mid = 0.5 * (lo + hi);
                            if mid == lo || mid == hi {
                                break;
                            }
                            if g(gi, mid) < 0.0 {
                                lo = mid
                            } else {
                                hi = mid
                            }
                        }
                        if hit.is_none_or(|(s, _)| hi < s) {
                            hit = Some((hi, gi));
                        }
                    }
                }
                s0 = s1;
            }
            let Some((s, gi)) = hit else {
                let e = (a * (horizon - t)).exp();
                return ChainResult { x: &e * &x, jac: e * p, events };
            };
            let (_, to, c, _, r) = &self.guards[gi];
            let e = (a * s).exp();
            let xm = &e * &x;
            let pm = &e * &p;
            let fm = a * &xm;
            let xp = r * &xm;
            let fp = &self.modes[*to] * &xp;
            let dtau = -(c.transpose() * &pm) / c.dot(&fm);
            p = r * &pm + (r * &fm - fp) * dtau;
            x = xp;
            t += s;
            m = *to;
            events.push((t, gi));
        }
    }
}

/// Robustness signal at every sample, straight from the recursive
/// definition with each window scanned in full.
pub fn brute_signal(phi: &Formula, samples: &[Sample]) -> Vec<f64> {
    let n = samples.len();
    match phi {
        Formula::Pred { set, polarity } => {
            samples.iter().map(|s| predicate_value(&s.x, s.loc, set, *polarity)).collect()
        }
        Formula::Not(g) => brute_signal(g, samples).into_iter().map(|v| -v).collect(),
        Formula::And(gs) | Formula::Or(gs) => {
            let min = matches!(phi, Formula::And(_));
            let kids: Vec<Vec<f64>> = gs.iter().map(|g| brute_signal(g, samples)).collect();
            let empty = if min { f64::INFINITY } else { f64::NEG_INFINITY };
            (0..n).map(|i| first_extreme(kids.iter().map(|k| k[i]), min, empty)).collect()
        }
        Formula::Implies(a, b) => {
            let (va, vb) = (brute_signal(a, samples), brute_signal(b, samples));
            (0..n).map(|i| if vb[i] > -va[i] { vb[i] } else { -va[i] }).collect()
        }
        Formula::Always { a, b, body } | Formula::Eventually { a, b, body } => {
            let min = matches!(phi, Formula::Always { .. });
            let empty = if min { f64::INFINITY } else { f64::NEG_INFINITY };
            let inner = brute_signal(body, samples);
            (0..n)
                .map(|i| {
                    let (lo, hi) = (samples[i].t + a, samples[i].t + b);
                    let vals = (0..n).filter(|&j| samples[j].t >= lo && samples[j].t <= hi).map(|j| inner[j]);
                    first_extreme(vals, min, empty)
                })
                .collect()
        }
    }
}

fn first_extreme(vals: impl Iterator<Item = f64>, min: bool, empty: f64) -> f64 {
    let mut best: Option<f64> = None;
    for v in vals {
        best = Some(match best {
            None => v,
            Some(b) if (min && v < b) || (!min && v > b) => v,
            Some(b) => b,
        });
    }
    best.unwrap_or(empty)
}

pub fn random_set<R: Rng>(rng: &mut R) -> PredicateSet {
    let proj = if rng.random_bool(0.5) { vec![0, 1] } else { vec![rng.random_range(0..2)] };
    let d = proj.len();
    let mut set = match rng.random_range(0..3) {
        0 => {
            let lo: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..1.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
            PredicateSet::in_box(proj, lo, hi).unwrap()
        }
        1 => {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            PredicateSet::ball(proj, c, rng.random_range(0.1..1.5)).unwrap()
        }
        _ => {
            let nrm: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) + 1e-3).collect();
            PredicateSet::half_space(proj, nrm, rng.random_range(-1.0..1.0)).unwrap()
        }
    };
    if rng.random_bool(0.2) {
        set = set.at_location(rng.random_range(0..2));
    }
    set
}

pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, horizon: f64) -> Formula {
    if depth <= 1 || rng.random_bool(0.2) {
        let set = random_set(rng);
        return if rng.random_bool(0.5) { Formula::inside(set) } else { Formula::outside(set) };
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, horizon);
    let window = |rng: &mut R| {
        let a = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..horizon * 0.5) };
        (a, a + rng.random_range(0.0..horizon * 0.6))
    };
    match rng.random_range(0..6) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and((0..rng.random_range(1..4)).map(|_| sub(rng)).collect()),
        2 => Formula::or((0..rng.random_range(1..4)).map(|_| sub(rng)).collect()),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => {
            let (a, b) = window(rng);
            Formula::always(a, b, sub(rng))
        }
        _ => {
            let (a, b) = window(rng);
            Formula::eventually(a, b, sub(rng))
        }
    }
}

/// Samples on a jittered grid with occasional repeated times (transition pairs).
pub fn random_samples<R: Rng>(rng: &mut R, len: usize) -> Vec<Sample> {
    let mut t = 0.0;
    let mut loc = 0;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        if k > 0 {
            if rng.random_bool(0.05) {
                loc = 1 - loc;
            } else {
                t += rng.random_range(0.01..0.2);
            }
        }
        let x = Vector::from_vec(vec![rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5)]);
        out.push(Sample { t, loc, x });
    }
    out
}
