//! Hybrid simulation with guard localization.
//!
//! Location-wise ODEs are integrated on a time grid made of uniform RK4 steps
//! (or adaptive Dormand–Prince steps), the input switching times and any extra
//! requested sample times. After each step every armed outgoing guard of the
//! current location is checked for a sign change; a crossing is refined by
//! bisection on the cubic Hermite interpolant of the step, the reset is
//! applied and integration resumes from the crossing time.
//!
//! Guard arming: on entering a location a guard with `g > tol` fires at once,
//! and so does a guard with `|g| ≤ tol` whose value is increasing along the
//! flow. Any other guard with `|g| ≤ tol` (typically one the reset has just
//! placed on its surface) stays disarmed until it becomes strictly negative;
//! a guard with `g < −tol` is armed.

use thiserror::Error;

use crate::automaton::{HybridAutomaton, Location, Transition};
use crate::input::{InputError, PiecewiseConstantInput, Selector};
use crate::sensitivity::{self, SensitivityState};
use crate::{Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("more than {limit} transitions (last at t = {time})")]
    MaxTransitionsExceeded { limit: usize, time: f64 },
    #[error("transitions {first} and {second} fire within the tie window at t = {time}")]
    SimultaneousGuards { first: usize, second: usize, time: f64 },
    #[error("state after transition {transition} at t = {time} violates the target invariant (margin {margin})")]
    InvariantViolationAfterReset { transition: usize, time: f64, margin: f64 },
    #[error("guard has no sign change over [{ta}, {tb}]")]
    NoSignChange { ta: f64, tb: f64 },
    #[error("guard localization did not converge (residual {residual})")]
    NoConvergence { residual: f64 },
    #[error("tangential crossing of transition {transition} at t = {time} (denominator {denominator})")]
    TangentialCrossing { transition: usize, time: f64, denominator: f64 },
    #[error("initial state has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("location {0} has no dynamics")]
    MissingDynamics(Location),
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("adaptive step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },
    #[error(transparent)]
    Input(#[from] InputError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Integrator {
    /// Classical RK4 with `steps` uniform steps over the horizon.
    Rk4 { steps: usize },
    /// Dormand–Prince 5(4) with error control on the state components.
    Dopri45 { rtol: f64, atol: f64, max_step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub integrator: Integrator,
    /// Guard residual accepted at a localized crossing.
    pub guard_tol: f64,
    /// Two guards crossing closer than this are reported as simultaneous.
    pub tie_window: f64,
    pub max_transitions: usize,
    /// Slack when checking the target invariant after a reset.
    pub invariant_tol: f64,
    /// Relative threshold for tangential crossings (sensitivity mode only).
    pub graze_rel: f64,
    /// Extra times that become hard step boundaries and therefore samples.
    pub sample_times: Vec<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4 { steps: 5000 },
            guard_tol: 1e-9,
            tie_window: 1e-9,
            max_transitions: 10_000,
            invariant_tol: 1e-6,
            graze_rel: 1e-8,
            sample_times: Vec::new(),
        }
    }
}

impl SimOptions {
    pub fn rk4(steps: usize) -> Self {
        Self { integrator: Integrator::Rk4 { steps }, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub loc: Location,
    pub x: Vector,
}

/// Everything the sensitivity jump needs about one discrete transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    /// Index into the automaton's transition list.
    pub transition: usize,
    pub tau: f64,
    pub source: Location,
    pub target: Location,
    pub x_minus: Vector,
    pub x_plus: Vector,
    pub f_minus: Vector,
    pub f_plus: Vector,
    /// `(∂g/∂x, ∂g/∂t)` at `(x⁻, τ)`.
    pub guard_grad: (Vector, f64),
    /// `∂h/∂x` at `x⁻`.
    pub reset_jac: Matrix,
    /// Fired on location entry rather than by a zero crossing.
    pub immediate: bool,
    /// Index of the `τ⁻` sample; the `τ⁺` sample follows it.
    pub sample_index: usize,
}

impl TransitionRecord {
    /// The guard only depends on time.
    pub fn is_timed(&self) -> bool {
        self.guard_grad.0.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub samples: Vec<Sample>,
    pub transitions: Vec<TransitionRecord>,
    pub final_time: f64,
}

impl HybridTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Edge indices in the order they were taken.
    pub fn switching_sequence(&self) -> Vec<usize> {
        self.transitions.iter().map(|r| r.transition).collect()
    }

    /// Locations visited, in order, starting with the initial one.
    pub fn location_sequence(&self) -> Vec<Location> {
        let mut seq = Vec::with_capacity(self.transitions.len() + 1);
        if let Some(s) = self.samples.first() {
            seq.push(s.loc);
        }
        seq.extend(self.transitions.iter().map(|r| r.target));
        seq
    }

    pub fn visits(&self, l: Location) -> bool {
        self.samples.iter().any(|s| s.loc == l)
    }

    pub fn final_state(&self) -> &Vector {
        &self.samples.last().expect("trajectory has samples").x
    }

    /// Index of the last sample at exactly time `t`, if any.
    pub fn sample_index_at(&self, t: f64) -> Option<usize> {
        let end = self.samples.partition_point(|s| s.t <= t);
        (end > 0 && self.samples[end - 1].t == t).then(|| end - 1)
    }

    /// Indices of all samples at exactly time `t`.
    pub fn sample_indices_at(&self, t: f64) -> std::ops::Range<usize> {
        let lo = self.samples.partition_point(|s| s.t < t);
        let hi = self.samples.partition_point(|s| s.t <= t);
        lo..hi
    }

    /// True if some transition lies within `margin` of `t`.
    pub fn near_transition(&self, t: f64, margin: f64) -> bool {
        self.transitions.iter().any(|r| (r.tau - t).abs() <= margin)
    }
}

/// Cubic Hermite interpolation of one step.
#[derive(Debug, Clone, Copy)]
pub struct HermiteStep<'a> {
    pub ta: f64,
    pub tb: f64,
    pub ya: &'a [f64],
    pub fa: &'a [f64],
    pub yb: &'a [f64],
    pub fb: &'a [f64],
}

impl HermiteStep<'_> {
    pub fn eval_prefix(&self, t: f64, len: usize) -> Vector {
        let h = self.tb - self.ta;
        let s = if h > 0.0 { (t - self.ta) / h } else { 1.0 };
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Vector::from_iterator(
            len,
            (0..len).map(|i| {
                h00 * self.ya[i] + h10 * h * self.fa[i] + h01 * self.yb[i] + h11 * h * self.fb[i]
            }),
        )
    }
}

const BISECTION_CAP: usize = 128;

/// Earliest `τ ∈ (ta, tb]` with `g(x(τ), τ) ≈ 0`, by bisection on `dense`.
///
/// Requires `g(dense(ta), ta) < 0 ≤ g(dense(tb), tb)`. The returned point is
/// on the nonnegative side of the guard.
pub fn locate_crossing<D>(
    ta: f64,
    tb: f64,
    guard: &crate::automaton::Guard,
    dense: D,
    tol: f64,
) -> Result<(f64, Vector), SimError>
where
    D: Fn(f64) -> Vector,
{
    let ga = guard.eval(&dense(ta), ta);
    let xb = dense(tb);
    let gb = guard.eval(&xb, tb);
    if !(ga < 0.0 && gb >= 0.0) {
        return Err(SimError::NoSignChange { ta, tb });
    }
    let (mut lo, mut hi) = (ta, tb);
    let mut x_hi = xb;
    let mut g_hi = gb;
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xm = dense(mid);
        let gm = guard.eval(&xm, mid);
        if gm >= 0.0 {
            hi = mid;
            x_hi = xm;
            g_hi = gm;
        } else {
            lo = mid;
        }
    }
    if g_hi.abs() > tol {
        return Err(SimError::NoConvergence { residual: g_hi });
    }
    Ok((hi, x_hi))
}

/// `h(x)`; the caller records `x⁻`, `x⁺` and the Jacobian.
pub fn apply_reset(tr: &Transition, x: &Vector, _t: f64) -> Vector {
    tr.reset.apply(x)
}

/// Simulate from the decision vector `(x0, θ)` over `[0, horizon]`.
pub fn simulate(
    ha: &HybridAutomaton,
    x0: &Vector,
    input: &PiecewiseConstantInput,
    horizon: f64,
    opts: &SimOptions,
) -> Result<HybridTrajectory, SimError> {
    Engine::new(ha, input, horizon, opts, false).run(x0).map(|(traj, _)| traj)
}

pub(crate) fn simulate_augmented(
    ha: &HybridAutomaton,
    x0: &Vector,
    input: &PiecewiseConstantInput,
    horizon: f64,
    opts: &SimOptions,
) -> Result<(HybridTrajectory, Vec<SensitivityState>), SimError> {
    Engine::new(ha, input, horizon, opts, true).run(x0).map(|(t, s)| (t, s.unwrap_or_default()))
}

struct Engine<'a> {
    ha: &'a HybridAutomaton,
    input: &'a PiecewiseConstantInput,
    theta: Vec<f64>,
    horizon: f64,
    opts: &'a SimOptions,
    sens: bool,
    n: usize,
    np: usize,
}

struct StepOut {
    y: Vec<f64>,
    f_start: Vec<f64>,
    f_end: Option<Vec<f64>>,
    err: f64,
}

/// Simulation state between steps.
struct Cursor {
    t: f64,
    loc: Location,
    y: Vec<f64>,
    armed: Vec<bool>,
    last_tau_grad: Option<(f64, Matrix, Matrix)>,
}

impl<'a> Engine<'a> {
    fn new(
        ha: &'a HybridAutomaton,
        input: &'a PiecewiseConstantInput,
        horizon: f64,
        opts: &'a SimOptions,
        sens: bool,
    ) -> Self {
        Self {
            ha,
            input,
            theta: input.flatten(),
            horizon,
            opts,
            sens,
            n: ha.state_dim,
            np: input.param_count(),
        }
    }

    fn dim(&self) -> usize {
        if self.sens {
            self.n + self.n * self.n + self.n * self.np
        } else {
            self.n
        }
    }

    fn input_at(&self, t: f64) -> Result<(Vector, Selector), SimError> {
        if self.input.input_dim() == 0 {
            return Ok((Vector::zeros(0), Selector { active: vec![], param_count: 0 }));
        }
        let tt = t.min(self.input.horizon());
        Ok((self.input.eval(tt)?, self.input.selector(tt)?))
    }

    fn rhs(&self, loc: Location, t: f64, y: &[f64], u: &Vector, sel: &Selector, out: &mut [f64]) {
        let n = self.n;
        let field = self.ha.field(loc);
        let x = Vector::from_column_slice(&y[..n]);
        let f = field.eval(&x, u, t);
        out[..n].copy_from_slice(f.as_slice());
        if self.sens {
            sensitivity::rhs_into(field, &x, u, t, n, self.np, sel, &y[n..], &mut out[n..]);
        }
    }

    fn rk4(&self, loc: Location, t: f64, y: &[f64], h: f64, u: &Vector, sel: &Selector) -> StepOut {
        let d = y.len();
        let mut k1 = vec![0.0; d];
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        self.rhs(loc, t, y, u, sel, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.rhs(loc, t + 0.5 * h, &tmp, u, sel, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.rhs(loc, t + 0.5 * h, &tmp, u, sel, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(loc, t + h, &tmp, u, sel, &mut k4);
        let y_new = (0..d)
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        StepOut { y: y_new, f_start: k1, f_end: None, err: 0.0 }
    }

    fn dopri(
        &self,
        loc: Location,
        t: f64,
        y: &[f64],
        h: f64,
        u: &Vector,
        sel: &Selector,
        rtol: f64,
        atol: f64,
    ) -> StepOut {
        const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let d = y.len();
        let mut k = vec![vec![0.0; d]; 7];
        let mut tmp = vec![0.0; d];
        self.rhs(loc, t, y, u, sel, &mut k[0]);
        for s in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(s);
            let _ = done;
            self.rhs(loc, t + C[s] * h, &tmp, u, sel, &mut rest[0]);
        }
        // stage 7 was evaluated at the 5th-order solution
        let y_new = tmp.clone();
        let mut sum = 0.0;
        for i in 0..self.n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            sum += (e / sc).powi(2);
        }
        let err = (sum / self.n.max(1) as f64).sqrt();
        let f_end = k.pop();
        StepOut { y: y_new, f_start: k.swap_remove(0), f_end, err }
    }

    fn initial_y(&self, x0: &Vector) -> Result<Vec<f64>, SimError> {
        let theta = Vector::from_column_slice(&self.theta);
        let s0 = self.ha.initial_state(x0, &theta);
        if s0.len() != self.n {
            return Err(SimError::Dimension { expected: self.n, found: s0.len() });
        }
        let mut y = s0.as_slice().to_vec();
        if self.sens {
            let (px, pt) = self.ha.initial_sensitivity(x0, &theta);
            y.extend_from_slice(px.as_slice());
            y.extend_from_slice(pt.as_slice());
        }
        Ok(y)
    }

    fn sens_of(&self, y: &[f64]) -> SensitivityState {
        let n = self.n;
        SensitivityState {
            p_x0: Matrix::from_column_slice(n, n, &y[n..n + n * n]),
            p_theta: Matrix::from_column_slice(n, self.np, &y[n + n * n..]),
        }
    }

    fn push_sample(
        &self,
        samples: &mut Vec<Sample>,
        sens: &mut Vec<SensitivityState>,
        t: f64,
        loc: Location,
        y: &[f64],
    ) -> Result<(), SimError> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { time: t });
        }
        samples.push(Sample { t, loc, x: Vector::from_column_slice(&y[..self.n]) });
        if self.sens {
            sens.push(self.sens_of(y));
        }
        Ok(())
    }

    /// Hard step boundaries for the fixed-step integrator.
    fn grid(&self, steps: usize) -> Vec<f64> {
        let horizon = self.horizon;
        let mut g: Vec<f64> = (0..=steps).map(|i| (i as f64 * horizon) / steps as f64).collect();
        g.extend(self.stops());
        g.sort_by(f64::total_cmp);
        let snap = 1e-12 * (1.0 + horizon);
        let mut out: Vec<f64> = Vec::with_capacity(g.len());
        for t in g {
            match out.last_mut() {
                Some(last) if t - *last <= snap => {
                    // prefer the exact switching time over the uniform grid point
                    if self.is_stop(t) {
                        *last = t;
                    }
                }
                _ => out.push(t),
            }
        }
        if let Some(last) = out.last_mut() {
            *last = horizon;
        }
        out
    }

    fn stops(&self) -> Vec<f64> {
        self.input
            .breakpoints()
            .into_iter()
            .chain(self.opts.sample_times.iter().copied())
            .filter(|&t| t > 0.0 && t < self.horizon)
            .collect()
    }

    fn is_stop(&self, t: f64) -> bool {
        self.stops().contains(&t)
    }

    fn entry_arming(&self, loc: Location, x: &Vector, t: f64) -> Result<(Vec<bool>, Option<usize>), SimError> {
        let tol = self.opts.guard_tol;
        let mut armed = vec![false; self.ha.transitions.len()];
        let mut immediate: Option<usize> = None;
        let mut flow: Option<Vector> = None;
        for (idx, tr) in self.ha.outgoing(loc) {
            let g = tr.guard.eval(x, t);
            let fires = if g > tol {
                true
            } else if g >= -tol {
                // on the surface: fire only if the flow clearly pushes into the guard
                if flow.is_none() {
                    let (u, _) = self.input_at(t)?;
                    flow = Some(self.ha.field(loc).eval(x, &u, t));
                }
                let f = flow.as_ref().expect("flow evaluated above");
                let (gx, gt) = tr.guard.gradient(x, t);
                gx.dot(f) + gt > self.opts.graze_rel * (1.0 + f.norm())
            } else {
                false
            };
            if fires {
                if let Some(first) = immediate {
                    return Err(SimError::SimultaneousGuards { first, second: idx, time: t });
                }
                immediate = Some(idx);
            }
            armed[idx] = g < -tol;
        }
        Ok((armed, immediate))
    }

    #[allow(clippy::too_many_arguments)]
    fn fire(
        &self,
        cur: &mut Cursor,
        idx: usize,
        tau: f64,
        y_minus: Vec<f64>,
        u_minus: &Vector,
        immediate: bool,
        samples: &mut Vec<Sample>,
        sens: &mut Vec<SensitivityState>,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), SimError> {
        let n = self.n;
        let tr = &self.ha.transitions[idx];
        if records.len() >= self.opts.max_transitions {
            return Err(SimError::MaxTransitionsExceeded { limit: self.opts.max_transitions, time: tau });
        }
        if !self.ha.dynamics.contains_key(&tr.target) {
            return Err(SimError::MissingDynamics(tr.target));
        }
        let x_minus = Vector::from_column_slice(&y_minus[..n]);
        let x_plus = apply_reset(tr, &x_minus, tau);
        if let Some(inv) = self.ha.invariant(tr.target) {
            let margin = inv.margin(&x_plus, tau);
            if margin < -self.opts.invariant_tol {
                return Err(SimError::InvariantViolationAfterReset { transition: idx, time: tau, margin });
            }
        }
        let (u_plus, _) = self.input_at(tau)?;
        let f_minus = self.ha.field(cur.loc).eval(&x_minus, u_minus, tau);
        let f_plus = self.ha.field(tr.target).eval(&x_plus, &u_plus, tau);
        let guard_grad = tr.guard.gradient(&x_minus, tau);
        let reset_jac = tr.reset.jacobian(&x_minus);
        let rec = TransitionRecord {
            transition: idx,
            tau,
            source: cur.loc,
            target: tr.target,
            x_minus,
            x_plus: x_plus.clone(),
            f_minus,
            f_plus,
            guard_grad,
            reset_jac,
            immediate,
            sample_index: samples.len(),
        };
        self.push_sample(samples, sens, tau, cur.loc, &y_minus)?;

        let mut y_plus = x_plus.as_slice().to_vec();
        if self.sens {
            let s_minus = self.sens_of(&y_minus);
            let (d1, d2) = if immediate {
                match &cur.last_tau_grad {
                    Some((t_prev, d1, d2)) if *t_prev == tau => (d1.clone(), d2.clone()),
                    _ => (Matrix::zeros(1, n), Matrix::zeros(1, self.np)),
                }
            } else {
                sensitivity::transition_time_gradients_with(&rec, &s_minus, self.opts.graze_rel)?
            };
            let s_plus = sensitivity::jump_sensitivities(&rec, &s_minus, &d1, &d2);
            y_plus.extend_from_slice(s_plus.p_x0.as_slice());
            y_plus.extend_from_slice(s_plus.p_theta.as_slice());
            cur.last_tau_grad = Some((tau, d1, d2));
        }
        records.push(rec);
        cur.loc = tr.target;
        cur.t = tau;
        self.push_sample(samples, sens, tau, cur.loc, &y_plus)?;
        cur.y = y_plus;
        Ok(())
    }

    /// Arm guards of the current location and take immediate transitions.
    fn enter(
        &self,
        cur: &mut Cursor,
        samples: &mut Vec<Sample>,
        sens: &mut Vec<SensitivityState>,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), SimError> {
        loop {
            let x = Vector::from_column_slice(&cur.y[..self.n]);
            let (armed, immediate) = self.entry_arming(cur.loc, &x, cur.t)?;
            cur.armed = armed;
            let Some(idx) = immediate else { return Ok(()) };
            let (u, _) = self.input_at(cur.t)?;
            let y = cur.y.clone();
            // the entry sample is replaced by the τ⁻/τ⁺ pair
            samples.pop();
            if self.sens {
                sens.pop();
            }
            let t = cur.t;
            self.fire(cur, idx, t, y, &u, true, samples, sens, records)?;
        }
    }

    fn run(&self, x0: &Vector) -> Result<(HybridTrajectory, Option<Vec<SensitivityState>>), SimError> {
        let l0 = self.ha.initial_location;
        if !self.ha.dynamics.contains_key(&l0) {
            return Err(SimError::MissingDynamics(l0));
        }
        let mut samples = Vec::new();
        let mut sens = Vec::new();
        let mut records = Vec::new();
        let y0 = self.initial_y(x0)?;
        let mut cur = Cursor { t: 0.0, loc: l0, y: y0, armed: Vec::new(), last_tau_grad: None };
        self.push_sample(&mut samples, &mut sens, 0.0, l0, &cur.y.clone())?;
        self.enter(&mut cur, &mut samples, &mut sens, &mut records)?;

        if self.horizon > 0.0 {
            match self.opts.integrator {
                Integrator::Rk4 { steps } => {
                    let grid = self.grid(steps.max(1));
                    for &tg in &grid[1..] {
                        while cur.t < tg {
                            let h = tg - cur.t;
                            let (u, sel) = self.input_at(cur.t)?;
                            let step = self.rk4(cur.loc, cur.t, &cur.y, h, &u, &sel);
                            self.advance(&mut cur, tg, step, &u, &sel, &mut samples, &mut sens, &mut records)?;
                        }
                    }
                }
                Integrator::Dopri45 { rtol, atol, max_step } => {
                    let mut stops = self.stops();
                    stops.push(self.horizon);
                    stops.sort_by(f64::total_cmp);
                    stops.dedup();
                    let mut h = max_step.min(self.horizon / 100.0);
                    for &stop in &stops {
                        while cur.t < stop {
                            let (u, sel) = self.input_at(cur.t)?;
                            let hh = h.min(stop - cur.t).min(max_step);
                            let step = self.dopri(cur.loc, cur.t, &cur.y, hh, &u, &sel, rtol, atol);
                            let factor = (0.9 * step.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                            if step.err > 1.0 {
                                h = hh * factor;
                                if h < 1e-12 * (1.0 + cur.t.abs()) {
                                    return Err(SimError::StepSizeUnderflow { time: cur.t });
                                }
                                continue;
                            }
                            let tb = if stop - cur.t <= hh { stop } else { cur.t + hh };
                            self.advance(&mut cur, tb, step, &u, &sel, &mut samples, &mut sens, &mut records)?;
                            h = hh * factor;
                        }
                    }
                }
            }
        }

        let traj = HybridTrajectory { samples, transitions: records, final_time: self.horizon };
        Ok((traj, self.sens.then_some(sens)))
    }

    /// Accept a step ending at `tb`, handling any guard crossing inside it.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        cur: &mut Cursor,
        tb: f64,
        step: StepOut,
        u: &Vector,
        sel: &Selector,
        samples: &mut Vec<Sample>,
        sens: &mut Vec<SensitivityState>,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), SimError> {
        let n = self.n;
        let ta = cur.t;
        let xb = Vector::from_column_slice(&step.y[..n]);
        if xb.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { time: tb });
        }
        let mut crossing = Vec::new();
        let mut newly_armed = Vec::new();
        for (idx, tr) in self.ha.outgoing(cur.loc) {
            let g = tr.guard.eval(&xb, tb);
            if cur.armed[idx] {
                if g >= 0.0 {
                    crossing.push(idx);
                }
            } else if g < 0.0 {
                newly_armed.push(idx);
            }
        }
        if crossing.is_empty() {
            for idx in newly_armed {
                cur.armed[idx] = true;
            }
            cur.t = tb;
            cur.y = step.y;
            return self.push_sample(samples, sens, tb, cur.loc, &cur.y.clone());
        }

        let fb = match step.f_end {
            Some(f) => f,
            None => {
                let mut f = vec![0.0; self.dim()];
                self.rhs(cur.loc, tb, &step.y, u, sel, &mut f);
                f
            }
        };
        let herm = HermiteStep { ta, tb, ya: &cur.y, fa: &step.f_start, yb: &step.y, fb: &fb };
        let mut hits: Vec<(f64, usize)> = Vec::with_capacity(crossing.len());
        for &idx in &crossing {
            let guard = &self.ha.transitions[idx].guard;
            let (tau, _) =
                locate_crossing(ta, tb, guard, |t| herm.eval_prefix(t, n), self.opts.guard_tol)?;
            hits.push((tau, idx));
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        if hits.len() > 1 && hits[1].0 - hits[0].0 <= self.opts.tie_window {
            return Err(SimError::SimultaneousGuards { first: hits[0].1, second: hits[1].1, time: hits[0].0 });
        }
        let (tau, idx) = hits[0];
        let y_minus = herm.eval_prefix(tau, self.dim()).as_slice().to_vec();
        self.fire(cur, idx, tau, y_minus, u, false, samples, sens, records)?;
        self.enter(cur, samples, sens, records)
    }
}
