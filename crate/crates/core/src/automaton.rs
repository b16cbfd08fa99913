//! Hybrid automaton data model.
//!
//! An automaton is a finite set of locations, each carrying a vector field
//! `dx/dt = F_l(x, u, t)` and an invariant, connected by guarded transitions.
//! A transition fires when its scalar guard `g(x, t)` reaches zero from below
//! and maps the state through a reset `x' = h(x)`.
//!
//! Every derivative the sensitivity engine needs (`∂F/∂x`, `∂F/∂u`, `∂g/∂x`,
//! `∂g/∂t`, `∂h/∂x`) can either be supplied analytically or is produced by
//! central finite differences. [`validate_automaton`] reports which ones fall
//! back to differencing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::fd;
use crate::{Matrix, Vector};

/// Location identifier.
pub type Location = usize;

type FieldFn = dyn Fn(&Vector, &Vector, f64) -> Vector + Send + Sync;
type FieldJacFn = dyn Fn(&Vector, &Vector, f64) -> Matrix + Send + Sync;
type GuardFn = dyn Fn(&Vector, f64) -> f64 + Send + Sync;
type GuardGradFn = dyn Fn(&Vector, f64) -> (Vector, f64) + Send + Sync;
type StateMapFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type StateJacFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type MarginFn = dyn Fn(&Vector, f64) -> f64 + Send + Sync;
type InitFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;
type InitJacFn = dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync;

/// Continuous dynamics of one location.
#[derive(Clone)]
pub struct VectorField {
    f: Arc<FieldFn>,
    dfdx: Option<Arc<FieldJacFn>>,
    dfdu: Option<Arc<FieldJacFn>>,
}

impl VectorField {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&Vector, &Vector, f64) -> Vector + Send + Sync + 'static,
    {
        Self { f: Arc::new(f), dfdx: None, dfdu: None }
    }

    /// Attach the analytic state Jacobian `∂F/∂x` (n×n).
    pub fn with_state_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&Vector, &Vector, f64) -> Matrix + Send + Sync + 'static,
    {
        self.dfdx = Some(Arc::new(j));
        self
    }

    /// Attach the analytic input Jacobian `∂F/∂u` (n×m).
    pub fn with_input_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&Vector, &Vector, f64) -> Matrix + Send + Sync + 'static,
    {
        self.dfdu = Some(Arc::new(j));
        self
    }

    #[inline]
    pub fn eval(&self, x: &Vector, u: &Vector, t: f64) -> Vector {
        (self.f)(x, u, t)
    }

    pub fn state_jacobian(&self, x: &Vector, u: &Vector, t: f64) -> Matrix {
        match &self.dfdx {
            Some(j) => j(x, u, t),
            None => fd::jacobian(|xp| (self.f)(xp, u, t), x, x.len()),
        }
    }

    pub fn input_jacobian(&self, x: &Vector, u: &Vector, t: f64) -> Matrix {
        match &self.dfdu {
            Some(j) => j(x, u, t),
            None if u.is_empty() => Matrix::zeros(x.len(), 0),
            None => fd::jacobian(|up| (self.f)(x, up, t), u, x.len()),
        }
    }

    pub fn has_state_jacobian(&self) -> bool {
        self.dfdx.is_some()
    }

    pub fn has_input_jacobian(&self) -> bool {
        self.dfdu.is_some()
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("analytic_dfdx", &self.dfdx.is_some())
            .field("analytic_dfdu", &self.dfdu.is_some())
            .finish()
    }
}

/// Geometry of a guard's zero set, when it has one with a closed-form projection.
#[derive(Debug, Clone, PartialEq)]
pub enum GuardShape {
    /// `g(x, t) = aᵀx + c·t − b`.
    Affine { normal: Vector, time_coeff: f64, offset: f64 },
    /// `g(x) = sign·(‖x_I − center‖ − radius)` over the components `I`.
    Sphere { indices: Vec<usize>, center: Vec<f64>, radius: f64, sign: f64 },
    /// Anything else; projected numerically.
    General,
}

/// Scalar guard `g(x, t)`; the transition fires when `g` reaches zero from below.
#[derive(Clone)]
pub struct Guard {
    g: Arc<GuardFn>,
    grad: Option<Arc<GuardGradFn>>,
    shape: GuardShape,
}

impl Guard {
    pub fn new<G>(g: G) -> Self
    where
        G: Fn(&Vector, f64) -> f64 + Send + Sync + 'static,
    {
        Self { g: Arc::new(g), grad: None, shape: GuardShape::General }
    }

    /// Attach the analytic gradient `(∂g/∂x, ∂g/∂t)`.
    pub fn with_gradient<D>(mut self, d: D) -> Self
    where
        D: Fn(&Vector, f64) -> (Vector, f64) + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(d));
        self
    }

    /// `g(x, t) = aᵀx + c·t − b`, with its exact gradient.
    pub fn affine(normal: Vector, time_coeff: f64, offset: f64) -> Self {
        let a = normal.clone();
        let a2 = normal.clone();
        Self {
            g: Arc::new(move |x, t| a.dot(x) + time_coeff * t - offset),
            grad: Some(Arc::new(move |_, _| (a2.clone(), time_coeff))),
            shape: GuardShape::Affine { normal, time_coeff, offset },
        }
    }

    /// Fires when the state component `index` reaches `level` from below
    /// (`increasing = true`) or from above.
    pub fn threshold(dim: usize, index: usize, level: f64, increasing: bool) -> Self {
        let sign = if increasing { 1.0 } else { -1.0 };
        let mut a = Vector::zeros(dim);
        a[index] = sign;
        Self::affine(a, 0.0, sign * level)
    }

    /// Purely timed guard `g = t − at`.
    pub fn timed(dim: usize, at: f64) -> Self {
        Self::affine(Vector::zeros(dim), 1.0, at)
    }

    /// `g(x) = sign·(‖x_I − center‖ − radius)`; `sign = 1` fires on leaving the sphere.
    pub fn sphere(indices: Vec<usize>, center: Vec<f64>, radius: f64, sign: f64) -> Self {
        let (i1, c1) = (indices.clone(), center.clone());
        let (i2, c2) = (indices.clone(), center.clone());
        Self {
            g: Arc::new(move |x, _| {
                let d2: f64 = i1.iter().zip(&c1).map(|(&i, c)| (x[i] - c).powi(2)).sum();
                sign * (d2.sqrt() - radius)
            }),
            grad: Some(Arc::new(move |x, _| {
                let mut gx = Vector::zeros(x.len());
                let d: f64 =
                    i2.iter().zip(&c2).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>().sqrt();
                if d > 0.0 {
                    for (&i, c) in i2.iter().zip(&c2) {
                        gx[i] = sign * (x[i] - c) / d;
                    }
                }
                (gx, 0.0)
            })),
            shape: GuardShape::Sphere { indices, center, radius, sign },
        }
    }

    #[inline]
    pub fn eval(&self, x: &Vector, t: f64) -> f64 {
        (self.g)(x, t)
    }

    /// `(∂g/∂x, ∂g/∂t)` at `(x, t)`.
    pub fn gradient(&self, x: &Vector, t: f64) -> (Vector, f64) {
        match &self.grad {
            Some(d) => d(x, t),
            None => {
                let gx = fd::gradient(|xp| (self.g)(xp, t), x);
                let gt = fd::derivative(|tp| (self.g)(x, tp), t);
                (gx, gt)
            }
        }
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn shape(&self) -> &GuardShape {
        &self.shape
    }
}

impl fmt::Debug for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Guard")
            .field("shape", &self.shape)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

/// Reset map `x' = h(x)`.
#[derive(Clone)]
pub struct Reset {
    h: Option<Arc<StateMapFn>>,
    jac: Option<Arc<StateJacFn>>,
}

impl Reset {
    pub fn identity() -> Self {
        Self { h: None, jac: None }
    }

    pub fn new<H>(h: H) -> Self
    where
        H: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self { h: Some(Arc::new(h)), jac: None }
    }

    pub fn with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(j));
        self
    }

    /// `x' = M x` with its exact Jacobian.
    pub fn linear(m: Matrix) -> Self {
        let m2 = m.clone();
        Self { h: Some(Arc::new(move |x| &m * x)), jac: Some(Arc::new(move |_| m2.clone())) }
    }

    pub fn is_identity(&self) -> bool {
        self.h.is_none()
    }

    #[inline]
    pub fn apply(&self, x: &Vector) -> Vector {
        match &self.h {
            Some(h) => h(x),
            None => x.clone(),
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        match (&self.h, &self.jac) {
            (None, _) => Matrix::identity(x.len(), x.len()),
            (Some(_), Some(j)) => j(x),
            (Some(h), None) => fd::jacobian(|xp| h(xp), x, x.len()),
        }
    }

    pub fn has_jacobian(&self) -> bool {
        self.h.is_none() || self.jac.is_some()
    }
}

impl fmt::Debug for Reset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            f.write_str("Reset::identity")
        } else {
            f.debug_struct("Reset").field("analytic_jacobian", &self.jac.is_some()).finish()
        }
    }
}

/// Location invariant expressed as a signed margin: `margin(x, t) ≥ 0` inside.
#[derive(Clone)]
pub struct Invariant {
    margin: Option<Arc<MarginFn>>,
}

impl Invariant {
    pub fn always() -> Self {
        Self { margin: None }
    }

    pub fn new<M>(margin: M) -> Self
    where
        M: Fn(&Vector, f64) -> f64 + Send + Sync + 'static,
    {
        Self { margin: Some(Arc::new(margin)) }
    }

    pub fn margin(&self, x: &Vector, t: f64) -> f64 {
        match &self.margin {
            Some(m) => m(x, t),
            None => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &Vector, t: f64, tol: f64) -> bool {
        self.margin(x, t) >= -tol
    }
}

impl fmt::Debug for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.margin.is_some() { "Invariant" } else { "Invariant::always" })
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub source: Location,
    pub target: Location,
    pub guard: Guard,
    pub reset: Reset,
    pub label: String,
}

impl Transition {
    pub fn new(source: Location, target: Location, guard: Guard) -> Self {
        Self { source, target, guard, reset: Reset::identity(), label: format!("{source}->{target}") }
    }

    pub fn with_reset(mut self, reset: Reset) -> Self {
        self.reset = reset;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Map from the decision vector `(x0, θ)` to the state at time zero.
///
/// Models without one start at `x0` directly. A custom map lets a searchable
/// parameter shape the initial state (e.g. a throw angle setting the initial
/// velocity); its Jacobians seed the sensitivities at `t = 0`.
#[derive(Clone)]
pub struct InitialMap {
    map: Arc<InitFn>,
    jac_x0: Arc<InitJacFn>,
    jac_theta: Arc<InitJacFn>,
}

impl InitialMap {
    pub fn new<M, Jx, Jt>(map: M, jac_x0: Jx, jac_theta: Jt) -> Self
    where
        M: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        Jx: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
        Jt: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        Self { map: Arc::new(map), jac_x0: Arc::new(jac_x0), jac_theta: Arc::new(jac_theta) }
    }
}

impl fmt::Debug for InitialMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InitialMap")
    }
}

#[derive(Debug, Clone)]
pub struct HybridAutomaton {
    pub name: String,
    pub state_dim: usize,
    pub input_dim: usize,
    pub state_names: Vec<String>,
    pub locations: BTreeSet<Location>,
    pub dynamics: BTreeMap<Location, VectorField>,
    pub invariants: BTreeMap<Location, Invariant>,
    pub transitions: Vec<Transition>,
    pub initial_location: Location,
    pub unsafe_location: Option<Location>,
    pub initial_map: Option<InitialMap>,
}

impl HybridAutomaton {
    pub fn new(name: impl Into<String>, state_dim: usize, input_dim: usize) -> Self {
        Self {
            name: name.into(),
            state_dim,
            input_dim,
            state_names: (1..=state_dim).map(|i| format!("x{i}")).collect(),
            locations: BTreeSet::new(),
            dynamics: BTreeMap::new(),
            invariants: BTreeMap::new(),
            transitions: Vec::new(),
            initial_location: 0,
            unsafe_location: None,
            initial_map: None,
        }
    }

    pub fn with_state_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.state_names = names.into_iter().map(Into::into).collect();
        self
    }

    /// Declare a location with its dynamics and invariant.
    pub fn location(mut self, id: Location, field: VectorField, invariant: Invariant) -> Self {
        self.locations.insert(id);
        self.dynamics.insert(id, field);
        self.invariants.insert(id, invariant);
        self
    }

    /// Declare a location without dynamics (only useful for building degenerate models).
    pub fn bare_location(mut self, id: Location) -> Self {
        self.locations.insert(id);
        self
    }

    pub fn transition(mut self, tr: Transition) -> Self {
        self.transitions.push(tr);
        self
    }

    pub fn initial(mut self, l0: Location) -> Self {
        self.initial_location = l0;
        self
    }

    pub fn unsafe_at(mut self, l: Location) -> Self {
        self.unsafe_location = Some(l);
        self
    }

    pub fn with_initial_map(mut self, map: InitialMap) -> Self {
        self.initial_map = Some(map);
        self
    }

    /// Index of the state variable called `name`, accepting `x1..xn` as aliases.
    pub fn state_index(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.state_names.iter().position(|s| s == name) {
            return Some(i);
        }
        let idx: usize = name.strip_prefix('x')?.parse().ok()?;
        (1..=self.state_dim).contains(&idx).then(|| idx - 1)
    }

    /// Outgoing transitions of `l`, with their indices.
    pub fn outgoing(&self, l: Location) -> impl Iterator<Item = (usize, &Transition)> {
        self.transitions.iter().enumerate().filter(move |(_, t)| t.source == l)
    }

    /// Adjacency derived from the transition list.
    pub fn location_graph(&self) -> BTreeMap<Location, BTreeSet<Location>> {
        let mut g: BTreeMap<Location, BTreeSet<Location>> =
            self.locations.iter().map(|&l| (l, BTreeSet::new())).collect();
        for t in &self.transitions {
            g.entry(t.source).or_default().insert(t.target);
        }
        g
    }

    /// Hop distance from every location to `goal` along transitions.
    pub fn hops_to(&self, goal: Location) -> BTreeMap<Location, usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(goal, 0usize);
        queue.push_back(goal);
        while let Some(l) = queue.pop_front() {
            let d = dist[&l];
            for t in self.transitions.iter().filter(|t| t.target == l) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(t.source) {
                    e.insert(d + 1);
                    queue.push_back(t.source);
                }
            }
        }
        dist
    }

    pub fn field(&self, l: Location) -> &VectorField {
        &self.dynamics[&l]
    }

    pub fn invariant(&self, l: Location) -> Option<&Invariant> {
        self.invariants.get(&l)
    }

    /// State at time zero for the decision vector `(x0, θ)`.
    pub fn initial_state(&self, x0: &Vector, theta: &Vector) -> Vector {
        match &self.initial_map {
            Some(m) => (m.map)(x0, theta),
            None => x0.clone(),
        }
    }

    /// `(∂s(0)/∂x0, ∂s(0)/∂θ)`.
    pub fn initial_sensitivity(&self, x0: &Vector, theta: &Vector) -> (Matrix, Matrix) {
        match &self.initial_map {
            Some(m) => ((m.jac_x0)(x0, theta), (m.jac_theta)(x0, theta)),
            None => (
                Matrix::identity(self.state_dim, self.state_dim),
                Matrix::zeros(self.state_dim, theta.len()),
            ),
        }
    }
}

/// A structural defect found by [`validate_automaton`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownSourceLocation { transition: usize, location: Location },
    UnknownTargetLocation { transition: usize, location: Location },
    MissingDynamics { location: Location },
    UnknownInitialLocation { location: Location },
    UnknownUnsafeLocation { location: Location },
    /// A guard whose gradient does not match a scalar function of the state.
    NonScalarGuard { transition: usize },
    JacobianShape { what: String, expected: (usize, usize), found: (usize, usize) },
    InconsistentLocationGraph,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownSourceLocation { transition, location } => {
                write!(f, "unknown source location {location} in transition {transition}")
            }
            Self::UnknownTargetLocation { transition, location } => {
                write!(f, "unknown target location {location} in transition {transition}")
            }
            Self::MissingDynamics { location } => write!(f, "missing dynamics for location {location}"),
            Self::UnknownInitialLocation { location } => {
                write!(f, "unknown initial location {location}")
            }
            Self::UnknownUnsafeLocation { location } => write!(f, "unknown unsafe location {location}"),
            Self::NonScalarGuard { transition } => {
                write!(f, "non-scalar guard in transition {transition}")
            }
            Self::JacobianShape { what, expected, found } => write!(
                f,
                "{what} has shape {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Self::InconsistentLocationGraph => f.write_str("location graph disagrees with transitions"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Derivatives that will be produced by finite differences.
    pub fd_fallbacks: Vec<String>,
}

impl ValidationReport {
    /// True when no structural violation was found; fallbacks are informational.
    pub fn is_well_formed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.fd_fallbacks.is_empty()
    }
}

/// Structural checks. Mutual exclusivity of guards and non-Zenoness cannot be
/// decided statically; the simulator checks them at run time.
pub fn validate_automaton(ha: &HybridAutomaton) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = ha.state_dim;
    let m = ha.input_dim;

    for &l in &ha.locations {
        if !ha.dynamics.contains_key(&l) {
            report.violations.push(Violation::MissingDynamics { location: l });
        }
    }
    if !ha.locations.contains(&ha.initial_location) {
        report.violations.push(Violation::UnknownInitialLocation { location: ha.initial_location });
    }
    if let Some(lu) = ha.unsafe_location {
        if !ha.locations.contains(&lu) {
            report.violations.push(Violation::UnknownUnsafeLocation { location: lu });
        }
    }
    for (i, t) in ha.transitions.iter().enumerate() {
        if !ha.locations.contains(&t.source) {
            report.violations.push(Violation::UnknownSourceLocation { transition: i, location: t.source });
        }
        if !ha.locations.contains(&t.target) {
            report.violations.push(Violation::UnknownTargetLocation { transition: i, location: t.target });
        }
    }

    let graph = ha.location_graph();
    let edges: usize = graph.values().map(BTreeSet::len).sum();
    let distinct: BTreeSet<_> = ha.transitions.iter().map(|t| (t.source, t.target)).collect();
    if edges != distinct.len() || graph.keys().any(|l| !ha.locations.contains(l)) {
        report.violations.push(Violation::InconsistentLocationGraph);
    }

    // Shape probes at the origin.
    let x = Vector::zeros(n);
    let u = Vector::zeros(m);
    for (&l, field) in &ha.dynamics {
        let f = field.eval(&x, &u, 0.0);
        if f.len() != n {
            report.violations.push(Violation::JacobianShape {
                what: format!("vector field of location {l}"),
                expected: (n, 1),
                found: (f.len(), 1),
            });
            continue;
        }
        if field.has_state_jacobian() {
            let j = field.state_jacobian(&x, &u, 0.0);
            if j.shape() != (n, n) {
                report.violations.push(Violation::JacobianShape {
                    what: format!("state Jacobian of location {l}"),
                    expected: (n, n),
                    found: j.shape(),
                });
            }
        } else {
            report.fd_fallbacks.push(format!("state Jacobian of location {l}"));
        }
        if m > 0 {
            if field.has_input_jacobian() {
                let j = field.input_jacobian(&x, &u, 0.0);
                if j.shape() != (n, m) {
                    report.violations.push(Violation::JacobianShape {
                        what: format!("input Jacobian of location {l}"),
                        expected: (n, m),
                        found: j.shape(),
                    });
                }
            } else {
                report.fd_fallbacks.push(format!("input Jacobian of location {l}"));
            }
        }
    }
    for (i, t) in ha.transitions.iter().enumerate() {
        if t.guard.has_gradient() {
            let (gx, _) = t.guard.gradient(&x, 0.0);
            if gx.len() != n {
                report.violations.push(Violation::NonScalarGuard { transition: i });
            }
        } else {
            report.fd_fallbacks.push(format!("guard gradient of transition {i}"));
        }
        if !t.reset.has_jacobian() {
            report.fd_fallbacks.push(format!("reset Jacobian of transition {i}"));
        } else if !t.reset.is_identity() {
            let j = t.reset.jacobian(&x);
            if j.shape() != (n, n) {
                report.violations.push(Violation::JacobianShape {
                    what: format!("reset Jacobian of transition {i}"),
                    expected: (n, n),
                    found: j.shape(),
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> VectorField {
        VectorField::new(move |_, _, _| Vector::from_element(n, 1.0))
            .with_state_jacobian(move |_, _, _| Matrix::zeros(n, n))
    }

    #[test]
    fn unknown_target_location_is_reported() {
        let ha = HybridAutomaton::new("bad", 1, 0)
            .location(0, line(1), Invariant::always())
            .transition(Transition::new(0, 7, Guard::threshold(1, 0, 1.0, true)));
        let rep = validate_automaton(&ha);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.to_string().contains("unknown target location")));
    }

    #[test]
    fn missing_dynamics_is_reported() {
        let ha = HybridAutomaton::new("bad", 1, 0)
            .location(1, line(1), Invariant::always())
            .bare_location(2)
            .initial(1)
            .transition(Transition::new(1, 2, Guard::threshold(1, 0, 1.0, true)));
        let rep = validate_automaton(&ha);
        assert_eq!(rep.violations, vec![Violation::MissingDynamics { location: 2 }]);
        assert!(rep.violations[0].to_string().contains("missing dynamics"));
    }

    #[test]
    fn fd_fallback_is_flagged_not_violated() {
        let ha = HybridAutomaton::new("fd", 1, 1)
            .location(0, VectorField::new(|x, u, _| x * -1.0 + u), Invariant::always())
            .transition(Transition::new(0, 0, Guard::new(|x, _| x[0] - 2.0)));
        let rep = validate_automaton(&ha);
        assert!(rep.is_well_formed());
        assert_eq!(rep.fd_fallbacks.len(), 3);
    }

    #[test]
    fn fd_jacobians_match_analytic() {
        let f = VectorField::new(|x, u, _| Vector::from_vec(vec![x[0] * x[1] + u[0], x[0].sin()]));
        let x = Vector::from_vec(vec![0.4, -1.2]);
        let u = Vector::from_vec(vec![0.3]);
        let j = f.state_jacobian(&x, &u, 0.0);
        assert!((j[(0, 0)] + 1.2).abs() < 1e-8);
        assert!((j[(0, 1)] - 0.4).abs() < 1e-8);
        assert!((j[(1, 0)] - 0.4f64.cos()).abs() < 1e-8);
        let ju = f.input_jacobian(&x, &u, 0.0);
        assert!((ju[(0, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hop_distances_follow_reverse_edges() {
        let ha = HybridAutomaton::new("chain", 1, 0)
            .location(1, line(1), Invariant::always())
            .location(2, line(1), Invariant::always())
            .location(3, line(1), Invariant::always())
            .location(4, line(1), Invariant::always())
            .initial(1)
            .transition(Transition::new(1, 2, Guard::threshold(1, 0, 1.0, true)))
            .transition(Transition::new(2, 3, Guard::threshold(1, 0, 2.0, true)));
        let d = ha.hops_to(3);
        assert_eq!(d.get(&1), Some(&2));
        assert_eq!(d.get(&2), Some(&1));
        assert_eq!(d.get(&3), Some(&0));
        assert_eq!(d.get(&4), None);
    }

    #[test]
    fn state_index_accepts_names_and_aliases() {
        let ha = HybridAutomaton::new("n", 3, 0).with_state_names(["G", "X", "I"]);
        assert_eq!(ha.state_index("X"), Some(1));
        assert_eq!(ha.state_index("x3"), Some(2));
        assert_eq!(ha.state_index("x4"), None);
    }
}
