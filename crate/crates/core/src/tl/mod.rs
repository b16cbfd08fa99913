//! Temporal-logic formulas over set predicates and their robust semantics.

mod monitor;
mod parse;
mod predicate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use monitor::{eval_robustness, eval_samples, robustness_signal, RobustnessResult, Witness};
pub use parse::{parse_formula, ParseError};
pub use predicate::{
    distance_to_set, predicate_value, signed_distance, signed_distance_with_point, Polarity, PredicateSet, SetKind,
    OFF_LOCATION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TlError {
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("interval [{a}, {b}] is not inside [0, {horizon}]")]
    IntervalOutOfRange { a: f64, b: f64, horizon: f64 },
    #[error("invalid predicate set: {0}")]
    InvalidSet(String),
    #[error("predicate refers to state component {index} of a {dim}-dimensional system")]
    ProjectionOutOfRange { index: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Pred { set: PredicateSet, polarity: Polarity },
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Always { a: f64, b: f64, body: Box<Formula> },
    Eventually { a: f64, b: f64, body: Box<Formula> },
}

impl Formula {
    pub fn inside(set: PredicateSet) -> Self {
        Formula::Pred { set, polarity: Polarity::In }
    }

    pub fn outside(set: PredicateSet) -> Self {
        Formula::Pred { set, polarity: Polarity::Out }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(fs: Vec<Formula>) -> Self {
        Formula::And(fs)
    }

    pub fn or(fs: Vec<Formula>) -> Self {
        Formula::Or(fs)
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn always(a: f64, b: f64, body: Formula) -> Self {
        Formula::Always { a, b, body: Box::new(body) }
    }

    pub fn eventually(a: f64, b: f64, body: Formula) -> Self {
        Formula::Eventually { a, b, body: Box::new(body) }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Pred { .. } => 1,
            Formula::Not(f) | Formula::Always { body: f, .. } | Formula::Eventually { body: f, .. } => 1 + f.depth(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Implies(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Predicates in evaluation order; a witness's `leaf` indexes this list.
    pub fn leaves(&self) -> Vec<(&PredicateSet, Polarity)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a PredicateSet, Polarity)>) {
        match self {
            Formula::Pred { set, polarity } => out.push((set, *polarity)),
            Formula::Not(f) | Formula::Always { body: f, .. } | Formula::Eventually { body: f, .. } => {
                f.collect_leaves(out)
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_leaves(out)),
            Formula::Implies(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    /// Check interval bounds against the horizon and projections against the state dimension.
    pub fn check(&self, horizon: f64, state_dim: usize) -> Result<(), TlError> {
        match self {
            Formula::Pred { set, .. } => match set.projection.iter().find(|&&i| i >= state_dim) {
                Some(&index) => Err(TlError::ProjectionOutOfRange { index, dim: state_dim }),
                None => Ok(()),
            },
            Formula::Not(f) => f.check(horizon, state_dim),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().try_for_each(|f| f.check(horizon, state_dim)),
            Formula::Implies(a, b) => {
                a.check(horizon, state_dim)?;
                b.check(horizon, state_dim)
            }
            Formula::Always { a, b, body } | Formula::Eventually { a, b, body } => {
                if !(*a >= 0.0 && a <= b && *b <= horizon + 1e-9) {
                    return Err(TlError::IntervalOutOfRange { a: *a, b: *b, horizon });
                }
                body.check(horizon, state_dim)
            }
        }
    }

    /// Prefix s-expression using `x1..xn` for state components.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, s: &mut String) {
        use std::fmt::Write;
        match self {
            Formula::Pred { set, polarity } => {
                let pre = match polarity {
                    Polarity::In => "in",
                    Polarity::Out => "out",
                };
                let vars = || set.projection.iter().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join(" ");
                match &set.kind {
                    SetKind::Box { lo, hi } => {
                        write!(s, "({pre}-box").unwrap();
                        for (k, i) in set.projection.iter().enumerate() {
                            write!(s, " x{} {} {}", i + 1, lo[k], hi[k]).unwrap();
                        }
                    }
                    SetKind::Ball { center, radius } => {
                        write!(s, "({pre}-ball {}", vars()).unwrap();
                        for c in center {
                            write!(s, " {c}").unwrap();
                        }
                        write!(s, " {radius}").unwrap();
                    }
                    SetKind::HalfSpace { normal, offset } => {
                        write!(s, "({pre}-halfspace {}", vars()).unwrap();
                        for a in normal {
                            write!(s, " {a}").unwrap();
                        }
                        write!(s, " {offset}").unwrap();
                    }
                }
                if let Some(l) = set.location {
                    write!(s, " @loc {l}").unwrap();
                }
                s.push(')');
            }
            Formula::Not(f) => {
                s.push_str("(not ");
                f.write_sexpr(s);
                s.push(')');
            }
            Formula::And(fs) | Formula::Or(fs) => {
                s.push_str(if matches!(self, Formula::And(_)) { "(and" } else { "(or" });
                for f in fs {
                    s.push(' ');
                    f.write_sexpr(s);
                }
                s.push(')');
            }
            Formula::Implies(a, b) => {
                s.push_str("(implies ");
                a.write_sexpr(s);
                s.push(' ');
                b.write_sexpr(s);
                s.push(')');
            }
            Formula::Always { a, b, body } | Formula::Eventually { a, b, body } => {
                let op = if matches!(self, Formula::Always { .. }) { "always" } else { "eventually" };
                write!(s, "({op} {a} {b} ").unwrap();
                body.write_sexpr(s);
                s.push(')');
            }
        }
    }
}
