//! Set-membership predicates and their signed distances.

use serde::{Deserialize, Serialize};

use crate::automaton::Location;
use crate::tl::TlError;
use crate::Vector;

/// Robustness of a location-constrained predicate evaluated off its location.
pub const OFF_LOCATION: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Reach the set: positive inside.
    In,
    /// Avoid the set: positive outside.
    Out,
}

impl Polarity {
    pub fn flip(self) -> Self {
        match self {
            Polarity::In => Polarity::Out,
            Polarity::Out => Polarity::In,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetKind {
    /// Axis-aligned box; infinite bounds are allowed.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `aᵀx ≤ b`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSet {
    pub kind: SetKind,
    /// State components the set constrains, in the order of the set's coordinates.
    pub projection: Vec<usize>,
    pub location: Option<Location>,
}

impl PredicateSet {
    pub fn new(kind: SetKind, projection: Vec<usize>) -> Result<Self, TlError> {
        let dim = match &kind {
            SetKind::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(TlError::InvalidSet("box bounds differ in length".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(TlError::InvalidSet("box bounds are not ordered".into()));
                }
                lo.len()
            }
            SetKind::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(TlError::InvalidSet("ball radius must be positive".into()));
                }
                center.len()
            }
            SetKind::HalfSpace { normal, .. } => {
                if normal.iter().all(|&a| a == 0.0) {
                    return Err(TlError::InvalidSet("half-space normal is zero".into()));
                }
                normal.len()
            }
        };
        if dim != projection.len() || dim == 0 {
            return Err(TlError::InvalidSet(format!(
                "set has {dim} coordinates but projects {} state components",
                projection.len()
            )));
        }
        Ok(Self { kind, projection, location: None })
    }

    pub fn in_box(projection: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, TlError> {
        Self::new(SetKind::Box { lo, hi }, projection)
    }

    pub fn ball(projection: Vec<usize>, center: Vec<f64>, radius: f64) -> Result<Self, TlError> {
        Self::new(SetKind::Ball { center, radius }, projection)
    }

    pub fn half_space(projection: Vec<usize>, normal: Vec<f64>, offset: f64) -> Result<Self, TlError> {
        Self::new(SetKind::HalfSpace { normal, offset }, projection)
    }

    pub fn at_location(mut self, l: Location) -> Self {
        self.location = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        self.projection.len()
    }

    pub fn project(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.dim(), self.projection.iter().map(|&i| x[i]))
    }

    /// `x` with the constrained components replaced by `z`.
    pub fn embed(&self, x: &Vector, z: &Vector) -> Vector {
        let mut full = x.clone();
        for (k, &i) in self.projection.iter().enumerate() {
            full[i] = z[k];
        }
        full
    }

    pub fn contains_projected(&self, y: &Vector) -> bool {
        match &self.kind {
            SetKind::Box { lo, hi } => (0..y.len()).all(|k| lo[k] <= y[k] && y[k] <= hi[k]),
            SetKind::Ball { center, radius } => dist(y, center) <= *radius,
            SetKind::HalfSpace { normal, offset } => dot(normal, y) <= *offset,
        }
    }

    /// Signed distance in projected coordinates: distance to the set when
    /// outside, minus the distance to the complement when inside. Also returns
    /// the nearest point of the set (outside) or of its boundary (inside).
    pub fn boundary_distance(&self, y: &Vector) -> (f64, Vector) {
        match &self.kind {
            SetKind::Box { lo, hi } => box_distance(y, lo, hi),
            SetKind::Ball { center, radius } => {
                let c = Vector::from_column_slice(center);
                let diff = y - &c;
                let d = diff.norm();
                let dir = if d > 0.0 {
                    diff / d
                } else {
                    let mut e = Vector::zeros(y.len());
                    e[0] = 1.0;
                    e
                };
                (d - radius, c + dir * *radius)
            }
            SetKind::HalfSpace { normal, offset } => {
                let a = Vector::from_column_slice(normal);
                let an = a.norm();
                let excess = a.dot(y) - offset;
                (excess / an, y - &a * (excess / (an * an)))
            }
        }
    }
}

fn dot(a: &[f64], y: &Vector) -> f64 {
    a.iter().zip(y.iter()).map(|(p, q)| p * q).sum()
}

fn dist(y: &Vector, c: &[f64]) -> f64 {
    y.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn box_distance(y: &Vector, lo: &[f64], hi: &[f64]) -> (f64, Vector) {
    let inside = (0..y.len()).all(|k| lo[k] <= y[k] && y[k] <= hi[k]);
    if !inside {
        let z = Vector::from_iterator(y.len(), (0..y.len()).map(|k| y[k].clamp(lo[k], hi[k])));
        return ((y - &z).norm(), z);
    }
    // nearest face, lowest coordinate first on ties
    let mut best = f64::INFINITY;
    let mut z = y.clone();
    for k in 0..y.len() {
        for face in [lo[k], hi[k]] {
            let d = (y[k] - face).abs();
            if face.is_finite() && d < best {
                best = d;
                z = y.clone();
                z[k] = face;
            }
        }
    }
    (-best, z)
}

/// Distance from `x` to the set and the nearest set point, in projected coordinates.
pub fn distance_to_set(x: &Vector, s: &PredicateSet) -> (f64, Vector) {
    let y = s.project(x);
    let (d, z) = s.boundary_distance(&y);
    if d > 0.0 {
        (d, z)
    } else {
        (0.0, y)
    }
}

/// Robust value of the predicate at a state, ignoring location constraints.
pub fn signed_distance(x: &Vector, s: &PredicateSet, polarity: Polarity) -> f64 {
    signed_distance_with_point(x, s, polarity).0
}

pub fn signed_distance_with_point(x: &Vector, s: &PredicateSet, polarity: Polarity) -> (f64, Vector) {
    let y = s.project(x);
    let (d, z) = s.boundary_distance(&y);
    let v = match polarity {
        Polarity::Out => d,
        Polarity::In => -d,
    };
    // map -0.0 to 0.0 so both polarities agree on the boundary
    (v + 0.0, z)
}

/// Predicate robustness including the off-location sentinel.
pub fn predicate_value(x: &Vector, loc: Location, s: &PredicateSet, polarity: Polarity) -> f64 {
    match s.location {
        Some(l) if l != loc => match polarity {
            Polarity::Out => OFF_LOCATION,
            Polarity::In => -OFF_LOCATION,
        },
        _ => signed_distance(x, s, polarity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn nearest_corner_of_box() {
        let b = PredicateSet::in_box(vec![0, 1], vec![1.0, 1.0], vec![2.0, 2.0]).unwrap();
        let (d, z) = distance_to_set(&v(&[0.0, 0.0]), &b);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(z, v(&[1.0, 1.0]));
        let (d, z) = distance_to_set(&v(&[1.5, 1.2]), &b);
        assert_eq!(d, 0.0);
        assert_eq!(z, v(&[1.5, 1.2]));
    }

    #[test]
    fn ball_projection() {
        let hole = PredicateSet::ball(vec![0, 1], vec![0.2, 1.6], 0.1).unwrap();
        let (d, z) = distance_to_set(&v(&[0.2, 1.8]), &hole);
        assert!((d - 0.1).abs() < 1e-12);
        assert!((z - v(&[0.2, 1.7])).norm() < 1e-12);
    }

    #[test]
    fn polarity_signs() {
        let b = PredicateSet::in_box(vec![0], vec![0.0], vec![1.0]).unwrap();
        assert!((signed_distance(&v(&[0.3]), &b, Polarity::Out) + 0.3).abs() < 1e-15);
        assert!((signed_distance(&v(&[0.3]), &b, Polarity::In) - 0.3).abs() < 1e-15);
        assert!((signed_distance(&v(&[1.5]), &b, Polarity::Out) - 0.5).abs() < 1e-15);
        for p in [Polarity::In, Polarity::Out] {
            assert_eq!(signed_distance(&v(&[1.0]), &b, p), 0.0);
            assert!(signed_distance(&v(&[1.0]), &b, p).is_sign_positive());
        }
    }

    #[test]
    fn half_space_distance() {
        let h = PredicateSet::half_space(vec![0, 1], vec![3.0, 4.0], 5.0).unwrap();
        let (d, z) = h.boundary_distance(&v(&[3.0, 4.0]));
        assert!((d - 4.0).abs() < 1e-12);
        assert!((3.0 * z[0] + 4.0 * z[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn half_infinite_box() {
        let b = PredicateSet::in_box(vec![0], vec![5.1], vec![f64::INFINITY]).unwrap();
        assert!((signed_distance(&v(&[4.0]), &b, Polarity::Out) - 1.1).abs() < 1e-12);
        assert!((signed_distance(&v(&[6.0]), &b, Polarity::Out) + 0.9).abs() < 1e-12);
    }

    #[test]
    fn off_location_sentinel() {
        let b = PredicateSet::in_box(vec![0], vec![0.0], vec![1.0]).unwrap().at_location(2);
        assert_eq!(predicate_value(&v(&[0.5]), 1, &b, Polarity::Out), OFF_LOCATION);
        assert_eq!(predicate_value(&v(&[0.5]), 1, &b, Polarity::In), -OFF_LOCATION);
        assert_eq!(predicate_value(&v(&[0.5]), 2, &b, Polarity::Out), -0.5);
    }

    #[test]
    fn invalid_sets() {
        assert!(PredicateSet::in_box(vec![0], vec![2.0], vec![1.0]).is_err());
        assert!(PredicateSet::ball(vec![0], vec![0.0], 0.0).is_err());
        assert!(PredicateSet::half_space(vec![0], vec![0.0], 1.0).is_err());
        assert!(PredicateSet::in_box(vec![0, 1], vec![0.0], vec![1.0]).is_err());
    }
}
