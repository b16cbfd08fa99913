//! Search space over initial states and input parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::input::{InputError, PiecewiseConstantInput};
use crate::Vector;

/// A decision vector `w = (x0, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub x0: Vec<f64>,
    pub theta: Vec<f64>,
}

impl SearchPoint {
    pub fn new(x0: Vec<f64>, theta: Vec<f64>) -> Self {
        Self { x0, theta }
    }

    pub fn x0_vector(&self) -> Vector {
        Vector::from_column_slice(&self.x0)
    }

    pub fn theta_vector(&self) -> Vector {
        Vector::from_column_slice(&self.theta)
    }

    /// `(x0, θ)` concatenated.
    pub fn flat(&self) -> Vec<f64> {
        self.x0.iter().chain(&self.theta).copied().collect()
    }
}

/// Box constraints `X0 × U` plus the input grid used to turn `θ` into a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub x0_bounds: Vec<(f64, f64)>,
    pub input: PiecewiseConstantInput,
}

impl SearchSpace {
    pub fn new(x0_bounds: Vec<(f64, f64)>, input: PiecewiseConstantInput) -> Self {
        Self { x0_bounds, input }
    }

    pub fn state_dim(&self) -> usize {
        self.x0_bounds.len()
    }

    pub fn param_count(&self) -> usize {
        self.input.param_count()
    }

    /// All bounds, `x0` first.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.x0_bounds.clone();
        b.extend(self.input.param_bounds());
        b
    }

    /// Number of dimensions with nonzero width.
    pub fn search_dim(&self) -> usize {
        self.bounds().iter().filter(|(lo, hi)| hi > lo).count()
    }

    /// True for the dimensions that can move.
    pub fn free_mask(&self) -> Vec<bool> {
        self.bounds().iter().map(|(lo, hi)| hi > lo).collect()
    }

    pub fn contains(&self, p: &SearchPoint) -> bool {
        p.x0.len() == self.state_dim()
            && p.theta.len() == self.param_count()
            && p.flat().iter().zip(self.bounds()).all(|(v, (lo, hi))| (lo..=hi).contains(v))
    }

    pub fn clamp(&self, p: &SearchPoint) -> SearchPoint {
        let n = self.state_dim();
        let flat: Vec<f64> =
            p.flat().iter().zip(self.bounds()).map(|(v, (lo, hi))| v.clamp(lo, hi)).collect();
        SearchPoint { x0: flat[..n].to_vec(), theta: flat[n..].to_vec() }
    }

    pub fn from_flat(&self, flat: &[f64]) -> SearchPoint {
        let n = self.state_dim();
        SearchPoint { x0: flat[..n].to_vec(), theta: flat[n..].to_vec() }
    }

    /// Input signal for the parameters of `p`.
    pub fn input_for(&self, p: &SearchPoint) -> Result<PiecewiseConstantInput, InputError> {
        self.input.with_params(&p.theta)
    }

    pub fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> SearchPoint {
        let flat: Vec<f64> = self
            .bounds()
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect();
        self.from_flat(&flat)
    }

    pub fn midpoint(&self) -> SearchPoint {
        let flat: Vec<f64> = self.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        self.from_flat(&flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::InputChannel;
    use rand::SeedableRng;

    fn space() -> SearchSpace {
        SearchSpace::new(
            vec![(0.0, 1.0), (0.5, 1.0), (0.0, 0.0)],
            PiecewiseConstantInput::new(vec![InputChannel::uniform(3, 10.0, 0.0, (-1.0, 1.0))])
                .unwrap(),
        )
    }

    #[test]
    fn clamp_and_contains() {
        let s = space();
        let p = SearchPoint::new(vec![1.3, 0.7, 0.0], vec![0.0, -2.0, 0.5]);
        assert!(!s.contains(&p));
        let c = s.clamp(&p);
        assert_eq!(c.x0, vec![1.0, 0.7, 0.0]);
        assert_eq!(c.theta, vec![0.0, -1.0, 0.5]);
        assert!(s.contains(&c));
    }

    #[test]
    fn degenerate_dimensions_are_not_free() {
        let s = space();
        assert_eq!(s.search_dim(), 5);
        assert_eq!(s.free_mask(), vec![true, true, false, true, true, true]);
    }

    #[test]
    fn uniform_samples_stay_in_box() {
        let s = space();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(s.contains(&s.uniform(&mut rng)));
        }
    }
}
