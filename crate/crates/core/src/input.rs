//! Piecewise-constant input signals.
//!
//! Each channel has its own strictly increasing grid `t_0 < … < t_k` and one
//! value per segment. A segment is closed on the left and open on the right,
//! except the last one which also covers `t_k`. Constant model parameters are
//! one-segment channels.
//!
//! The flattened parameter vector `θ` is channel-major: all segments of
//! channel 0, then channel 1, and so on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("time {t} outside input domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("channel {channel}: grid must be strictly increasing with at least two points")]
    BadGrid { channel: usize },
    #[error("channel {channel}: {values} values for {segments} segments")]
    SegmentCount { channel: usize, values: usize, segments: usize },
    #[error("channel {channel}: bounds [{lo}, {hi}] are not ordered")]
    BadBounds { channel: usize, lo: f64, hi: f64 },
    #[error("channel grids disagree on the horizon")]
    HorizonMismatch,
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputChannel {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bounds: (f64, f64),
}

impl InputChannel {
    /// Equal-length segments over `[0, horizon]`, all set to `value`.
    pub fn uniform(segments: usize, horizon: f64, value: f64, bounds: (f64, f64)) -> Self {
        let grid = (0..=segments).map(|i| horizon * i as f64 / segments as f64).collect();
        Self { grid, values: vec![value; segments], bounds }
    }

    /// A constant parameter over `[0, horizon]`.
    pub fn constant(horizon: f64, value: f64, bounds: (f64, f64)) -> Self {
        Self::uniform(1, horizon, value, bounds)
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    /// Index of the segment active at `t` (already known to be in the domain).
    fn segment_at(&self, t: f64) -> usize {
        let k = self.values.len();
        // number of interior breakpoints <= t
        let inner = &self.grid[1..k];
        inner.partition_point(|&b| b <= t)
    }
}

/// The linear map from `θ` to `u(t)`: for each channel, the index of the
/// active parameter. Each channel's block of the selection matrix is a unit
/// row vector; every other entry is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    pub active: Vec<usize>,
    pub param_count: usize,
}

impl Selector {
    /// Dense `m × P` selection matrix `∂u(t)/∂θ`.
    pub fn to_matrix(&self) -> Matrix {
        let mut s = Matrix::zeros(self.active.len(), self.param_count);
        for (c, &j) in self.active.iter().enumerate() {
            s[(c, j)] = 1.0;
        }
        s
    }

    pub fn apply(&self, theta: &[f64]) -> Vector {
        Vector::from_iterator(self.active.len(), self.active.iter().map(|&j| theta[j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantInput {
    channels: Vec<InputChannel>,
}

impl PiecewiseConstantInput {
    pub fn new(channels: Vec<InputChannel>) -> Result<Self, InputError> {
        let mut horizon = None;
        for (c, ch) in channels.iter().enumerate() {
            if ch.grid.len() < 2 || ch.grid.windows(2).any(|w| !(w[1] > w[0])) || ch.grid[0] != 0.0 {
                return Err(InputError::BadGrid { channel: c });
            }
            if ch.values.len() + 1 != ch.grid.len() {
                return Err(InputError::SegmentCount {
                    channel: c,
                    values: ch.values.len(),
                    segments: ch.grid.len() - 1,
                });
            }
            if !(ch.bounds.0 <= ch.bounds.1) {
                return Err(InputError::BadBounds { channel: c, lo: ch.bounds.0, hi: ch.bounds.1 });
            }
            let end = *ch.grid.last().unwrap();
            match horizon {
                None => horizon = Some(end),
                Some(h) if h != end => return Err(InputError::HorizonMismatch),
                _ => {}
            }
        }
        Ok(Self { channels })
    }

    /// No input channels; the domain is unbounded.
    pub fn none() -> Self {
        Self { channels: Vec::new() }
    }

    /// Shared grid with a `k × m` value matrix (`theta[i][c]` is segment `i` of channel `c`).
    pub fn from_grid(
        grid: Vec<f64>,
        theta: &[Vec<f64>],
        bounds: &[(f64, f64)],
    ) -> Result<Self, InputError> {
        let m = bounds.len();
        let channels = (0..m)
            .map(|c| InputChannel {
                grid: grid.clone(),
                values: theta.iter().map(|row| row[c]).collect(),
                bounds: bounds[c],
            })
            .collect();
        Self::new(channels)
    }

    pub fn channels(&self) -> &[InputChannel] {
        &self.channels
    }

    pub fn input_dim(&self) -> usize {
        self.channels.len()
    }

    pub fn param_count(&self) -> usize {
        self.channels.iter().map(InputChannel::segments).sum()
    }

    pub fn horizon(&self) -> f64 {
        self.channels.first().map_or(f64::INFINITY, |c| *c.grid.last().unwrap())
    }

    fn check_domain(&self, t: f64) -> Result<(), InputError> {
        let hi = self.horizon();
        if !(0.0..=hi).contains(&t) {
            return Err(InputError::Domain { t, lo: 0.0, hi });
        }
        Ok(())
    }

    /// `u(t)`.
    pub fn eval(&self, t: f64) -> Result<Vector, InputError> {
        self.check_domain(t)?;
        Ok(Vector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|ch| ch.values[ch.segment_at(t)]),
        ))
    }

    /// `∂u(t)/∂θ` as active-parameter indices.
    pub fn selector(&self, t: f64) -> Result<Selector, InputError> {
        self.check_domain(t)?;
        let mut offset = 0;
        let mut active = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            active.push(offset + ch.segment_at(t));
            offset += ch.segments();
        }
        Ok(Selector { active, param_count: offset })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|c| c.values.iter().copied()).collect()
    }

    /// Same grids and bounds with new parameter values.
    pub fn with_params(&self, theta: &[f64]) -> Result<Self, InputError> {
        if theta.len() != self.param_count() {
            return Err(InputError::ParamCount { expected: self.param_count(), found: theta.len() });
        }
        let mut out = self.clone();
        let mut it = theta.iter();
        for ch in &mut out.channels {
            for v in &mut ch.values {
                *v = *it.next().unwrap();
            }
        }
        Ok(out)
    }

    /// Per-parameter bounds in flattened order.
    pub fn param_bounds(&self) -> Vec<(f64, f64)> {
        self.channels.iter().flat_map(|c| std::iter::repeat_n(c.bounds, c.segments())).collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.values.iter().all(|v| (c.bounds.0..=c.bounds.1).contains(v)))
    }

    /// Interior switching times of all channels, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|c| c.grid[1..c.grid.len() - 1].iter().copied())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}
