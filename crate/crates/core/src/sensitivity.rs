//! Forward trajectory sensitivities with jumps at transitions.

use crate::automaton::{HybridAutomaton, VectorField};
use crate::input::{PiecewiseConstantInput, Selector};
use crate::simulate::{simulate_augmented, HybridTrajectory, SimError, SimOptions, TransitionRecord};
use crate::{Matrix, Vector};

/// `p_x0 = ∂x/∂x0` (n×n) and `p_θ = ∂x/∂θ` (n×P).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityState {
    pub p_x0: Matrix,
    pub p_theta: Matrix,
}

impl SensitivityState {
    pub fn initial(n: usize, params: usize) -> Self {
        Self { p_x0: Matrix::identity(n, n), p_theta: Matrix::zeros(n, params) }
    }
}

/// A trajectory together with its sensitivities on the same sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrajectory {
    pub base: HybridTrajectory,
    pub sens: Vec<SensitivityState>,
}

impl AugmentedTrajectory {
    pub fn at(&self, sample: usize) -> &SensitivityState {
        &self.sens[sample]
    }
}

/// Time derivative of the sensitivities: `ṗ_x0 = A p_x0`, `ṗ_θ = A p_θ + B S(t)`.
pub fn sensitivity_rhs(
    field: &VectorField,
    x: &Vector,
    u: &Vector,
    t: f64,
    sens: &SensitivityState,
    selector: &Selector,
) -> SensitivityState {
    let n = x.len();
    let np = sens.p_theta.ncols();
    let mut packed = Vec::with_capacity(n * n + n * np);
    packed.extend_from_slice(sens.p_x0.as_slice());
    packed.extend_from_slice(sens.p_theta.as_slice());
    let mut out = vec![0.0; packed.len()];
    rhs_into(field, x, u, t, n, np, selector, &packed, &mut out);
    SensitivityState {
        p_x0: Matrix::from_column_slice(n, n, &out[..n * n]),
        p_theta: Matrix::from_column_slice(n, np, &out[n * n..]),
    }
}

/// Packed form used by the integrator: `p` holds `p_x0` then `p_θ`, column-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rhs_into(
    field: &VectorField,
    x: &Vector,
    u: &Vector,
    t: f64,
    n: usize,
    np: usize,
    selector: &Selector,
    p: &[f64],
    out: &mut [f64],
) {
    let a = field.state_jacobian(x, u, t);
    let px = nalgebra::DMatrixView::from_slice(&p[..n * n], n, n);
    let dpx = &a * px;
    out[..n * n].copy_from_slice(dpx.as_slice());
    if np == 0 {
        return;
    }
    let pt = nalgebra::DMatrixView::from_slice(&p[n * n..n * n + n * np], n, np);
    let mut dpt = &a * pt;
    if !selector.active.is_empty() {
        let b = field.input_jacobian(x, u, t);
        for (c, &col) in selector.active.iter().enumerate() {
            for r in 0..n {
                dpt[(r, col)] += b[(r, c)];
            }
        }
    }
    out[n * n..n * n + n * np].copy_from_slice(dpt.as_slice());
}

/// Relative tangency threshold used by [`transition_time_gradients`].
pub const DEFAULT_GRAZE_REL: f64 = 1e-8;

/// `(∂τ/∂x0, ∂τ/∂θ)` as row vectors.
pub fn transition_time_gradients(
    rec: &TransitionRecord,
    sens_minus: &SensitivityState,
) -> Result<(Matrix, Matrix), SimError> {
    transition_time_gradients_with(rec, sens_minus, DEFAULT_GRAZE_REL)
}

pub fn transition_time_gradients_with(
    rec: &TransitionRecord,
    sens_minus: &SensitivityState,
    graze_rel: f64,
) -> Result<(Matrix, Matrix), SimError> {
    let (d1g, d2g) = &rec.guard_grad;
    let den = d1g.dot(&rec.f_minus) + d2g;
    let n = d1g.len();
    if rec.is_timed() {
        // a crossing time that does not depend on the state
        return Ok((Matrix::zeros(1, n), Matrix::zeros(1, sens_minus.p_theta.ncols())));
    }
    if den.abs() <= graze_rel * (1.0 + rec.f_minus.norm()) {
        return Err(SimError::TangentialCrossing { transition: rec.transition, time: rec.tau, denominator: den });
    }
    let row = Matrix::from_row_slice(1, n, d1g.as_slice());
    let d1 = -(&row * &sens_minus.p_x0) / den;
    let d2 = -(&row * &sens_minus.p_theta) / den;
    Ok((d1, d2))
}

/// Post-transition sensitivities `(∂h/∂x) p⁻ + ((∂h/∂x) f⁻ − f⁺) Dτ`.
pub fn jump_sensitivities(
    rec: &TransitionRecord,
    sens_minus: &SensitivityState,
    d1tau: &Matrix,
    d2tau: &Matrix,
) -> SensitivityState {
    let hx = &rec.reset_jac;
    let kick = hx * &rec.f_minus - &rec.f_plus;
    SensitivityState {
        p_x0: hx * &sens_minus.p_x0 + &kick * d1tau,
        p_theta: hx * &sens_minus.p_theta + &kick * d2tau,
    }
}

/// Simulate with sensitivities integrated in lockstep with the state.
pub fn simulate_with_sensitivity(
    ha: &HybridAutomaton,
    x0: &Vector,
    input: &PiecewiseConstantInput,
    horizon: f64,
    opts: &SimOptions,
) -> Result<AugmentedTrajectory, SimError> {
    let (base, sens) = simulate_augmented(ha, x0, input, horizon, opts)?;
    Ok(AugmentedTrajectory { base, sens })
}
