//! Central finite differences used when a model omits an analytic Jacobian.

use crate::{Matrix, Vector};

/// Step used for the central difference around `value`.
#[inline]
pub fn step_for(value: f64) -> f64 {
    1e-6 * (1.0 + value.abs())
}

/// Jacobian of `f` at `x`, one column per component of `x`.
pub fn jacobian<F>(f: F, x: &Vector, rows: usize) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let mut jac = Matrix::zeros(rows, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let h = step_for(x[j]);
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        let col = (fp - fm) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Gradient of a scalar function.
pub fn gradient<F>(f: F, x: &Vector) -> Vector
where
    F: Fn(&Vector) -> f64,
{
    let mut grad = Vector::zeros(x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let h = step_for(x[j]);
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        grad[j] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Derivative of a scalar function of one variable.
pub fn derivative<F>(f: F, t: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let h = step_for(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_linear_map_is_exact_enough() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 4.0]);
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let jac = jacobian(|v| &a * v, &x, 2);
        assert!((jac - a).abs().max() < 1e-8);
    }

    #[test]
    fn gradient_of_quadratic() {
        let x = Vector::from_vec(vec![1.0, 2.0]);
        let g = gradient(|v| v[0] * v[0] + 3.0 * v[1], &x);
        assert!((g[0] - 2.0).abs() < 1e-7);
        assert!((g[1] - 3.0).abs() < 1e-7);
    }
}
