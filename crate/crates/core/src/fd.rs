//! Central-difference machinery shared by coefficient fields, scalar fields
//! and the Itô–Wentzell stencil.
//!
//! Two flavours are used throughout the crate:
//!
//! * plain two-point central differences with a per-axis step
//!   `DELTA_COEFF * max(1, |x_j|)` for coefficient Jacobians, and
//! * five-point-per-axis stencils with spacing `STENCIL_COEFF * max(1, |x|_inf)`
//!   for gradients and Hessians of scalar fields.  The same combination
//!   formulas are applied both to closed-form fields and to values of the
//!   evolving random field, so identities that hold field-value by
//!   field-value carry over to the derivatives bit for bit.

use nalgebra::{DMatrix, DVector};

/// Relative step for two-point coefficient-derivative fallbacks.
pub const DELTA_COEFF: f64 = 1e-5;

/// Relative spacing of the five-point scalar-field stencil.
pub const STENCIL_COEFF: f64 = 1e-3;

/// Two-point central difference of a scalar function of one variable.
pub fn central<F: Fn(f64) -> f64>(f: F, x: f64, delta: f64) -> f64 {
    (f(x + delta) - f(x - delta)) / (2.0 * delta)
}

/// Per-axis step used by coefficient-derivative fallbacks.
pub fn coeff_step(xj: f64) -> f64 {
    DELTA_COEFF * xj.abs().max(1.0)
}

/// Stencil spacing for a scalar field around `x`.
pub fn stencil_spacing(x: &DVector<f64>) -> f64 {
    STENCIL_COEFF * x.amax().max(1.0)
}

/// Offsets (per axis, then diagonal pairs) of the five-point stencil around
/// `x`; `eval` is called once per stencil point.
///
/// Returns the gradient and Hessian from the standard fourth-order
/// five-point first/second differences and the four-corner mixed formula.
pub fn gradient_hessian_5pt<F: FnMut(&DVector<f64>) -> f64>(
    mut eval: F,
    x: &DVector<f64>,
    spacing: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let d = spacing;
    let center = eval(x);
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut shifted = |i: usize, s: f64| {
        let mut p = x.clone();
        p[i] += s;
        eval(&p)
    };
    let mut axis = vec![[0.0f64; 4]; n]; // values at -2d, -d, +d, +2d
    for i in 0..n {
        axis[i] = [
            shifted(i, -2.0 * d),
            shifted(i, -d),
            shifted(i, d),
            shifted(i, 2.0 * d),
        ];
        let [m2, m1, p1, p2] = axis[i];
        grad[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * d);
        hess[(i, i)] = (-m2 + 16.0 * m1 - 30.0 * center + 16.0 * p1 - p2) / (12.0 * d * d);
    }
    let mut corner = |i: usize, si: f64, j: usize, sj: f64| {
        let mut p = x.clone();
        p[i] += si;
        p[j] += sj;
        eval(&p)
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let pp = corner(i, d, j, d);
            let pm = corner(i, d, j, -d);
            let mp = corner(i, -d, j, d);
            let mm = corner(i, -d, j, -d);
            let v = (pp - pm - mp + mm) / (4.0 * d * d);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (grad, hess)
}

/// Points probed by [`gradient_hessian_5pt`], used for domain checks.
pub fn stencil_points(x: &DVector<f64>, spacing: f64) -> Vec<DVector<f64>> {
    let n = x.len();
    let d = spacing;
    let mut pts = Vec::with_capacity(1 + 4 * n + 2 * n * n);
    pts.push(x.clone());
    for i in 0..n {
        for s in [-2.0 * d, -d, d, 2.0 * d] {
            let mut p = x.clone();
            p[i] += s;
            pts.push(p);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(d, d), (d, -d), (-d, d), (-d, -d)] {
                let mut p = x.clone();
                p[i] += si;
                p[j] += sj;
                pts.push(p);
            }
        }
    }
    pts
}

/// Central-difference Jacobian of a vector field `f : R^n -> R^n`,
/// entry `(i, j) = d f_i / d x_j`, step `coeff_step` per axis.
pub fn jacobian_central<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: F,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let fx = f(x);
    let rows = fx.len();
    let mut jac = DMatrix::zeros(rows, n);
    for j in 0..n {
        let dj = coeff_step(x[j]);
        let mut xp = x.clone();
        xp[j] += dj;
        let mut xm = x.clone();
        xm[j] -= dj;
        let col = (f(&xp) - f(&xm)) / (2.0 * dj);
        jac.set_column(j, &col);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn five_point_gradient_and_hessian_on_quadratic() {
        // f(x) = x1^2 + 3 x1 x2 + 2 x2^2
        let f = |p: &DVector<f64>| p[0] * p[0] + 3.0 * p[0] * p[1] + 2.0 * p[1] * p[1];
        let x = DVector::from_vec(vec![0.7, -0.3]);
        let (g, h) = gradient_hessian_5pt(f, &x, stencil_spacing(&x));
        assert_relative_eq!(g[0], 2.0 * 0.7 + 3.0 * (-0.3), epsilon = 1e-10);
        assert_relative_eq!(g[1], 3.0 * 0.7 + 4.0 * (-0.3), epsilon = 1e-10);
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-7);
        assert_relative_eq!(h[(0, 1)], 3.0, epsilon = 1e-7);
        assert_relative_eq!(h[(1, 1)], 4.0, epsilon = 1e-7);
    }

    #[test]
    fn jacobian_central_linear_is_exact() {
        let f = |p: &DVector<f64>| {
            DVector::from_vec(vec![2.0 * p[0] - p[1], 0.5 * p[0] + 3.0 * p[1]])
        };
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let j = jacobian_central(f, &x);
        assert_relative_eq!(j[(0, 0)], 2.0, epsilon = 1e-9);
        assert_relative_eq!(j[(0, 1)], -1.0, epsilon = 1e-9);
        assert_relative_eq!(j[(1, 0)], 0.5, epsilon = 1e-9);
        assert_relative_eq!(j[(1, 1)], 3.0, epsilon = 1e-9);
    }
}
