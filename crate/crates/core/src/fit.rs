//! Nonlinear least squares for point-to-manifold refinement.
//!
//! Thin wrapper over the `levenberg-marquardt` crate with a central
//! difference Jacobian, so callers only provide a residual closure.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};

use crate::linalg;

/// Step of the central-difference Jacobian.
pub const FD_STEP: f64 = 1e-6;
/// Newton refinements after the damped iteration.
const POLISH_STEPS: usize = 3;
/// Residual norm below which the minimizer needs no refinement.
const POLISH_FLOOR: f64 = 1e-8;
/// Step of the finite-difference Hessian of the gradient.
const HESSIAN_STEP: f64 = 1e-5;

struct Problem<F> {
    f: F,
    x: DVector<f64>,
    m: usize,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<F> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = (self.f)(&self.x);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let j = jacobian(&self.f, &self.x);
        debug_assert_eq!(j.nrows(), self.m);
        Some(j)
    }
}

/// Minimize `|f(x)|` starting from `x0`; returns the minimizer and the final
/// residual norm.
pub fn least_squares<F>(f: F, x0: DVector<f64>) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let r0 = f(&x0);
    if x0.is_empty() {
        return (x0, r0.norm());
    }
    let m = r0.len();
    let problem = Problem { f, x: x0, m };
    let (solved, _) = LevenbergMarquardt::new().with_patience(200).minimize(problem);
    polish(solved)
}

/// Newton steps on the gradient `J^T r`, for a nonzero minimum only. There
/// the objective stops changing in floating point once `x` is within about
/// `sqrt(eps)` of the minimizer, while the gradient still resolves it.
fn polish<F: Fn(&DVector<f64>) -> DVector<f64>>(p: Problem<F>) -> (DVector<f64>, f64) {
    let Problem { f, mut x, .. } = p;
    let mut r = f(&x).norm();
    if !(r > POLISH_FLOOR) {
        return (x, r);
    }
    let grad = |x: &DVector<f64>| -> DVector<f64> { jacobian(&f, x).transpose() * f(x) };
    for _ in 0..POLISH_STEPS {
        let g = grad(&x);
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += HESSIAN_STEP;
            xm[i] -= HESSIAN_STEP;
            h.set_column(i, &((grad(&xp) - grad(&xm)) / (2.0 * HESSIAN_STEP)));
        }
        let h = (&h + h.transpose()) * 0.5;
        let trial = &x - linalg::lstsq(&h, &g);
        let r_trial = f(&trial).norm();
        if !(r_trial <= r * (1.0 + 1e-12)) || grad(&trial).norm() >= g.norm() {
            break;
        }
        x = trial;
        r = r_trial;
    }
    (x, r)
}

fn jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(f: &F, x: &DVector<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..x.len())
        .map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            (f(&xp) - f(&xm)) / (2.0 * FD_STEP)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_to_circle() {
        // Closest point on the unit circle to (2, 0.1).
        let p = DVector::from_vec(vec![2.0, 0.1]);
        let (x, r) = least_squares(
            |t: &DVector<f64>| DVector::from_vec(vec![t[0].cos() - p[0], t[0].sin() - p[1]]),
            DVector::from_vec(vec![0.3]),
        );
        assert!((x[0] - 0.1f64.atan2(2.0)).abs() < 1e-9);
        assert!((r - (p.norm() - 1.0)).abs() < 1e-12);
    }
}
