//! Scalar and vector fields with a uniform differentiation contract.
//!
//! A field is a callable over a flat coordinate slice, optionally paired with
//! an analytic gradient/Jacobian. Where no analytic derivative is supplied,
//! central finite differences with step `h_k = scale * max(1, |x_k|)` are used
//! throughout the crate, so every operation differentiates the same way.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

/// Default relative step for first-order central differences.
pub const DEFAULT_FD_SCALE: f64 = 1e-5;
/// Coarser step used for direct second differences (Hessians of plain
/// callables); the wider spacing keeps roundoff of the double difference
/// below its truncation error.
pub const SECOND_FD_SCALE: f64 = 1e-3;

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

pub(crate) fn fd_step(xk: f64, scale: f64) -> f64 {
    scale * xk.abs().max(1.0)
}

/// Central difference of `f` along axis `k`, dividing by the realized
/// spacing `(x_k + h) - (x_k - h)` rather than `2h`. The realized spacing is
/// exact (Sterbenz), which makes derivatives of linear fields exact as well.
pub fn central_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, scale: f64) -> f64 {
    let h = fd_step(x[k], scale);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    let span = xp[k] - xm[k];
    (f(&xp) - f(&xm)) / span
}

/// Full central-difference gradient of `f`.
pub fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], scale: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| central_partial(f, x, k, scale))
        .collect()
}

/// A scalar field over `m` coordinates.
///
/// The optional analytic gradient takes precedence over finite differences;
/// `fd_scale` overrides the default differencing step when set.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    f: Arc<ScalarFn>,
    grad: Option<Arc<GradFn>>,
    fd_scale: Option<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            name: "f".to_string(),
            f: Arc::new(f),
            grad: None,
            fd_scale: None,
        }
    }

    /// Constant field with an exactly-zero analytic gradient.
    pub fn constant(c: f64) -> Self {
        ScalarField::new(move |_x| c)
            .with_gradient(|x| vec![0.0; x.len()])
            .named(format!("{c}"))
    }

    /// The coordinate projection `x -> x[k]`. Deliberately carries no
    /// analytic gradient: the crate's bracket machinery differentiates it by
    /// finite differences like any other field (the realized-spacing rule
    /// makes the result exact anyway).
    pub fn coordinate(k: usize) -> Self {
        ScalarField::new(move |x| x[k]).named(format!("x{}", k + 1))
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = Some(scale);
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn fd_scale(&self) -> f64 {
        self.fd_scale.unwrap_or(DEFAULT_FD_SCALE)
    }

    /// Analytic gradient when present, central differences otherwise.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => central_gradient(&*self.f, x, self.fd_scale()),
        }
    }

    pub fn partial(&self, x: &[f64], k: usize) -> f64 {
        match &self.grad {
            Some(g) => g(x)[k],
            None => central_partial(&*self.f, x, k, self.fd_scale()),
        }
    }

    /// Second partials ∂_j ∂_k f. With an analytic gradient the Hessian is a
    /// first difference of that gradient; otherwise direct second differences
    /// with the coarser `SECOND_FD_SCALE` step.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let m = x.len();
        if let Some(g) = &self.grad {
            let mut hess = DMatrix::zeros(m, m);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            for j in 0..m {
                let h = fd_step(x[j], self.fd_scale());
                xp[j] = x[j] + h;
                xm[j] = x[j] - h;
                let span = xp[j] - xm[j];
                let gp = g(&xp);
                let gm = g(&xm);
                for k in 0..m {
                    hess[(j, k)] = (gp[k] - gm[k]) / span;
                }
                xp[j] = x[j];
                xm[j] = x[j];
            }
            // Symmetrize: mixed partials commute for the smooth fields we
            // work with, and the differencing above is one-sided in j.
            for j in 0..m {
                for k in (j + 1)..m {
                    let avg = 0.5 * (hess[(j, k)] + hess[(k, j)]);
                    hess[(j, k)] = avg;
                    hess[(k, j)] = avg;
                }
            }
            return hess;
        }

        let f = &*self.f;
        let scale = SECOND_FD_SCALE;
        let mut hess = DMatrix::zeros(m, m);
        let f0 = f(x);
        for j in 0..m {
            let hj = fd_step(x[j], scale);
            // diagonal: (f(x+h) - 2 f(x) + f(x-h)) / h^2
            let mut xj = x.to_vec();
            xj[j] = x[j] + hj;
            let fp = f(&xj);
            xj[j] = x[j] - hj;
            let fm = f(&xj);
            let span = 0.5 * ((x[j] + hj) - (x[j] - hj));
            hess[(j, j)] = (fp - 2.0 * f0 + fm) / (span * span);
            for k in (j + 1)..m {
                let hk = fd_step(x[k], scale);
                let mut y = x.to_vec();
                y[j] = x[j] + hj;
                y[k] = x[k] + hk;
                let fpp = f(&y);
                y[k] = x[k] - hk;
                let fpm = f(&y);
                y[j] = x[j] - hj;
                let fmm = f(&y);
                y[k] = x[k] + hk;
                let fmp = f(&y);
                let span_j = (x[j] + hj) - (x[j] - hj);
                let span_k = (x[k] + hk) - (x[k] - hk);
                let mixed = (fpp - fpm - fmp + fmm) / (span_j * span_k);
                hess[(j, k)] = mixed;
                hess[(k, j)] = mixed;
            }
        }
        hess
    }
}

/// A vector field over coordinates, with optional analytic Jacobian.
#[derive(Clone)]
pub struct VectorField {
    f: Arc<VectorFn>,
    jac: Option<Arc<JacobianFn>>,
    fd_scale: Option<f64>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VectorField {
            f: Arc::new(f),
            jac: None,
            fd_scale: None,
        }
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let n = v.len();
        VectorField::new(move |_x| v.clone()).with_jacobian(move |_x| DMatrix::zeros(n, n))
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(j));
        self
    }

    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = Some(scale);
        self
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    /// Jacobian with rows indexing the component and columns the derivative
    /// direction: `jac[(p, k)] = ∂_k v^p`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(j) = &self.jac {
            return j(x);
        }
        let scale = self.fd_scale.unwrap_or(DEFAULT_FD_SCALE);
        let n = self.value(x).len();
        let m = x.len();
        let mut jac = DMatrix::zeros(n, m);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for k in 0..m {
            let h = fd_step(x[k], scale);
            xp[k] = x[k] + h;
            xm[k] = x[k] - h;
            let span = xp[k] - xm[k];
            let vp = (self.f)(&xp);
            let vm = (self.f)(&xm);
            for p in 0..n {
                jac[(p, k)] = (vp[p] - vm[p]) / span;
            }
            xp[k] = x[k];
            xm[k] = x[k];
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_fields_differentiate_exactly() {
        let f = ScalarField::coordinate(1);
        let g = f.gradient(&[0.37, -2.25, 4.0]);
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let c = ScalarField::constant(7.0);
        assert_eq!(c.gradient(&[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(c.eval(&[5.0, 5.0]), 7.0);
    }

    #[test]
    fn fd_gradient_matches_analytic_on_smooth_field() {
        let f = ScalarField::new(|x| x[0].sin() * x[1] + x[1].powi(3));
        let x = [0.7, -1.3];
        let fd = f.gradient(&x);
        assert_relative_eq!(fd[0], x[0].cos() * x[1], max_relative = 1e-9);
        assert_relative_eq!(fd[1], x[0].sin() + 3.0 * x[1] * x[1], max_relative = 1e-9);
    }

    #[test]
    fn hessian_direct_and_via_gradient_agree() {
        let plain = ScalarField::new(|x| x[0].powi(2) * x[1] + x[1].sin());
        let with_grad = ScalarField::new(|x| x[0].powi(2) * x[1] + x[1].sin())
            .with_gradient(|x| vec![2.0 * x[0] * x[1], x[0] * x[0] + x[1].cos()]);
        let x = [0.8, 0.4];
        let ha = plain.hessian(&x);
        let hb = with_grad.hessian(&x);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(ha[(i, j)], hb[(i, j)], epsilon = 1e-6);
            }
        }
        assert_relative_eq!(ha[(0, 0)], 2.0 * x[1], epsilon = 1e-6);
        assert_relative_eq!(ha[(0, 1)], 2.0 * x[0], epsilon = 1e-6);
    }

    #[test]
    fn vector_field_jacobian_rows_are_components() {
        let v = VectorField::new(|x| vec![x[0] * x[1], x[1]]);
        let j = v.jacobian(&[2.0, 3.0]);
        assert_relative_eq!(j[(0, 0)], 3.0, epsilon = 1e-9);
        assert_relative_eq!(j[(0, 1)], 2.0, epsilon = 1e-9);
        assert_relative_eq!(j[(1, 0)], 0.0, epsilon = 1e-9);
        assert_relative_eq!(j[(1, 1)], 1.0, epsilon = 1e-9);
    }
}
