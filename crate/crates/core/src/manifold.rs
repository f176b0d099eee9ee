//! Riemannian metrics, Christoffel symbols, geospin matrices, and covariant
//! derivatives of vector fields.
//!
//! Index conventions used throughout:
//! - `gamma[k][(i, j)]` stores Γ^k_{ij} (upper index first, symmetric in the
//!   lower pair).
//! - the mixed geospin matrix stores `w_mixed[(k, j)] = W^k_j = Γ^k_{ji} v^i`,
//!   so the geodesic equation reads `dv/dt = -w_mixed * v`.
//! - covariant-derivative matrices put the field component on the row and the
//!   derivative direction on the column, like a Jacobian.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{fd_step, ScalarField, VectorField, DEFAULT_FD_SCALE};

/// Determinants at or below this are treated as singular. Chosen so the
/// sphere poles and the half-plane boundary fail loudly instead of degrading.
pub const DET_FLOOR: f64 = 1e-12;

type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type PartialsFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;
type GuardFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A coordinate-chart Riemannian metric: a field of symmetric
/// positive-definite matrices plus an optional domain guard, optional
/// analytic partials ∂g/∂x_k, and a sampling box for randomized checks.
#[derive(Clone)]
pub struct Metric {
    dim: usize,
    name: String,
    g: Arc<MetricFn>,
    partials: Option<Arc<PartialsFn>>,
    guard: Option<Arc<GuardFn>>,
    sample_region: Vec<(f64, f64)>,
}

impl std::fmt::Debug for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Metric")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

impl Metric {
    /// Wrap a metric-matrix closure. The closure must return an exactly
    /// symmetric matrix (g_ij == g_ji as evaluated); the file loader and all
    /// built-ins guarantee this.
    pub fn new(dim: usize, g: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Metric {
            dim,
            name: "custom".into(),
            g: Arc::new(g),
            partials: None,
            guard: None,
            sample_region: vec![(-1.0, 1.0); dim],
        }
    }

    pub fn with_partials(
        mut self,
        partials: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    pub fn with_guard(mut self, guard: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Arc::new(guard));
        self
    }

    pub fn with_sample_region(mut self, region: Vec<(f64, f64)>) -> Self {
        assert_eq!(region.len(), self.dim);
        self.sample_region = region;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Flat space: g = I_n everywhere.
    pub fn euclidean(dim: usize) -> Self {
        Metric::new(dim, move |_x| DMatrix::identity(dim, dim))
            .with_partials(move |_x| vec![DMatrix::zeros(dim, dim); dim])
            .with_sample_region(vec![(-2.0, 2.0); dim])
            .named("euclidean")
    }

    /// Unit 2-sphere in the (θ, φ) chart with 0 < θ < π; g = diag(1, sin²θ).
    pub fn sphere2() -> Self {
        Metric::new(2, |x| {
            let s = x[0].sin();
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, s * s]))
        })
        .with_partials(|x| {
            let dtheta = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, (2.0 * x[0]).sin()]));
            vec![dtheta, DMatrix::zeros(2, 2)]
        })
        .with_guard(|x| x[0] > 0.0 && x[0] < PI)
        .with_sample_region(vec![(0.3, PI - 0.3), (-PI, PI)])
        .named("sphere2")
    }

    /// Poincaré half-plane, y > 0; g = diag(1/y², 1/y²).
    pub fn half_plane() -> Self {
        Metric::new(2, |x| {
            let w = 1.0 / (x[1] * x[1]);
            DMatrix::from_diagonal(&DVector::from_vec(vec![w, w]))
        })
        .with_partials(|x| {
            let dy = -2.0 / (x[1] * x[1] * x[1]);
            vec![
                DMatrix::zeros(2, 2),
                DMatrix::from_diagonal(&DVector::from_vec(vec![dy, dy])),
            ]
        })
        .with_guard(|x| x[1] > 0.0)
        .with_sample_region(vec![(-2.0, 2.0), (0.3, 3.0)])
        .named("halfplane")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_region(&self) -> &[(f64, f64)] {
        &self.sample_region
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn guard_ok(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.guard.as_ref().is_none_or(|g| g(x))
    }

    /// Metric matrix without guard or singularity checks. Callers must keep
    /// the point inside the chart.
    pub fn matrix_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        (self.g)(x)
    }

    /// Metric matrix at a chart-valid, non-singular point.
    pub fn at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.dim {
            return Err(Error::dim(self.dim, x.len()));
        }
        if !self.guard_ok(x) {
            return Err(Error::OutOfChart);
        }
        let g = (self.g)(x);
        let det = g.determinant();
        if !(det > DET_FLOOR) {
            return Err(Error::SingularMetric {
                det,
                floor: DET_FLOOR,
            });
        }
        Ok(g)
    }

    pub fn inverse_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.at(x)?;
        g.clone().try_inverse().ok_or(Error::SingularMetric {
            det: g.determinant(),
            floor: DET_FLOOR,
        })
    }

    /// ∂g/∂x_k for all k: analytic when supplied, entry-wise central
    /// differences of g otherwise.
    pub fn partials_at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.at(x)?; // validate once
        if let Some(p) = &self.partials {
            return Ok(p(x));
        }
        Ok(self.fd_partials(x))
    }

    /// Finite-difference metric partials, always available (used to
    /// cross-check analytic partials).
    pub fn fd_partials(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.dim);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for k in 0..self.dim {
            let h = fd_step(x[k], DEFAULT_FD_SCALE);
            xp[k] = x[k] + h;
            xm[k] = x[k] - h;
            let span = xp[k] - xm[k];
            let d = ((self.g)(&xp) - (self.g)(&xm)) / span;
            out.push(d);
            xp[k] = x[k];
            xm[k] = x[k];
        }
        out
    }

    /// Lower an index: v_j = g_jl v^l.
    pub fn lower(&self, x: &[f64], v: &[f64]) -> Result<DVector<f64>> {
        let g = self.at(x)?;
        Ok(&g * DVector::from_column_slice(v))
    }

    /// Squared length g_ij v^i v^j.
    pub fn speed2(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let lowered = self.lower(x, v)?;
        Ok(lowered.dot(&DVector::from_column_slice(v)))
    }

    pub fn log_sqrt_det(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.at(x)?.determinant().ln())
    }

    /// The metric-induced structure function s = ln √det g as a scalar field
    /// over the chart coordinates. Differentiated by finite differences, so
    /// it stays independent of the Christoffel route to A_i = Γ^l_{il}.
    pub fn structure_function(&self) -> ScalarField {
        let metric = self.clone();
        ScalarField::new(move |x| 0.5 * metric.matrix_unchecked(x).determinant().ln())
            .named(format!("ln_sqrt_det_g[{}]", self.name))
    }

    /// Draw a well-conditioned chart point: rejection sampling over the
    /// sample region, accepting points that pass the guard with
    /// det g > 1e-6 (so randomized identity checks stay away from
    /// near-singular chart edges). Fails after 500 rejected draws.
    pub fn sample_chart_point<R: rand::Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        for _ in 0..500 {
            let x: Vec<f64> = self
                .sample_region
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect();
            if self.guard_ok(&x) && self.matrix_unchecked(&x).determinant() > 1e-6 {
                return Ok(x);
            }
        }
        Err(Error::OutOfChart)
    }
}

/// Christoffel symbols of the Levi-Civita connection at a point.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    /// `gamma[k][(i, j)] = Γ^k_{ij}`
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][(i, j)]
    }

    /// Contracted symbol A_i = Γ^l_{il}.
    pub fn contracted(&self) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| {
            (0..self.dim).map(|l| self.gamma[l][(i, l)]).sum()
        })
    }
}

/// The two geospin forms at a point-velocity pair.
#[derive(Debug, Clone)]
pub struct GeospinMatrix {
    /// `w_mixed[(k, j)] = W^k_j = Γ^k_{ji} v^i`
    pub w_mixed: DMatrix<f64>,
    /// `w_lower[(i, k)] = W_ik = Γ^j_{ik} v_j` (symmetric)
    pub w_lower: DMatrix<f64>,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl GeospinMatrix {
    pub fn trace(&self) -> f64 {
        self.w_mixed.trace()
    }
}

/// Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}).
pub fn christoffel(metric: &Metric, x: &[f64]) -> Result<Christoffel> {
    let n = metric.dim();
    let ginv = metric.inverse_at(x)?;
    let dg = metric.partials_at(x)?;

    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for l in 0..n {
                    sum += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma[k][(i, j)] = 0.5 * sum;
            }
        }
    }
    Ok(Christoffel { dim: n, gamma })
}

/// Contracted structural derivative A_i = Γ^l_{il} = ∂_i ln √det g.
pub fn structural_gradient(metric: &Metric, x: &[f64]) -> Result<DVector<f64>> {
    Ok(christoffel(metric, x)?.contracted())
}

/// Both geospin matrices at `(x, v)`.
pub fn geospin(metric: &Metric, x: &[f64], v: &[f64]) -> Result<GeospinMatrix> {
    let n = metric.dim();
    if v.len() != n {
        return Err(Error::dim(n, v.len()));
    }
    let gam = christoffel(metric, x)?;
    let v_low = metric.lower(x, v)?;

    let mut w_mixed = DMatrix::zeros(n, n);
    let mut w_lower = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            let mut m = 0.0;
            let mut lo = 0.0;
            for i in 0..n {
                m += gam.gamma[k][(j, i)] * v[i];
                lo += gam.gamma[i][(k, j)] * v_low[i];
            }
            w_mixed[(k, j)] = m;
            w_lower[(k, j)] = lo;
        }
    }
    Ok(GeospinMatrix {
        w_mixed,
        w_lower,
        point: x.to_vec(),
        velocity: v.to_vec(),
    })
}

/// ∇_k v^j = ∂_k v^j + Γ^j_{ki} v^i, returned with rows indexing the
/// component j and columns the direction k. For a constant field this is
/// exactly the mixed geospin matrix of v(x).
pub fn covariant_derivative(
    metric: &Metric,
    vfield: &VectorField,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let v = vfield.value(x);
    let spin = geospin(metric, x, &v)?;
    let jac = vfield.jacobian(x);
    if jac.nrows() != metric.dim() || jac.ncols() != metric.dim() {
        return Err(Error::dim(metric.dim(), jac.nrows()));
    }
    Ok(jac + spin.w_mixed)
}

/// Lowered form exactly as written: ∇_k v_j = ∂_k v_j − W_kj, where v_j is
/// the component field g_jl v^l differentiated as-is. Rows index j, columns
/// k. The identity suite cross-checks this against g_jl ∇_k v^l.
pub fn covariant_derivative_lowered(
    metric: &Metric,
    vfield: &VectorField,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let n = metric.dim();
    let v = vfield.value(x);
    let spin = geospin(metric, x, &v)?;

    let m = metric.clone();
    let vf = vfield.clone();
    let lowered_field = VectorField::new(move |y| {
        let g = m.matrix_unchecked(y);
        let val = DVector::from_vec(vf.value(y));
        (&g * val).iter().copied().collect()
    });
    let dlow = lowered_field.jacobian(x); // [(j, k)] = ∂_k v_j

    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            out[(j, k)] = dlow[(j, k)] - spin.w_lower[(k, j)];
        }
    }
    Ok(out)
}

/// Embed a (θ, φ) chart point of the unit sphere into R³.
pub fn sphere_embed(x: &[f64]) -> [f64; 3] {
    let (theta, phi) = (x[0], x[1]);
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Chart coordinates (θ, φ) of a point on (or near) the unit sphere.
pub fn sphere_chart(p: &[f64; 3]) -> [f64; 2] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [(p[2] / r).acos(), p[1].atan2(p[0])]
}

/// Push a chart velocity (v^θ, v^φ) forward to an embedded tangent vector.
pub fn sphere_chart_velocity(x: &[f64], v: &[f64]) -> [f64; 3] {
    let (theta, phi) = (x[0], x[1]);
    let e_theta = [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        -theta.sin(),
    ];
    let e_phi = [-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0];
    [
        v[0] * e_theta[0] + v[1] * e_phi[0],
        v[0] * e_theta[1] + v[1] * e_phi[1],
        v[0] * e_theta[2] + v[1] * e_phi[2],
    ]
}

/// Pull an embedded tangent vector at the chart point back to (v^θ, v^φ).
/// Uses g_θθ = 1, g_φφ = sin²θ for the frame normalization.
pub fn sphere_embedded_velocity_to_chart(x: &[f64], u: &[f64; 3]) -> [f64; 2] {
    let (theta, phi) = (x[0], x[1]);
    let e_theta = [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        -theta.sin(),
    ];
    let e_phi = [-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0];
    let dot_t = u[0] * e_theta[0] + u[1] * e_theta[1] + u[2] * e_theta[2];
    let dot_p = u[0] * e_phi[0] + u[1] * e_phi[1] + u[2] * e_phi[2];
    [dot_t, dot_p / (theta.sin() * theta.sin())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_mat_eq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert!(
                    (a[(i, j)] - b[(i, j)]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    a[(i, j)],
                    b[(i, j)]
                );
            }
        }
    }

    #[test]
    fn euclidean_christoffel_vanishes() {
        let m = Metric::euclidean(3);
        let gam = christoffel(&m, &[0.4, -1.0, 2.0]).unwrap();
        for k in 0..3 {
            assert_mat_eq(&gam.gamma[k], &DMatrix::zeros(3, 3), 0.0);
        }
        let a = structural_gradient(&m, &[0.4, -1.0, 2.0]).unwrap();
        assert_eq!(a, DVector::zeros(3));
    }

    #[test]
    fn sphere_christoffel_frozen_values() {
        // Hand-evaluated from g = diag(1, sin²θ) at θ = π/4:
        // Γ^θ_{φφ} = -sinθcosθ = -1/2, Γ^φ_{θφ} = Γ^φ_{φθ} = cotθ = 1.
        let m = Metric::sphere2();
        let x = [PI / 4.0, 0.0];
        let gam = christoffel(&m, &x).unwrap();
        assert_relative_eq!(gam.get(0, 1, 1), -0.5, epsilon = 1e-12);
        assert_relative_eq!(gam.get(1, 0, 1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gam.get(1, 1, 0), 1.0, epsilon = 1e-12);
        for (k, i, j) in [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)] {
            assert_relative_eq!(gam.get(k, i, j), 0.0, epsilon = 1e-12);
        }

        // Cross-check against pure finite differences of g (step 1e-5).
        let fd_metric = Metric::new(2, |x| {
            let s = x[0].sin();
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, s * s]))
        })
        .with_guard(|x| x[0] > 0.0 && x[0] < PI);
        let gam_fd = christoffel(&fd_metric, &x).unwrap();
        for k in 0..2 {
            assert_mat_eq(&gam.gamma[k], &gam_fd.gamma[k], 1e-9);
        }
    }

    #[test]
    fn half_plane_christoffel_frozen_values() {
        // Hand-evaluated from g = diag(1/y², 1/y²) at (0, 2):
        // Γ^x_{xy} = -1/y = -1/2, Γ^y_{xx} = 1/y = 1/2, Γ^y_{yy} = -1/y = -1/2.
        let m = Metric::half_plane();
        let gam = christoffel(&m, &[0.0, 2.0]).unwrap();
        assert_relative_eq!(gam.get(0, 0, 1), -0.5, epsilon = 1e-12);
        assert_relative_eq!(gam.get(0, 1, 0), -0.5, epsilon = 1e-12);
        assert_relative_eq!(gam.get(1, 0, 0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(gam.get(1, 1, 1), -0.5, epsilon = 1e-12);
        assert_relative_eq!(gam.get(1, 0, 1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(gam.get(0, 0, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn structural_gradient_frozen_values() {
        let sphere = Metric::sphere2();
        let a = structural_gradient(&sphere, &[PI / 4.0, 0.0]).unwrap();
        assert_relative_eq!(a[0], 1.0, epsilon = 1e-12); // cot(π/4)
        assert_relative_eq!(a[1], 0.0, epsilon = 1e-12);

        let hp = Metric::half_plane();
        let a = structural_gradient(&hp, &[0.0, 2.0]).unwrap();
        assert_relative_eq!(a[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], -1.0, epsilon = 1e-12); // -2/y at y=2
    }

    #[test]
    fn structural_gradient_matches_log_det_route() {
        let m = Metric::sphere2();
        let x = [1.1, 0.4];
        let a = structural_gradient(&m, &x).unwrap();
        let s = m.structure_function();
        let fd = s.gradient(&x);
        assert_relative_eq!(a[0], fd[0], max_relative = 1e-6);
        assert!(fd[1].abs() < 1e-10);
    }

    #[test]
    fn sphere_geospin_frozen_values() {
        let m = Metric::sphere2();
        let spin = geospin(&m, &[PI / 4.0, 0.0], &[1.0, 1.0]).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 1.0, 1.0]);
        assert_mat_eq(&spin.w_mixed, &expect, 1e-12);
        assert_relative_eq!(spin.trace(), 1.0, epsilon = 1e-12);

        // trace(W) = A·v, both sides computed independently
        let a = structural_gradient(&m, &[PI / 4.0, 0.0]).unwrap();
        assert_relative_eq!(spin.trace(), a[0] * 1.0 + a[1] * 1.0, epsilon = 1e-12);

        // lowered form is symmetric
        assert_mat_eq(&spin.w_lower, &spin.w_lower.transpose(), 1e-12);
    }

    #[test]
    fn euclidean_geospin_is_zero() {
        let m = Metric::euclidean(4);
        let spin = geospin(&m, &[0.1, 0.2, 0.3, 0.4], &[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_mat_eq(&spin.w_mixed, &DMatrix::zeros(4, 4), 0.0);
        assert_mat_eq(&spin.w_lower, &DMatrix::zeros(4, 4), 0.0);
    }

    #[test]
    fn covariant_derivative_flat_cases() {
        let m = Metric::euclidean(2);
        // constant field: zero
        let c = VectorField::constant(vec![1.0, 0.0]);
        let d = covariant_derivative(&m, &c, &[0.3, 0.7]).unwrap();
        assert_mat_eq(&d, &DMatrix::zeros(2, 2), 1e-12);

        // v(x) = (x1, 0): reduces to the Jacobian, a single 1 at (0, 0)
        let v = VectorField::new(|x| vec![x[0], 0.0]);
        let d = covariant_derivative(&m, &v, &[0.3, 0.7]).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_mat_eq(&d, &expect, 1e-10);
    }

    #[test]
    fn covariant_derivative_constant_field_reduces_to_geospin() {
        let m = Metric::sphere2();
        let x = [PI / 4.0, 0.0];
        let c = VectorField::constant(vec![1.0, 1.0]);
        let d = covariant_derivative(&m, &c, &x).unwrap();
        let spin = geospin(&m, &x, &[1.0, 1.0]).unwrap();
        assert_mat_eq(&d, &spin.w_mixed, 1e-12);
    }

    #[test]
    fn lowered_covariant_derivative_matches_metric_lowered_mixed_form() {
        let m = Metric::sphere2();
        let x = [0.9, 0.5];
        let v = VectorField::new(|x| vec![x[1].cos(), x[0] * 0.5]);
        let low = covariant_derivative_lowered(&m, &v, &x).unwrap();
        let mixed = covariant_derivative(&m, &v, &x).unwrap();
        let g = m.at(&x).unwrap();
        let lowered_mixed = &g * &mixed;
        assert_mat_eq(&low, &lowered_mixed, 1e-6);
    }

    #[test]
    fn guards_and_floors_reject_bad_points() {
        let sphere = Metric::sphere2();
        assert!(matches!(sphere.at(&[-0.1, 0.0]), Err(Error::OutOfChart)));
        assert!(matches!(
            sphere.at(&[PI / 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));

        // θ → 0 inside the guard but with det below the floor
        let no_guard = Metric::new(2, |x| {
            let s = x[0].sin();
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, s * s]))
        });
        assert!(matches!(
            no_guard.at(&[1e-9, 0.0]),
            Err(Error::SingularMetric { .. })
        ));

        let hp = Metric::half_plane();
        assert!(matches!(hp.at(&[0.0, -1.0]), Err(Error::OutOfChart)));
        assert!(christoffel(&hp, &[0.0, -1.0]).is_err());
    }

    #[test]
    fn sphere_embedding_round_trips() {
        let x = [0.8, 2.1];
        let p = sphere_embed(&x);
        let back = sphere_chart(&p);
        assert_relative_eq!(back[0], x[0], epsilon = 1e-12);
        assert_relative_eq!(back[1], x[1], epsilon = 1e-12);

        let v = [0.4, -0.9];
        let u = sphere_chart_velocity(&x, &v);
        let vc = sphere_embedded_velocity_to_chart(&x, &u);
        assert_relative_eq!(vc[0], v[0], epsilon = 1e-12);
        assert_relative_eq!(vc[1], v[1], epsilon = 1e-12);

        // embedded speed equals metric speed
        let m = Metric::sphere2();
        let emb2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        assert_relative_eq!(emb2, m.speed2(&x, &v).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn analytic_and_fd_partials_agree() {
        for (m, x) in [
            (Metric::sphere2(), vec![1.2, 0.3]),
            (Metric::half_plane(), vec![0.5, 1.7]),
        ] {
            let analytic = m.partials_at(&x).unwrap();
            let fd = m.fd_partials(&x);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let a = analytic[k][(i, j)];
                        let b = fd[k][(i, j)];
                        let denom = a.abs().max(1.0);
                        assert!(
                            ((a - b) / denom).abs() < 1e-4,
                            "partial {k} entry ({i},{j}): {a} vs {b}"
                        );
                    }
                }
            }
        }
    }
}
