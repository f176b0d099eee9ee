//! Generalized Poisson bracket (GPB), geometric bracket, generalized
//! structural Poisson bracket (GSPB), the structural operator Ŝ, the
//! geometrio triple, and the geometric canonical commutation relation.
//!
//! All brackets live on an m-dimensional coordinate space equipped with an
//! antisymmetric structural matrix J (constant or coordinate-dependent), a
//! structure function s, and a Hamiltonian H:
//!
//! ```text
//! {f, g}_GPB  = J_ij ∂_i f ∂_j g
//! G(s; f, g)  = f {s, g}_GPB − g {s, f}_GPB
//! {f, g}      = {f, g}_GPB + G(s; f, g)          (GSPB)
//! Ŝ f         = J_ij A_i ∂_j f,   A_i = ∂_i s
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::ScalarField;

type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// The structural matrix field J_ij(x). Antisymmetry is a contract on the
/// values, checked by the identity suite rather than enforced on
/// construction (fault injection relies on being able to build a broken one).
#[derive(Clone)]
pub struct StructuralMatrix {
    dim: usize,
    j: Arc<MatrixFn>,
    constant: bool,
}

impl std::fmt::Debug for StructuralMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StructuralMatrix")
            .field("dim", &self.dim)
            .field("constant", &self.constant)
            .finish()
    }
}

impl StructuralMatrix {
    pub fn constant(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "structural matrix must be square");
        let dim = m.nrows();
        StructuralMatrix {
            dim,
            j: Arc::new(move |_x| m.clone()),
            constant: true,
        }
    }

    /// Canonical block matrix [[0, I], [-I, 0]] on m = 2n coordinates
    /// ordered (q_1..q_n, p_1..p_n).
    pub fn canonical(n: usize) -> Self {
        let m = 2 * n;
        let mut j = DMatrix::zeros(m, m);
        for k in 0..n {
            j[(k, n + k)] = 1.0;
            j[(n + k, k)] = -1.0;
        }
        StructuralMatrix::constant(j)
    }

    pub fn from_fn(dim: usize, f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        StructuralMatrix {
            dim,
            j: Arc::new(f),
            constant: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        (self.j)(x)
    }
}

/// The triple (J, s, H) defining GSPB/GCHS dynamics on m coordinates, plus
/// an optional declaration that the coordinates split as (q_1..q_n, p_1..p_n)
/// with the canonical constant J. The momentum row of the geometrio and the
/// commutation relation are only defined under that declaration.
#[derive(Debug, Clone)]
pub struct StructuralSystem {
    j: StructuralMatrix,
    s: ScalarField,
    h: ScalarField,
    canonical_pairs: Option<usize>,
}

impl StructuralSystem {
    pub fn new(j: StructuralMatrix, s: ScalarField, h: ScalarField) -> Self {
        StructuralSystem {
            j,
            s,
            h,
            canonical_pairs: None,
        }
    }

    /// Canonical phase space: m = 2n coordinates (q, p) with the block
    /// structural matrix `[[0, I], [-I, 0]]`.
    pub fn canonical(n: usize, s: ScalarField, h: ScalarField) -> Self {
        StructuralSystem::new(StructuralMatrix::canonical(n), s, h)
            .with_canonical_split()
            .expect("canonical J has even dimension")
    }

    /// Declare the (q, p) split. The system dimension must be even; the math
    /// behind the momentum row additionally presumes the canonical constant J.
    pub fn with_canonical_split(mut self) -> Result<Self> {
        if !self.j.dim().is_multiple_of(2) {
            return Err(Error::NoCanonicalSplit);
        }
        self.canonical_pairs = Some(self.j.dim() / 2);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    pub fn structural_matrix(&self) -> &StructuralMatrix {
        &self.j
    }

    pub fn structure_function(&self) -> &ScalarField {
        &self.s
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.h
    }

    /// Number n of (q, p) pairs when a split is declared.
    pub fn canonical_pairs(&self) -> Option<usize> {
        self.canonical_pairs
    }

    /// Structure gradient A_i = ∂_i s at x.
    pub fn structure_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.s.gradient(x)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim(self.dim(), x.len()));
        }
        Ok(())
    }
}

/// The geometrio triple Ŝ(x_k, p_i, H) = (b_k, A_i, w) at a point.
#[derive(Debug, Clone)]
pub struct Geometrio {
    /// b_k = Ŝ x_k = J_ik A_i (m components)
    pub b: DVector<f64>,
    /// A_i = ∂_i s (m components)
    pub a: DVector<f64>,
    /// w = Ŝ H = b_j ∂_j H
    pub w: f64,
    pub point: Vec<f64>,
}

/// {f, g}_GPB = J_ij ∂_i f ∂_j g.
pub fn gpb(sys: &StructuralSystem, f: &ScalarField, g: &ScalarField, x: &[f64]) -> Result<f64> {
    sys.check_dim(x)?;
    let df = f.gradient(x);
    let dg = g.gradient(x);
    if df.len() != sys.dim() || dg.len() != sys.dim() {
        return Err(Error::dim(sys.dim(), df.len().max(dg.len())));
    }
    Ok(contract(&sys.j.at(x), &df, &dg))
}

fn contract(j: &DMatrix<f64>, df: &[f64], dg: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..df.len() {
        if df[i] == 0.0 {
            continue;
        }
        for k in 0..dg.len() {
            acc += j[(i, k)] * df[i] * dg[k];
        }
    }
    acc
}

/// Geometric bracket G(s; f, g) = f {s, g}_GPB − g {s, f}_GPB.
pub fn geobracket(
    sys: &StructuralSystem,
    f: &ScalarField,
    g: &ScalarField,
    x: &[f64],
) -> Result<f64> {
    let sf = gpb(sys, &sys.s, f, x)?;
    let sg = gpb(sys, &sys.s, g, x)?;
    Ok(f.eval(x) * sg - g.eval(x) * sf)
}

/// GSPB {f, g} = {f, g}_GPB + G(s; f, g). Reduces to the GPB exactly when
/// s is constant.
pub fn gspb(sys: &StructuralSystem, f: &ScalarField, g: &ScalarField, x: &[f64]) -> Result<f64> {
    Ok(gpb(sys, f, g, x)? + geobracket(sys, f, g, x)?)
}

/// Structural operator Ŝ f = J_ij A_i ∂_j f. Annihilates s itself and
/// constants.
pub fn structural_operator(sys: &StructuralSystem, f: &ScalarField, x: &[f64]) -> Result<f64> {
    sys.check_dim(x)?;
    let a = sys.structure_gradient(x);
    let df = f.gradient(x);
    if df.len() != sys.dim() {
        return Err(Error::dim(sys.dim(), df.len()));
    }
    Ok(contract(&sys.j.at(x), &a, &df))
}

/// Evaluate the geometrio triple. The b row is produced by applying Ŝ to
/// each coordinate projection (brute force, finite-difference gradients),
/// the A row is the structure gradient, and w = Ŝ H.
pub fn geometrio(sys: &StructuralSystem, x: &[f64]) -> Result<Geometrio> {
    sys.check_dim(x)?;
    let m = sys.dim();
    let mut b = DVector::zeros(m);
    for k in 0..m {
        b[k] = structural_operator(sys, &ScalarField::coordinate(k), x)?;
    }
    let a = DVector::from_vec(sys.structure_gradient(x));
    let w = structural_operator(sys, &sys.h, x)?;
    Ok(Geometrio {
        b,
        a,
        w,
        point: x.to_vec(),
    })
}

/// The momentum row of the geometrio: Ŝ p_k for k = 1..n, which equals the
/// configuration part of the structure gradient under the canonical split.
pub fn momentum_row(sys: &StructuralSystem, x: &[f64]) -> Result<DVector<f64>> {
    let n = sys.canonical_pairs().ok_or(Error::NoCanonicalSplit)?;
    sys.check_dim(x)?;
    let mut row = DVector::zeros(n);
    for k in 0..n {
        row[k] = structural_operator(sys, &ScalarField::coordinate(n + k), x)?;
    }
    Ok(row)
}

/// Residual of the geometric canonical commutation relation
/// {x_j, p_k} − (δ_jk + x_j A_k + p_k b_j) with A_k = Ŝ p_k and b_j = Ŝ x_j.
/// Indices are zero-based into the q block (0 ≤ j, k < n).
pub fn commutation_residual(sys: &StructuralSystem, j: usize, k: usize, x: &[f64]) -> Result<f64> {
    let n = sys.canonical_pairs().ok_or(Error::NoCanonicalSplit)?;
    sys.check_dim(x)?;
    if j >= n || k >= n {
        return Err(Error::dim(n, j.max(k) + 1));
    }
    let qj = ScalarField::coordinate(j);
    let pk = ScalarField::coordinate(n + k);
    let lhs = gspb(sys, &qj, &pk, x)?;

    let a_k = structural_operator(sys, &pk, x)?;
    let b_j = structural_operator(sys, &qj, x)?;
    let delta = if j == k { 1.0 } else { 0.0 };
    let rhs = delta + x[j] * a_k + x[n + k] * b_j;
    Ok(lhs - rhs)
}

/// Iterated applications of the structural operator, each evaluated along
/// two routes:
/// - `sw`: Ŝ w applied to the field x ↦ Ŝ H(x); `sw_chain` = b_j ∂_j w.
/// - `sa`: Ŝ A_k applied to the fields x ↦ ∂_k s(x); `sa_chain[k]` =
///   b_j ∂_j ∂_k s via the Hessian of s.
#[derive(Debug, Clone)]
pub struct SOperatorIterates {
    pub sw: f64,
    pub sw_chain: f64,
    pub sa: DVector<f64>,
    pub sa_chain: DVector<f64>,
}

pub fn s_operator_iterates(sys: &StructuralSystem, x: &[f64]) -> Result<SOperatorIterates> {
    sys.check_dim(x)?;
    let m = sys.dim();
    let geo = geometrio(sys, x)?;

    // Route 1: Ŝ applied to the derived fields. The derived fields are
    // themselves finite-difference quantities, so they carry noise of order
    // 1e-11; differentiate them with a coarser step to keep the quotient
    // clean.
    let derived_scale = 1e-3;
    let sys_w = sys.clone();
    let w_field =
        ScalarField::new(move |y| structural_operator(&sys_w, &sys_w.h, y).unwrap_or(f64::NAN))
            .with_fd_scale(derived_scale);
    let sw = structural_operator(sys, &w_field, x)?;

    let mut sa = DVector::zeros(m);
    for k in 0..m {
        let sys_a = sys.clone();
        let a_field =
            ScalarField::new(move |y| sys_a.structure_gradient(y)[k]).with_fd_scale(derived_scale);
        sa[k] = structural_operator(sys, &a_field, x)?;
    }

    // Route 2: chain forms b_j ∂_j w and b_j ∂_j ∂_k s.
    let dw = w_field.gradient(x);
    let sw_chain = geo.b.iter().zip(dw.iter()).map(|(b, d)| b * d).sum();
    let hess = sys.s.hessian(x);
    let mut sa_chain = DVector::zeros(m);
    for k in 0..m {
        sa_chain[k] = (0..m).map(|j| geo.b[j] * hess[(j, k)]).sum();
    }

    Ok(SOperatorIterates {
        sw,
        sw_chain,
        sa,
        sa_chain,
    })
}
