//! Small dense-matrix extras that nalgebra does not ship.

use nalgebra::DMatrix;

/// Matrix exponential by scaling-and-squaring with a degree-12 Taylor sum.
///
/// The argument is scaled by 2^-s until its infinity norm is at most 1/2,
/// the Taylor series is summed to degree 12 (truncation below 1e-14 at that
/// norm), and the result is squared s times. Used as the closed-form oracle
/// for frozen-coefficient linear systems dv/dt = -W v.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = inf_norm(a);
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
        scaled /= 2f64.powi(squarings as i32);
    }

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=12 {
        term = (&term * &scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Infinity norm (maximum absolute row sum).
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
