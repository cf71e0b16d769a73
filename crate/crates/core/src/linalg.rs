//! Small dense helpers around faer.

use crate::C64;
use faer::Mat;

/// y = M v for a real matrix and a complex vector.
pub fn real_matvec(m: &Mat<f64>, v: &[C64]) -> Vec<C64> {
    let x = Mat::<f64>::from_fn(v.len(), 2, |i, j| if j == 0 { v[i].re } else { v[i].im });
    let y = m * &x;
    (0..y.nrows()).map(|i| C64::new(y[(i, 0)], y[(i, 1)])).collect()
}

/// y = M v for a complex matrix.
pub fn complex_matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let x = Mat::<C64>::from_fn(v.len(), 1, |i, _| v[i]);
    let y = m * &x;
    (0..y.nrows()).map(|i| y[(i, 0)]).collect()
}

pub fn to_complex(m: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}
