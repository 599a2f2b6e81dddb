use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Ratio of the largest to smallest absolute eigenvalue of a symmetric matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive-definite matrix, refusing near-singular input.
pub fn spd_inverse(a: &DMatrix<f64>, max_condition: f64) -> Result<DMatrix<f64>, f64> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > max_condition {
        return Err(cond);
    }
    a.clone().cholesky().map(|c| c.inverse()).ok_or(cond)
}

/// General inverse via LU.
pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
