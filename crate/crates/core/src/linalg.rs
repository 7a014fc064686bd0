//! Small dense helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};

use crate::prelude::*;

/// Largest absolute entry, `0` for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `max |a - b|` over entries. Panics on shape mismatch.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Operator 2-norm via the singular values.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc, x| acc.max(*x))
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut probe = x.clone();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let step = 6.0e-6 * x[j].abs().max(1.0);
        let orig = probe[j];
        probe[j] = orig + step;
        let plus = f(&probe);
        probe[j] = orig - step;
        let minus = f(&probe);
        probe[j] = orig;
        let col = (plus - minus) / (2.0 * step);
        jac.set_column(j, &col);
    }
    jac
}

/// Solves `a x = b`, falling back to an SVD least-squares solve when the LU
/// factorisation is singular. Returns `None` if both fail.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |acc, x| acc.max(*x));
    let x = svd.solve(b, smax * 1e-13).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Euclidean norm that tolerates NaN (NaN propagates).
pub fn norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_jacobian_of_linear_map_is_the_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let x = DVector::from_vec(vec![0.3, -1.2]);
        let jac = fd_jacobian(|v| &a * v, &x);
        assert!(max_abs_diff(&jac, &a) < 1e-9);
    }

    #[test]
    fn singular_solve_falls_back_to_least_squares() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 0.0]);
        let x = solve_dense(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
    }
}
