use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::LeastSquares;

/// Least-squares solution of `Z b = y`. Fails with [`crate::Error::Singular`] when
/// the smallest singular value of `Z` is below `1e-10` times the largest.
pub fn ols_solve(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    LeastSquares::new(z).solve(y, 0.0)
}

/// Ridge solution `(Z'Z + lambda I)^{-1} Z'y`; `lambda = 0` is [`ols_solve`].
pub fn ridge_solve(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    LeastSquares::new(z).solve(y, lambda)
}

/// `max_i |((Z'Z + lambda I) b - Z'y)_i|`: how far `b` is from solving the
/// (penalized) normal equations.
pub fn normal_equation_residual(z: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, lambda: f64) -> f64 {
    let lhs = z.tr_mul(&(z * b)) + b * lambda;
    (lhs - z.tr_mul(y)).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn identity_design_returns_response() {
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0]);
        let b = ols_solve(&DMatrix::identity(4, 4), &y).unwrap();
        assert!((b - &y).amax() < 1e-14);
    }

    #[test]
    fn ones_column_gives_mean() {
        let b = ols_solve(&DMatrix::from_element(3, 1, 1.0), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hand_solved_normal_equations() {
        // Z'Z = [[3, 3], [3, 5]], Z'y = (3, 5) -> b = (0, 1)
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let b = ols_solve(&z, &DVector::from_vec(vec![0.0, 1.0, 2.0])).unwrap();
        assert!(b[0].abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let z = DMatrix::from_row_slice(5, 2, &[1.0, 0.3, 1.0, -1.2, 1.0, 2.2, 1.0, 0.0, 1.0, 1.1]);
        let y = DVector::from_vec(vec![0.1, 2.0, -0.4, 1.3, 0.9]);
        let b = ols_solve(&z, &y).unwrap();
        let r = &y - &z * &b;
        assert!(z.tr_mul(&r).amax() < 1e-12);
    }

    #[test]
    fn singular_design_names_rank() {
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0, 4.0]);
        let err = ols_solve(&z, &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap_err();
        assert_eq!(err, Error::Singular { rank: 2, columns: 3 });
    }

    #[test]
    fn ridge_examples() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.3, 1.1, 2.4]);
        let ols = ols_solve(&z, &y).unwrap();
        assert!((ridge_solve(&z, &y, 0.0).unwrap() - ols).amax() < 1e-10);
        assert!(ridge_solve(&z, &y, 1e9).unwrap().norm() < 1e-3);
        // (2 + 2)^{-1} * 4 = 1
        let b = ridge_solve(&DMatrix::from_element(2, 1, 1.0), &DVector::from_vec(vec![2.0, 2.0]), 2.0).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ridge_satisfies_penalized_normal_equations() {
        let z = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, 3.0, 1.0, -1.0, 0.5, 1.0, 0.7, -2.0, 1.0, 1.5, 0.0]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let b = ridge_solve(&z, &y, 0.7).unwrap();
        assert!(normal_equation_residual(&z, &y, &b, 0.7) < 1e-12);
        assert!(ridge_solve(&z, &y, -1.0).is_err());
    }
}
