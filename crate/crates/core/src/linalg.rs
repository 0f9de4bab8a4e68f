//! SVD-backed least squares.
//!
//! One decomposition of the design serves ordinary least squares, ridge at any
//! penalty, the classical coefficient variances and the hat matrix. The fixed-point
//! iterations keep the design fixed and only change the response, so the
//! decomposition is computed once per fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_TOLERANCE * sigma_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
    rank: usize,
    threshold: f64,
    columns: usize,
    /// Column scales when the design was standardized before decomposition.
    scale: Option<DVector<f64>>,
}

impl LeastSquares {
    pub fn new(design: &DMatrix<f64>) -> Self {
        Self::build(design.clone(), None)
    }

    /// Decompose `Z D^{-1}` with `D` the root-mean-square column norms; solutions
    /// are mapped back to the original coordinates.
    pub fn standardized(design: &DMatrix<f64>) -> Self {
        let n = design.nrows().max(1) as f64;
        let scale = DVector::from_iterator(
            design.ncols(),
            design.column_iter().map(|c| {
                let s = c.norm() / n.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            }),
        );
        let mut scaled = design.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(scale.iter()) {
            col /= *s;
        }
        Self::build(scaled, Some(scale))
    }

    fn build(design: DMatrix<f64>, scale: Option<DVector<f64>>) -> Self {
        let columns = design.ncols();
        let svd = design.svd(true, true);
        let singular = svd.singular_values;
        let sigma_max = singular.iter().cloned().fold(0.0, f64::max);
        let threshold = RANK_TOLERANCE * sigma_max;
        let rank = if sigma_max > 0.0 { singular.iter().filter(|&&s| s > threshold).count() } else { 0 };
        LeastSquares {
            u: svd.u.expect("requested U"),
            singular,
            v_t: svd.v_t.expect("requested V^T"),
            rank,
            threshold,
            columns,
            scale,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.columns
    }

    fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::Singular { rank: self.rank, columns: self.columns })
        }
    }

    /// `argmin ||Z b - y||^2 + lambda ||b||^2`. With `lambda == 0` this is OLS and
    /// requires full column rank.
    pub fn solve(&self, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidInput(format!("penalty must be a finite value >= 0, got {lambda}")));
        }
        if y.len() != self.u.nrows() {
            return Err(Error::InvalidInput(format!(
                "response has {} entries but the design has {} rows",
                y.len(),
                self.u.nrows()
            )));
        }
        let mut coords = self.u.tr_mul(y);
        if lambda == 0.0 {
            self.require_full_rank()?;
            for (c, s) in coords.iter_mut().zip(self.singular.iter()) {
                *c /= *s;
            }
        } else {
            for (c, s) in coords.iter_mut().zip(self.singular.iter()) {
                *c *= if *s > self.threshold { *s / (*s * *s + lambda) } else { 0.0 };
            }
        }
        let mut beta = self.v_t.tr_mul(&coords);
        if let Some(scale) = &self.scale {
            beta.component_div_assign(scale);
        }
        Ok(beta)
    }

    /// Diagonal of `(Z^T Z)^{-1}`.
    pub fn inverse_gram_diagonal(&self) -> Result<DVector<f64>> {
        self.require_full_rank()?;
        let mut diag = DVector::zeros(self.columns);
        for (k, s) in self.singular.iter().enumerate() {
            let row = self.v_t.row(k);
            for c in 0..self.columns {
                diag[c] += row[c] * row[c] / (s * s);
            }
        }
        if let Some(scale) = &self.scale {
            for c in 0..self.columns {
                diag[c] /= scale[c] * scale[c];
            }
        }
        Ok(diag)
    }

    /// Orthonormal basis of the column space (columns of `U` with non-negligible
    /// singular values).
    pub fn range_basis(&self) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..self.singular.len()).filter(|&k| self.singular[k] > self.threshold).collect();
        DMatrix::from_fn(self.u.nrows(), keep.len(), |i, j| self.u[(i, keep[j])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_on_small_system() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let b = LeastSquares::new(&z).solve(&y, 0.0).unwrap();
        assert!((b[0] - 0.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_ols_is_an_error_but_ridge_is_not() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let ls = LeastSquares::new(&z);
        assert_eq!(ls.solve(&y, 0.0), Err(Error::Singular { rank: 1, columns: 2 }));
        let b = ls.solve(&y, 1.0).unwrap();
        // ridge solution lies in the row space, i.e. proportional to (1, 2)
        assert!((b[1] - 2.0 * b[0]).abs() < 1e-12);
    }

    #[test]
    fn standardization_does_not_change_ols() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 1.0, 20.0, 1.0, 35.0, 1.0, 41.0]);
        let y = DVector::from_vec(vec![1.0, 2.5, 3.0, 4.5]);
        let a = LeastSquares::new(&z).solve(&y, 0.0).unwrap();
        let b = LeastSquares::standardized(&z).solve(&y, 0.0).unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn inverse_gram_matches_explicit_inverse() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0, 1.0, 3.0]);
        let explicit = (z.transpose() * &z).try_inverse().unwrap();
        let diag = LeastSquares::new(&z).inverse_gram_diagonal().unwrap();
        assert!((diag[0] - explicit[(0, 0)]).abs() < 1e-12);
        assert!((diag[1] - explicit[(1, 1)]).abs() < 1e-12);
    }
}
