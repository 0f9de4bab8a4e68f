//! Hat-matrix diagnostics for the fixed-point iteration.
//!
//! Each Q-shared step maps `Y*` to `H Y*` with `H = Z (Z'Z)^{-1} Z'`. When `H` is a
//! non-expansion in the infinity norm (maximum absolute row sum at most 1) the
//! iteration is guaranteed to settle; otherwise convergence is not guaranteed,
//! although it may still happen.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;

/// Above this many rows the hat matrix is never formed.
pub const BLOCKWISE_THRESHOLD: usize = 5000;

/// Row sums of an exact projector equal to 1 come out a few ulps above it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

const ROW_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub inf_op_norm: f64,
    pub is_nonexpansion: bool,
    /// Row attaining the norm (first one on ties).
    pub worst_row: usize,
    pub rank: usize,
}

impl ExpansionReport {
    pub fn verdict(&self) -> &'static str {
        if self.is_nonexpansion {
            "hat matrix is an infinity-norm non-expansion"
        } else {
            "hat matrix is not an infinity-norm non-expansion: convergence not guaranteed"
        }
    }
}

fn full_rank(z: &DMatrix<f64>) -> Result<LeastSquares> {
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::InvalidInput("design has no rows or no columns".into()));
    }
    let lsq = LeastSquares::new(z);
    if lsq.rank() == 0 {
        return Err(Error::RankZeroDesign);
    }
    if !lsq.is_full_rank() {
        return Err(Error::Singular { rank: lsq.rank(), columns: lsq.columns() });
    }
    Ok(lsq)
}

/// Orthogonal projector onto the column space of `z`.
pub fn hat_matrix(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = full_rank(z)?.range_basis();
    Ok(&q * q.transpose())
}

/// Maximum absolute row sum.
pub fn inf_operator_norm(h: &DMatrix<f64>) -> Result<f64> {
    Ok(max_row(h)?.1)
}

fn max_row(h: &DMatrix<f64>) -> Result<(usize, f64)> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    Ok(argmax((0..h.nrows()).map(|i| h.row(i).iter().map(|v| v.abs()).sum())))
}

fn argmax(sums: impl Iterator<Item = f64>) -> (usize, f64) {
    sums.enumerate().fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best })
}

/// Row sums of `|Q Q'|` computed a block of rows at a time.
fn blockwise_row_sums(q: &DMatrix<f64>) -> Vec<f64> {
    let n = q.nrows();
    let qt = q.transpose();
    (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let start = b * ROW_BLOCK;
            let len = ROW_BLOCK.min(n - start);
            let block = q.rows(start, len) * &qt;
            (0..len).map(move |i| block.row(i).iter().map(|v| v.abs()).sum::<f64>()).collect::<Vec<_>>()
        })
        .collect()
}

/// Hat-matrix non-expansion check for design `z`.
pub fn nonexpansion_check(z: &DMatrix<f64>) -> Result<ExpansionReport> {
    nonexpansion_check_with(z, BLOCKWISE_THRESHOLD)
}

/// As [`nonexpansion_check`] with an explicit row threshold for the blockwise path.
pub fn nonexpansion_check_with(z: &DMatrix<f64>, blockwise_above: usize) -> Result<ExpansionReport> {
    let lsq = full_rank(z)?;
    let q = lsq.range_basis();
    let (worst_row, norm) = if z.nrows() > blockwise_above {
        argmax(blockwise_row_sums(&q).into_iter())
    } else {
        max_row(&(&q * q.transpose()))?
    };
    Ok(ExpansionReport {
        inf_op_norm: norm,
        is_nonexpansion: norm <= 1.0 + BOUNDARY_TOLERANCE,
        worst_row,
        rank: lsq.rank(),
    })
}
