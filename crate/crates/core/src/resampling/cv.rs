use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{starting_point, FitConfig, FixedPointSolver, InitStrategy};
use crate::model::{ModelSpec, ParameterVector, SmartDataset, StackedDesign, TreatmentCoding};
use crate::rng::{domain, substream};

pub const NUM_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    /// `None` where some fold could not be fitted at that penalty.
    pub cv_error: Vec<Option<f64>>,
    pub lambda_hat: f64,
    /// Fold of each patient, in dataset order.
    pub fold_assignment: Vec<usize>,
}

/// 25 penalties, log-spaced over `[1e-4, 1e2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..25).map(|k| 10f64.powf(-4.0 + 6.0 * k as f64 / 24.0)).collect()
}

/// Random near-equal split of `n` patients into ten folds; depends on `(seed, n)` only.
pub fn fold_assignment(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut substream(seed, domain::CV_FOLDS, n as u64));
    let mut folds = vec![0; n];
    for (pos, &p) in perm.iter().enumerate() {
        folds[p] = pos % NUM_FOLDS;
    }
    folds
}

struct Fold {
    solver: Option<FixedPointSolver>,
    train: SmartDataset,
    test: StackedDesign,
    /// Rows of `test` grouped by held-out patient.
    subjects: Vec<Vec<usize>>,
}

/// Folds and training-set decompositions for one dataset, reusable across starting
/// strategies and penalty grids.
pub struct CrossValidator {
    spec: ModelSpec,
    folds: Vec<usize>,
    prepared: Vec<Fold>,
}

impl CrossValidator {
    pub fn new(data: &SmartDataset, spec: &ModelSpec, seed: u64) -> Result<Self> {
        if data.len() < NUM_FOLDS {
            return Err(Error::InvalidInput(format!(
                "{NUM_FOLDS}-fold CV needs at least {NUM_FOLDS} patients, got {}",
                data.len()
            )));
        }
        let folds = fold_assignment(data.len(), seed);
        let prepared = (0..NUM_FOLDS)
            .into_par_iter()
            .map(|v| {
                let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != v).collect();
                let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == v).collect();
                let train = data.select(&train_idx);
                let test = StackedDesign::build(&data.select(&test_idx), spec)?;
                let mut subjects = vec![Vec::new(); test_idx.len()];
                for (r, origin) in test.rows().iter().enumerate() {
                    subjects[origin.patient].push(r);
                }
                // A training design that cannot be decomposed only invalidates the cells that need it.
                let solver = FixedPointSolver::new(&train, spec, false).ok();
                Ok(Fold { solver, train, test, subjects })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossValidator { spec: spec.clone(), folds, prepared })
    }

    pub fn fold_assignment(&self) -> &[usize] {
        &self.folds
    }

    /// CV curve over `grid` with every training fit started from `init`.
    pub fn run(&self, init: InitStrategy, grid: &[f64], cfg: &FitConfig) -> Result<CvResult> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid is empty".into()));
        }
        if let Some(l) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(format!("lambda grid values must be finite and >= 0, got {l}")));
        }
        cfg.validate()?;
        let starts: Vec<Option<ParameterVector>> =
            self.prepared.iter().map(|f| starting_point(&f.train, &self.spec, init).ok()).collect();
        let cells: Vec<Option<f64>> = (0..grid.len() * NUM_FOLDS)
            .into_par_iter()
            .map(|c| {
                let v = c % NUM_FOLDS;
                cell_error(&self.prepared[v], starts[v].as_ref()?, cfg, grid[c / NUM_FOLDS])
            })
            .collect();
        let cv_error: Vec<Option<f64>> = cells
            .chunks(NUM_FOLDS)
            .map(|per_fold| per_fold.iter().copied().sum::<Option<f64>>().map(|s| s / NUM_FOLDS as f64))
            .collect();
        let best = cv_error
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|e| (i, e)))
            .fold(None, |acc: Option<(usize, f64)>, (i, e)| match acc {
                Some((_, b)) if b <= e => acc,
                _ => Some((i, e)),
            })
            .ok_or_else(|| Error::InvalidInput("no penalty in the grid could be fitted on every fold".into()))?;
        Ok(CvResult {
            lambda_grid: grid.to_vec(),
            cv_error,
            lambda_hat: grid[best.0],
            fold_assignment: self.folds.clone(),
        })
    }
}

/// Held-out error of one (fold, penalty) cell: per-subject sum of squared Bellman
/// residuals `Y*_u(theta_K) - Z_u theta_K`, averaged over the fold's subjects.
fn cell_error(fold: &Fold, theta0: &ParameterVector, cfg: &FitConfig, lambda: f64) -> Option<f64> {
    let fit = fold.solver.as_ref()?.run(theta0, cfg, lambda).ok()?;
    let theta = DVector::from_column_slice(fit.theta_hat.values());
    let resid = fold.test.response(&fit.theta_hat).ok()? - fold.test.design() * theta;
    let total: f64 = fold.subjects.iter().map(|rows| rows.iter().map(|&r| resid[r] * resid[r]).sum::<f64>()).sum();
    let err = total / fold.subjects.len() as f64;
    err.is_finite().then_some(err)
}

/// Ten-fold cross-validated penalty for the penalized Q-shared fit.
///
/// Each training fold is fitted from `init` to its final iterate at every penalty;
/// held-out error is then averaged per fold and across folds. The argmin over grid
/// points valid in every fold is returned (first one on ties).
pub fn select_lambda(
    data: &SmartDataset,
    spec: &ModelSpec,
    coding: TreatmentCoding,
    init: InitStrategy,
    grid: &[f64],
    seed: u64,
    cfg: &FitConfig,
) -> Result<CvResult> {
    if data.coding() != coding {
        return Err(Error::InvalidInput("dataset coding differs from the requested coding".into()));
    }
    CrossValidator::new(data, spec, seed)?.run(init, grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[24] - 1e2).abs() < 1e-10);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn folds_are_near_equal_and_seeded() {
        let f = fold_assignment(103, 5);
        let mut counts = [0; NUM_FOLDS];
        f.iter().for_each(|&v| counts[v] += 1);
        assert!(counts.iter().all(|&c| c == 10 || c == 11));
        assert_eq!(f, fold_assignment(103, 5));
        assert_ne!(f, fold_assignment(103, 6));
    }
}
