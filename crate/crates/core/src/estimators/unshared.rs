use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::model::{stage_features, ModelSpec, SmartDataset, TreatmentCoding};

/// Ordinary Q-learning fit of one stage, with every interaction slot stage-local.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFit {
    pub stage: usize,
    /// Coefficients of the stage's main-effect features.
    pub beta: Vec<f64>,
    /// Coefficients of the stage's interaction slots, in spec order.
    pub psi: Vec<f64>,
    /// Classical `sigma^2 (X'X)^{-1}` variance of each `psi` entry.
    pub psi_variance: Vec<f64>,
    /// Patients in the regression.
    pub n: usize,
}

impl StageFit {
    /// `beta' H0 + max_a a * psi' H1`.
    fn value(&self, h0: &[f64], h1: &[f64], coding: TreatmentCoding) -> f64 {
        dot(&self.beta, h0) + coding.max_term(dot(&self.psi, h1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsharedFit {
    /// Indexed by stage minus one.
    pub stages: Vec<StageFit>,
}

impl UnsharedFit {
    pub fn stage(&self, j: usize) -> Option<&StageFit> {
        self.stages.get(j.checked_sub(1)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard Q-learning by backward induction: stage `J` on observed outcomes, then
/// each earlier stage on pseudo-outcomes built from the stage after it.
pub fn q_unshared_fit(data: &SmartDataset, spec: &ModelSpec, coding: TreatmentCoding) -> Result<UnsharedFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.coding() != coding {
        return Err(Error::InvalidInput("dataset coding differs from the requested coding".into()));
    }
    let j_max = spec.num_stages();
    if data.num_stages() != j_max {
        return Err(Error::InvalidInput(format!("dataset has {} stages, spec has {j_max}", data.num_stages())));
    }
    let mut fits: Vec<StageFit> = Vec::with_capacity(j_max);
    for j in (1..=j_max).rev() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for traj in data.trajectories().iter().filter(|t| t.is_present(j)) {
            let (h0, h1) = stage_features(traj, j, spec)?;
            let a = traj.treatments[j - 1];
            let target = if j == j_max || traj.responded_at(j) {
                traj.primary_outcome
            } else {
                let (n0, n1) = stage_features(traj, j + 1, spec)?;
                fits.last().expect("later stage fitted first").value(&n0, &n1, coding)
            };
            rows.push((h0, h1.iter().map(|h| h * a).collect::<Vec<_>>()));
            y.push(target);
        }
        let n = rows.len();
        let (p0, p1) = spec.stage(j).map(|s| (s.main.len(), s.interaction.len()))?;
        let p = p0 + p1;
        if n == 0 {
            return Err(Error::Singular { rank: 0, columns: p });
        }
        let x = DMatrix::from_fn(n, p, |r, c| if c < p0 { rows[r].0[c] } else { rows[r].1[c - p0] });
        let y = DVector::from_vec(y);
        let lsq = LeastSquares::new(&x);
        let coef = lsq.solve(&y, 0.0)?;
        let resid = &y - &x * &coef;
        let sigma2 = if n > p { resid.norm_squared() / (n - p) as f64 } else { 0.0 };
        let diag = lsq.inverse_gram_diagonal()?;
        fits.push(StageFit {
            stage: j,
            beta: coef.as_slice()[..p0].to_vec(),
            psi: coef.as_slice()[p0..].to_vec(),
            psi_variance: diag.as_slice()[p0..].iter().map(|d| sigma2 * d).collect(),
            n,
        });
    }
    fits.reverse();
    Ok(UnsharedFit { stages: fits })
}
