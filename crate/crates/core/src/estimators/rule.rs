use super::unshared::UnsharedFit;
use crate::error::{Error, Result};
use crate::model::{stage_features, ModelSpec, ParameterVector, Trajectory, TreatmentCoding};

/// A dynamic treatment regimen: the treatment assigned at `stage` given the history
/// carried by `traj`.
pub trait Regime: Sync {
    fn assign(&self, traj: &Trajectory, stage: usize) -> Result<f64>;
}

impl<F> Regime for F
where
    F: Fn(&Trajectory, usize) -> Result<f64> + Sync,
{
    fn assign(&self, traj: &Trajectory, stage: usize) -> Result<f64> {
        self(traj, stage)
    }
}

/// `argmax_a Q_j(h_j, a)` over the coding pair. Only the contrast `psi_j' H_j1`
/// matters; ties go to `t2`.
pub fn decision_rule(
    theta: &ParameterVector,
    spec: &ModelSpec,
    coding: TreatmentCoding,
    traj: &Trajectory,
    stage: usize,
) -> Result<f64> {
    theta.check_layout(spec.layout())?;
    let (_, h1) = stage_features(traj, stage, spec)?;
    let cols = spec.layout().interaction_columns(stage);
    let contrast: f64 = cols.iter().zip(&h1).map(|(&c, h)| theta.values()[c] * h).sum();
    Ok(coding.best(contrast))
}

/// Regimen read off a stacked fit.
#[derive(Debug, Clone)]
pub struct SharedRegime {
    pub theta: ParameterVector,
    pub spec: ModelSpec,
    pub coding: TreatmentCoding,
}

impl Regime for SharedRegime {
    fn assign(&self, traj: &Trajectory, stage: usize) -> Result<f64> {
        decision_rule(&self.theta, &self.spec, self.coding, traj, stage)
    }
}

/// Regimen read off per-stage unshared fits.
#[derive(Debug, Clone)]
pub struct StagewiseRegime {
    pub fit: UnsharedFit,
    pub spec: ModelSpec,
    pub coding: TreatmentCoding,
}

impl Regime for StagewiseRegime {
    fn assign(&self, traj: &Trajectory, stage: usize) -> Result<f64> {
        let fit = self.fit.stage(stage).ok_or(Error::StageOutOfRange { stage, num_stages: self.fit.stages.len() })?;
        let (_, h1) = stage_features(traj, stage, &self.spec)?;
        let contrast: f64 = fit.psi.iter().zip(&h1).map(|(p, h)| p * h).sum();
        Ok(self.coding.best(contrast))
    }
}
