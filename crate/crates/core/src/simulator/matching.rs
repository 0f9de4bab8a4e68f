use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::estimators::{Regime, SharedRegime};
use crate::model::{Feature, ModelSpec, ParameterVector, SlotTarget, SmartDataset};

/// Agreement between a fitted regimen and the oracle, as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    /// `M_j`: share of the patients present at stage `j` given the oracle's treatment.
    pub per_stage: Vec<f64>,
    /// `M`: stage-size weighted average of `M_j`.
    pub weighted: f64,
    /// `M~`: share of patients matched at every stage they reached.
    pub joint: f64,
    pub stage_sizes: Vec<usize>,
}

/// The oracle regimen: the scenario's stage-3 contrast `(g10, g11, g12, g13)` used as
/// the shared `psi` at every stage.
///
/// Needs a three-stage spec whose stage-3 interaction slots are `1, O3, A2, A1*A2`,
/// each mapped to a distinct shared parameter, with no stage-local slots anywhere.
pub fn oracle_policy(scenario: &Scenario, spec: &ModelSpec) -> Result<SharedRegime> {
    let mismatch = |why: String| Err(Error::Spec(format!("oracle needs the three-stage shared structure: {why}")));
    if spec.num_stages() != 3 {
        return mismatch(format!("spec has {} stages", spec.num_stages()));
    }
    let expected = ["1", "O3", "A2", "A1*A2"]
        .iter()
        .map(|f| Feature::parse(f, spec.covariate_names()))
        .collect::<Result<Vec<_>>>()?;
    let stage3 = &spec.stage(3)?.interaction;
    if stage3.len() != expected.len() || stage3.iter().zip(&expected).any(|(s, e)| s.feature != *e) {
        return mismatch("stage-3 interaction features must be (1, O3, A2, A1*A2)".into());
    }
    if spec.stages().iter().flat_map(|s| &s.interaction).any(|s| s.target == SlotTarget::Local) {
        return mismatch("stage-local interaction slots have no oracle value".into());
    }
    let layout = spec.layout();
    let mut theta = ParameterVector::zeros(layout);
    let psi_start = layout.psi_range().start;
    let truth = scenario.true_psi();
    let mut covered = vec![false; spec.shared_names().len()];
    for (slot, value) in stage3.iter().zip(truth) {
        if let SlotTarget::Shared(k) = slot.target {
            theta.values_mut()[psi_start + k] = value;
            covered[k] = true;
        }
    }
    if let Some(k) = covered.iter().position(|c| !c) {
        return mismatch(format!("shared parameter `{}` is not used at stage 3", spec.shared_names()[k]));
    }
    Ok(SharedRegime { theta, spec: spec.clone(), coding: scenario.coding })
}

/// Compare the two regimens on every (patient, stage) of `eval_data`, using the
/// observed histories.
pub fn allocation_matching(
    fitted: &dyn Regime,
    oracle: &dyn Regime,
    eval_data: &SmartDataset,
) -> Result<MatchingReport> {
    if eval_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let j_max = eval_data.num_stages();
    let mut present = vec![0usize; j_max];
    let mut matched = vec![0usize; j_max];
    let mut joint = 0usize;
    for traj in eval_data.trajectories() {
        let mut all = true;
        for j in 1..=traj.stages_reached() {
            present[j - 1] += 1;
            if fitted.assign(traj, j)? == oracle.assign(traj, j)? {
                matched[j - 1] += 1;
            } else {
                all = false;
            }
        }
        joint += usize::from(all);
    }
    let per_stage =
        matched.iter().zip(&present).map(|(&m, &p)| if p == 0 { 0.0 } else { m as f64 / p as f64 }).collect();
    Ok(MatchingReport {
        per_stage,
        weighted: matched.iter().sum::<usize>() as f64 / present.iter().sum::<usize>() as f64,
        joint: joint as f64 / eval_data.len() as f64,
        stage_sizes: present,
    })
}
