use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::dataset::{SmartDataset, Trajectory, TreatmentCoding};
use super::params::{ParamLayout, ParameterVector};
use super::spec::ModelSpec;
use crate::error::{Error, Result};

/// Which patient and stage a stacked row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOrigin {
    /// Position of the patient in the dataset.
    pub patient: usize,
    pub patient_id: String,
    pub stage: usize,
}

/// Sparse linear functionals of theta for a row's Bellman backup.
#[derive(Debug, Clone)]
struct Backup {
    main: Vec<(usize, f64)>,
    contrast: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
enum RowTarget {
    Observed(f64),
    Backup(Backup),
}

/// Main-effect and interaction features `(H_j0, H_j1)` of a patient at `stage`.
pub fn stage_features(traj: &Trajectory, stage: usize, spec: &ModelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let st = spec.stage(stage)?;
    if !traj.is_present(stage) {
        return Err(Error::PatientAbsent { patient: traj.patient_id.clone(), stage });
    }
    let eval = |f: &super::expr::Feature| {
        f.eval(traj).ok_or_else(|| {
            Error::InvalidInput(format!("patient `{}`: feature `{f}` references a missing covariate", traj.patient_id))
        })
    };
    let main = st.main.iter().map(eval).collect::<Result<Vec<_>>>()?;
    let inter = st.interaction.iter().map(|s| eval(&s.feature)).collect::<Result<Vec<_>>>()?;
    Ok((main, inter))
}

fn backup_for(traj: &Trajectory, next: usize, spec: &ModelSpec) -> Result<Backup> {
    let layout = spec.layout();
    let (h0, h1) = stage_features(traj, next, spec)?;
    Ok(Backup {
        main: layout.main_columns(next).iter().copied().zip(h0).collect(),
        contrast: layout.interaction_columns(next).iter().copied().zip(h1).collect(),
    })
}

fn eval_backup(b: &Backup, theta: &[f64], coding: TreatmentCoding) -> f64 {
    let main: f64 = b.main.iter().map(|&(c, h)| theta[c] * h).sum();
    let contrast: f64 = b.contrast.iter().map(|&(c, h)| theta[c] * h).sum();
    main + coding.max_term(contrast)
}

/// Stage-`stage` pseudo-outcome `Y_j(theta_{j+1})`: the observed primary outcome for
/// a patient who responds at the end of `stage`, otherwise
/// `beta_{j+1}' H_{j+1,0} + max_a a * psi_{j+1}' H_{j+1,1}`.
pub fn pseudo_outcome(
    theta: &ParameterVector,
    traj: &Trajectory,
    stage: usize,
    spec: &ModelSpec,
    coding: TreatmentCoding,
) -> Result<f64> {
    theta.check_layout(spec.layout())?;
    let j_max = spec.num_stages();
    if stage == 0 || stage > j_max {
        return Err(Error::StageOutOfRange { stage, num_stages: j_max });
    }
    if stage == j_max {
        return Err(Error::InvalidInput(format!("stage {stage} is the final stage; it uses the observed outcome")));
    }
    if !traj.is_present(stage) {
        return Err(Error::PatientAbsent { patient: traj.patient_id.clone(), stage });
    }
    if traj.responded_at(stage) {
        return Ok(traj.primary_outcome);
    }
    Ok(eval_backup(&backup_for(traj, stage + 1, spec)?, theta.values(), coding))
}

/// The theta-independent part of the stacked system: the block design `Z`, row
/// provenance and, per row, either an observed response or the backup functional.
#[derive(Debug, Clone)]
pub struct StackedDesign {
    design: DMatrix<f64>,
    rows: Vec<RowOrigin>,
    targets: Vec<RowTarget>,
    coding: TreatmentCoding,
    layout: Arc<ParamLayout>,
}

impl StackedDesign {
    /// Rows are grouped by stage, `J` first, patients in dataset order within a stage.
    pub fn build(data: &SmartDataset, spec: &ModelSpec) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let j_max = spec.num_stages();
        if data.num_stages() != j_max {
            return Err(Error::InvalidInput(format!("dataset has {} stages, spec has {j_max}", data.num_stages())));
        }
        let layout = spec.layout();
        let coding = data.coding();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut row_entries = Vec::new();
        for j in (1..=j_max).rev() {
            for (p, traj) in data.trajectories().iter().enumerate().filter(|(_, t)| t.is_present(j)) {
                let (h0, h1) = stage_features(traj, j, spec)?;
                let a = traj.treatments[j - 1];
                entries.clear();
                entries.extend(layout.main_columns(j).iter().copied().zip(h0));
                entries.extend(layout.interaction_columns(j).iter().copied().zip(h1.iter().map(|h| h * a)));
                row_entries.push(entries.clone());
                rows.push(RowOrigin { patient: p, patient_id: traj.patient_id.clone(), stage: j });
                targets.push(if j == j_max || traj.responded_at(j) {
                    RowTarget::Observed(traj.primary_outcome)
                } else {
                    RowTarget::Backup(backup_for(traj, j + 1, spec)?)
                });
            }
        }
        let mut design = DMatrix::zeros(rows.len(), layout.len());
        for (r, es) in row_entries.iter().enumerate() {
            for &(c, v) in es {
                design[(r, c)] = v;
            }
        }
        if design.iter().all(|&v| v == 0.0) {
            return Err(Error::RankZeroDesign);
        }
        Ok(StackedDesign { design, rows, targets, coding, layout: Arc::clone(layout) })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn rows(&self) -> &[RowOrigin] {
        &self.rows
    }

    pub fn coding(&self) -> TreatmentCoding {
        self.coding
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    /// Whether a row's response depends on theta.
    pub fn is_backup_row(&self, row: usize) -> bool {
        matches!(self.targets[row], RowTarget::Backup(_))
    }

    /// `Y*(theta)` from raw values laid out per [`Self::layout`].
    pub(crate) fn response_from(&self, theta: &[f64]) -> DVector<f64> {
        debug_assert_eq!(theta.len(), self.layout.len());
        DVector::from_iterator(
            self.targets.len(),
            self.targets.iter().map(|t| match t {
                RowTarget::Observed(y) => *y,
                RowTarget::Backup(b) => eval_backup(b, theta, self.coding),
            }),
        )
    }

    pub fn response(&self, theta: &ParameterVector) -> Result<DVector<f64>> {
        theta.check_layout(&self.layout)?;
        Ok(self.response_from(theta.values()))
    }

    pub fn at(&self, theta: &ParameterVector) -> Result<StackedSystem> {
        Ok(StackedSystem {
            response: self.response(theta)?,
            design: self.design.clone(),
            row_provenance: self.rows.clone(),
        })
    }
}

/// `Y*(theta) = Z theta + eps` evaluated at one theta.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub row_provenance: Vec<RowOrigin>,
}

pub fn assemble_stacked(
    data: &SmartDataset,
    spec: &ModelSpec,
    theta: &ParameterVector,
    coding: TreatmentCoding,
) -> Result<StackedSystem> {
    if data.coding() != coding {
        return Err(Error::InvalidInput(format!(
            "dataset is coded ({}, {}) but ({}, {}) was requested",
            data.coding().t1(),
            data.coding().t2(),
            coding.t1(),
            coding.t2()
        )));
    }
    theta.check_layout(spec.layout())?;
    StackedDesign::build(data, spec)?.at(theta)
}
