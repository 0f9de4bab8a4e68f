use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two values a binary treatment is coded with. `t2` wins ties in decision rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TreatmentCoding {
    t1: f64,
    t2: f64,
}

impl TreatmentCoding {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !t1.is_finite() || !t2.is_finite() {
            return Err(Error::InvalidInput(format!("treatment coding ({t1}, {t2}) must be finite")));
        }
        if t1 == t2 {
            return Err(Error::InvalidInput(format!("treatment coding values must differ, got ({t1}, {t2})")));
        }
        Ok(TreatmentCoding { t1, t2 })
    }

    /// The conventional {-1, 1} coding.
    pub fn symmetric() -> Self {
        TreatmentCoding { t1: -1.0, t2: 1.0 }
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn contains(&self, a: f64) -> bool {
        a == self.t1 || a == self.t2
    }

    /// `max{t1 * c, t2 * c}`: the value of the best treatment for contrast `c`.
    pub fn max_term(&self, contrast: f64) -> f64 {
        (self.t1 * contrast).max(self.t2 * contrast)
    }

    /// `argmax_a a * c` over the pair, `t2` on ties.
    pub fn best(&self, contrast: f64) -> f64 {
        if self.t1 * contrast > self.t2 * contrast {
            self.t1
        } else {
            self.t2
        }
    }
}

impl TryFrom<[f64; 2]> for TreatmentCoding {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        TreatmentCoding::new(v[0], v[1])
    }
}

impl From<TreatmentCoding> for [f64; 2] {
    fn from(c: TreatmentCoding) -> Self {
        [c.t1, c.t2]
    }
}

/// One patient's record. Entries are indexed by stage minus one and stop at the
/// stage the patient exits: responders at the end of stage `j` carry nothing for
/// later stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub patient_id: String,
    /// `O_j`, one vector per stage reached.
    pub covariates: Vec<Vec<f64>>,
    /// `A_j`, one per stage reached.
    pub treatments: Vec<f64>,
    /// `R_j` for the stages reached, excluding the final stage of the study.
    pub responders: Vec<bool>,
    /// `Y_j`, one per stage reached; blank cells are `None`.
    pub stage_outcomes: Vec<Option<f64>>,
    pub primary_outcome: f64,
}

impl Trajectory {
    /// Number of stages the patient was treated in.
    pub fn stages_reached(&self) -> usize {
        self.treatments.len()
    }

    pub fn is_present(&self, stage: usize) -> bool {
        stage >= 1 && stage <= self.stages_reached()
    }

    /// Responder at the end of `stage` (and therefore exits there).
    pub fn responded_at(&self, stage: usize) -> bool {
        stage >= 1 && self.responders.get(stage - 1).copied().unwrap_or(false)
    }

    pub fn treatment(&self, stage: usize) -> Option<f64> {
        self.treatments.get(stage.checked_sub(1)?).copied()
    }

    pub fn covariate(&self, stage: usize, index: usize) -> Option<f64> {
        self.covariates.get(stage.checked_sub(1)?)?.get(index).copied()
    }

    /// Checks the structural invariants against a study with `num_stages` stages.
    pub fn validate(&self, num_stages: usize) -> Result<()> {
        let reached = self.stages_reached();
        let bad = |msg: String| Err(Error::InvalidInput(format!("patient `{}`: {msg}", self.patient_id)));
        if reached == 0 || reached > num_stages {
            return bad(format!("reached {reached} stages, expected 1..={num_stages}"));
        }
        if self.covariates.len() != reached || self.stage_outcomes.len() != reached {
            return bad("covariates, treatments and stage outcomes must cover the same stages".into());
        }
        if self.responders.len() != reached.min(num_stages - 1) {
            return bad(format!(
                "expected {} responder flags for {reached} stages reached",
                reached.min(num_stages - 1)
            ));
        }
        for j in 1..reached {
            if self.responders[j - 1] {
                return bad(format!("responder at stage {j} carries entries for stage {}", j + 1));
            }
        }
        if reached < num_stages && !self.responders[reached - 1] {
            return bad(format!("stops after stage {reached} without responding"));
        }
        let finite = self.treatments.iter().all(|v| v.is_finite())
            && self.covariates.iter().flatten().all(|v| v.is_finite())
            && self.stage_outcomes.iter().flatten().all(|v| v.is_finite())
            && self.primary_outcome.is_finite();
        if !finite {
            return bad("non-finite value".into());
        }
        Ok(())
    }

    /// Composite of the stage outcomes, when all of them are recorded.
    pub fn composed_outcome(&self) -> Option<f64> {
        let ys: Option<Vec<f64>> = self.stage_outcomes.iter().copied().collect();
        ys.map(|ys| composite_outcome(&ys))
    }
}

/// `R1 Y1 + (1 - R1) R2 (Y1 + Y2)/2 + (1 - R1)(1 - R2)(Y1 + Y2 + Y3)/3`.
pub fn primary_outcome(y1: f64, y2: f64, y3: f64, r1: bool, r2: bool) -> Result<f64> {
    if !(y1.is_finite() && y2.is_finite() && y3.is_finite()) {
        return Err(Error::InvalidInput(format!("stage outcomes must be finite, got ({y1}, {y2}, {y3})")));
    }
    let (r1, r2) = (f64::from(u8::from(r1)), f64::from(u8::from(r2)));
    Ok(r1 * y1 + (1.0 - r1) * r2 * ((y1 + y2) / 2.0) + (1.0 - r1) * (1.0 - r2) * ((y1 + y2 + y3) / 3.0))
}

/// Mean of the outcomes of the stages a patient went through; for three stages
/// this is [`primary_outcome`].
pub fn composite_outcome(stage_outcomes: &[f64]) -> f64 {
    match *stage_outcomes {
        [y1] => y1,
        [y1, y2] => (y1 + y2) / 2.0,
        [y1, y2, y3] => (y1 + y2 + y3) / 3.0,
        _ => stage_outcomes.iter().sum::<f64>() / stage_outcomes.len() as f64,
    }
}

/// A validated multi-stage dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SmartDataset {
    num_stages: usize,
    coding: TreatmentCoding,
    trajectories: Vec<Trajectory>,
}

impl SmartDataset {
    pub fn new(num_stages: usize, coding: TreatmentCoding, trajectories: Vec<Trajectory>) -> Result<Self> {
        if num_stages == 0 {
            return Err(Error::InvalidInput("a study needs at least one stage".into()));
        }
        for t in &trajectories {
            t.validate(num_stages)?;
            if let Some(&value) = t.treatments.iter().find(|a| !coding.contains(**a)) {
                return Err(Error::TreatmentNotInCoding {
                    patient: t.patient_id.clone(),
                    value,
                    t1: coding.t1(),
                    t2: coding.t2(),
                });
            }
        }
        Ok(SmartDataset { num_stages, coding, trajectories })
    }

    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    pub fn coding(&self) -> TreatmentCoding {
        self.coding
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Patients present at each stage (`n_j`).
    pub fn stage_sizes(&self) -> Vec<usize> {
        (1..=self.num_stages).map(|j| self.trajectories.iter().filter(|t| t.is_present(j)).count()).collect()
    }

    /// Sub-dataset of the given patients, in the given order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> SmartDataset {
        SmartDataset {
            num_stages: self.num_stages,
            coding: self.coding,
            trajectories: indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
        }
    }

    /// Same patients with treatments relabelled `t1 -> new.t1`, `t2 -> new.t2`.
    /// Outcomes are untouched.
    pub fn recode_treatments(&self, new: TreatmentCoding) -> SmartDataset {
        let old = self.coding;
        let mut out = self.clone();
        for t in &mut out.trajectories {
            for a in &mut t.treatments {
                *a = if *a == old.t1() { new.t1() } else { new.t2() };
            }
        }
        out.coding = new;
        out
    }

    /// Relabel binary covariate values `from.0 -> to.0`, `from.1 -> to.1`.
    pub fn recode_covariates(&self, from: (f64, f64), to: (f64, f64)) -> Result<SmartDataset> {
        let mut out = self.clone();
        for t in &mut out.trajectories {
            for o in t.covariates.iter_mut().flatten() {
                *o = if *o == from.0 {
                    to.0
                } else if *o == from.1 {
                    to.1
                } else {
                    return Err(Error::InvalidInput(format!(
                        "patient `{}`: covariate {o} is not one of ({}, {})",
                        t.patient_id, from.0, from.1
                    )));
                };
            }
        }
        Ok(out)
    }

    /// Patients whose primary outcome differs from the stage-outcome composite by
    /// more than `tol`.
    pub fn composition_mismatches(&self, tol: f64) -> Vec<&str> {
        self.trajectories
            .iter()
            .filter(|t| t.composed_outcome().is_some_and(|c| (c - t.primary_outcome).abs() > tol))
            .map(|t| t.patient_id.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primary_outcome_cases() {
        assert_eq!(primary_outcome(1.5448, 2.857, 2.230, true, true).unwrap(), 1.5448);
        let r2 = primary_outcome(-0.4734, -0.688, -0.724, false, true).unwrap();
        assert!((r2 - (-0.5807)).abs() < 1e-12);
        let r4 = primary_outcome(-0.4224, 0.547, -0.377, false, false).unwrap();
        assert!((r4 - (-0.2524 / 3.0)).abs() < 1e-12);
        assert!(primary_outcome(f64::NAN, 0.0, 0.0, true, true).is_err());
    }

    #[test]
    fn composite_matches_primary_formula() {
        for (ys, r1, r2) in
            [(&[0.3][..], true, true), (&[0.3, -1.2][..], false, true), (&[0.3, -1.2, 2.5][..], false, false)]
        {
            let mut full = [0.0; 3];
            full[..ys.len()].copy_from_slice(ys);
            let want = primary_outcome(full[0], full[1], full[2], r1, r2).unwrap();
            assert_eq!(composite_outcome(ys), want);
        }
    }

    #[test]
    fn coding_rejects_equal_values() {
        assert!(TreatmentCoding::new(0.3, 0.3).is_err());
        assert!(TreatmentCoding::new(f64::INFINITY, 0.3).is_err());
    }

    #[test]
    fn tie_goes_to_second_value() {
        let c = TreatmentCoding::new(0.250, 0.248).unwrap();
        assert_eq!(c.best(0.0), 0.248);
        assert_eq!(c.best(1.0), 0.250);
        assert_eq!(c.best(-1.0), 0.248);
    }

    fn traj(reached: usize, responders: Vec<bool>) -> Trajectory {
        Trajectory {
            patient_id: "p".into(),
            covariates: vec![vec![1.0]; reached],
            treatments: vec![1.0; reached],
            responders,
            stage_outcomes: vec![Some(0.0); reached],
            primary_outcome: 0.0,
        }
    }

    #[test]
    fn trajectory_validation() {
        assert!(traj(3, vec![false, false]).validate(3).is_ok());
        assert!(traj(1, vec![true]).validate(3).is_ok());
        // stops early without responding
        assert!(traj(2, vec![false, false]).validate(3).is_err());
        // responder with later-stage entries
        assert!(traj(3, vec![true, false]).validate(3).is_err());
    }

    #[test]
    fn treatments_must_follow_coding() {
        let mut t = traj(3, vec![false, false]);
        t.treatments[1] = 0.5;
        let err = SmartDataset::new(3, TreatmentCoding::symmetric(), vec![t]).unwrap_err();
        assert!(matches!(err, Error::TreatmentNotInCoding { value, .. } if value == 0.5));
    }
}
