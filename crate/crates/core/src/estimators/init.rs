use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::unshared::{q_unshared_fit, UnsharedFit};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParameterVector, SlotTarget, SmartDataset};

/// How the per-stage unshared estimates of a shared slot are combined into a start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InitStrategy {
    /// Simple average.
    Sa,
    /// Inverse-variance weighted average.
    Ivwa,
    Max,
    Min,
    /// Everything zero, including the `beta` blocks.
    Zero,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 5] =
        [InitStrategy::Sa, InitStrategy::Ivwa, InitStrategy::Max, InitStrategy::Min, InitStrategy::Zero];

    pub fn as_str(&self) -> &'static str {
        match self {
            InitStrategy::Sa => "SA",
            InitStrategy::Ivwa => "IVWA",
            InitStrategy::Max => "MAX",
            InitStrategy::Min => "MIN",
            InitStrategy::Zero => "ZERO",
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InitStrategy::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s)).ok_or_else(|| {
            Error::InvalidInput(format!("unknown init strategy `{s}` (expected SA, IVWA, MAX, MIN or ZERO)"))
        })
    }
}

/// Combine `(estimate, variance)` pairs of one shared slot.
pub fn combine(values: &[(f64, f64)], strategy: InitStrategy) -> Result<f64> {
    if strategy == InitStrategy::Zero {
        return Ok(0.0);
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("no stage estimates to combine".into()));
    }
    let est = values.iter().map(|v| v.0);
    Ok(match strategy {
        InitStrategy::Sa => est.sum::<f64>() / values.len() as f64,
        InitStrategy::Max => est.fold(f64::NEG_INFINITY, f64::max),
        InitStrategy::Min => est.fold(f64::INFINITY, f64::min),
        InitStrategy::Ivwa => {
            if let Some(&(_, v)) = values.iter().find(|(_, v)| !v.is_finite() || *v <= 0.0) {
                return Err(Error::NonPositiveVariance(format!("IVWA needs positive stage variances, got {v}")));
            }
            let w: f64 = values.iter().map(|(_, v)| 1.0 / v).sum();
            values.iter().map(|(e, v)| e / v).sum::<f64>() / w
        }
        InitStrategy::Zero => unreachable!(),
    })
}

/// Starting theta for the shared fits: `beta` blocks and stage-local slots copied from
/// the unshared fit, each shared slot combined across the stages that use it.
pub fn initial_values(unshared: &UnsharedFit, spec: &ModelSpec, strategy: InitStrategy) -> Result<ParameterVector> {
    let layout = spec.layout();
    let mut theta = ParameterVector::zeros(layout);
    if strategy == InitStrategy::Zero {
        return Ok(theta);
    }
    if unshared.stages.len() != spec.num_stages() {
        return Err(Error::LayoutMismatch(format!(
            "unshared fit has {} stages, spec has {}",
            unshared.stages.len(),
            spec.num_stages()
        )));
    }
    let mut pooled = vec![Vec::new(); spec.shared_names().len()];
    for (j, st) in spec.stages().iter().enumerate().map(|(i, s)| (i + 1, s)) {
        let fit = &unshared.stages[j - 1];
        if fit.beta.len() != st.main.len() || fit.psi.len() != st.interaction.len() {
            return Err(Error::LayoutMismatch(format!("stage {j} fit does not match the spec")));
        }
        for (&c, &b) in layout.main_columns(j).iter().zip(&fit.beta) {
            theta.values_mut()[c] = b;
        }
        for (s, slot) in st.interaction.iter().enumerate() {
            match slot.target {
                SlotTarget::Local => theta.values_mut()[layout.interaction_columns(j)[s]] = fit.psi[s],
                SlotTarget::Shared(k) => pooled[k].push((fit.psi[s], fit.psi_variance[s])),
            }
        }
    }
    let psi_start = layout.psi_range().start;
    for (k, vals) in pooled.iter().enumerate() {
        theta.values_mut()[psi_start + k] = combine(vals, strategy)?;
    }
    Ok(theta)
}

/// [`initial_values`] from a fresh unshared fit of `data` (skipped for ZERO).
pub fn starting_point(data: &SmartDataset, spec: &ModelSpec, strategy: InitStrategy) -> Result<ParameterVector> {
    if strategy == InitStrategy::Zero {
        return Ok(ParameterVector::zeros(spec.layout()));
    }
    initial_values(&q_unshared_fit(data, spec, data.coding())?, spec, strategy)
}
