use std::ops::Range;
use std::sync::Arc;

use super::spec::{ModelSpec, SlotTarget};
use crate::error::{Error, Result};

/// Index layout of `theta = (beta_J, ..., beta_1, psi)`.
///
/// Each `beta_j` block holds the main-effect coefficients of stage `j` followed by
/// any stage-local interaction coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    /// `beta[j - 1]` is the range of stage `j`.
    beta: Vec<Range<usize>>,
    psi: Range<usize>,
    names: Vec<String>,
    main_columns: Vec<Vec<usize>>,
    interaction_columns: Vec<Vec<usize>>,
}

impl ParamLayout {
    pub(super) fn from_spec(spec: &ModelSpec) -> Self {
        let j_max = spec.num_stages();
        let mut beta = vec![0..0; j_max];
        let mut main_columns = vec![Vec::new(); j_max];
        let mut interaction_columns = vec![Vec::new(); j_max];
        let mut names = Vec::new();
        for j in (1..=j_max).rev() {
            let st = &spec.stages()[j - 1];
            let start = names.len();
            for f in &st.main {
                main_columns[j - 1].push(names.len());
                names.push(format!("beta{j}[{f}]"));
            }
            for slot in st.interaction.iter().filter(|s| s.target == SlotTarget::Local) {
                names.push(format!("psi{j}[{}]", slot.feature));
            }
            beta[j - 1] = start..names.len();
        }
        let psi_start = names.len();
        names.extend(spec.shared_names().iter().cloned());
        let psi = psi_start..names.len();
        for j in 1..=j_max {
            let mut local = beta[j - 1].start + main_columns[j - 1].len();
            for slot in &spec.stages()[j - 1].interaction {
                let col = match slot.target {
                    SlotTarget::Shared(k) => psi_start + k,
                    SlotTarget::Local => {
                        local += 1;
                        local - 1
                    }
                };
                interaction_columns[j - 1].push(col);
            }
        }
        ParamLayout { beta, psi, names, main_columns, interaction_columns }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_stages(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_range(&self, stage: usize) -> Range<usize> {
        self.beta[stage - 1].clone()
    }

    pub fn psi_range(&self) -> Range<usize> {
        self.psi.clone()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Column of each main-effect feature of `stage`.
    pub fn main_columns(&self, stage: usize) -> &[usize] {
        &self.main_columns[stage - 1]
    }

    /// Column of each interaction slot of `stage` (shared or local).
    pub fn interaction_columns(&self, stage: usize) -> &[usize] {
        &self.interaction_columns[stage - 1]
    }
}

/// Stacked parameter vector tied to its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl ParameterVector {
    pub fn zeros(layout: &Arc<ParamLayout>) -> Self {
        ParameterVector { values: vec![0.0; layout.len()], layout: Arc::clone(layout) }
    }

    pub fn from_values(layout: &Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LayoutMismatch(format!("{} values for {} parameters", values.len(), layout.len())));
        }
        Ok(ParameterVector { values, layout: Arc::clone(layout) })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn psi(&self) -> &[f64] {
        &self.values[self.layout.psi_range()]
    }

    pub fn beta(&self, stage: usize) -> &[f64] {
        &self.values[self.layout.beta_range(stage)]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.layout.names().iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn check_layout(&self, layout: &ParamLayout) -> Result<()> {
        if *self.layout == *layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch("parameter vector was built for a different spec".into()))
        }
    }
}
