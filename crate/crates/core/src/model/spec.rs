use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::expr::Feature;
use super::params::ParamLayout;
use crate::error::{Error, Result};

/// Where an interaction coefficient lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotTarget {
    /// Index into the shared block `psi`.
    Shared(usize),
    /// Stage-local coefficient, stored at the end of that stage's `beta` block.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSlot {
    pub feature: Feature,
    pub target: SlotTarget,
}

/// `Q_j = beta_j' H_j0 + (psi_j' H_j1) A_j` for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub main: Vec<Feature>,
    pub interaction: Vec<InteractionSlot>,
}

/// Declarative Q-function model for a `J`-stage study.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    num_stages: usize,
    covariate_names: Vec<String>,
    shared: Vec<String>,
    stages: Vec<StageSpec>,
    layout: Arc<ParamLayout>,
}

impl PartialEq for ModelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.num_stages == other.num_stages
            && self.covariate_names == other.covariate_names
            && self.shared == other.shared
            && self.stages == other.stages
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    num_stages: usize,
    #[serde(default)]
    covariates: Vec<String>,
    #[serde(default)]
    shared: Vec<String>,
    stages: Vec<RawStage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    stage: Option<usize>,
    #[serde(default)]
    main: Vec<String>,
    #[serde(default)]
    interaction: Vec<RawSlot>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    feature: String,
    shared: Option<String>,
}

/// Q-functions of the three-stage simulation design: `psi0`, `psi1` shared by all
/// stages, `psi2` by stages 2 and 3, `psi3` used at stage 3.
pub const SMART3_SPEC: &str = r#"
num_stages = 3
shared = ["psi0", "psi1", "psi2", "psi3"]

[[stages]]
stage = 1
main = ["1", "O1"]
interaction = [
    { feature = "1", shared = "psi0" },
    { feature = "O1", shared = "psi1" },
]

[[stages]]
stage = 2
main = ["1", "O1", "A1", "O1*A1", "O2"]
interaction = [
    { feature = "1", shared = "psi0" },
    { feature = "O2", shared = "psi1" },
    { feature = "A1", shared = "psi2" },
]

[[stages]]
stage = 3
main = ["1", "O1", "A1", "O1*A1", "O2", "A2", "O2*A2", "A1*A2", "O3"]
interaction = [
    { feature = "1", shared = "psi0" },
    { feature = "O3", shared = "psi1" },
    { feature = "A2", shared = "psi2" },
    { feature = "A1*A2", shared = "psi3" },
]
"#;

impl ModelSpec {
    pub fn new(
        num_stages: usize,
        covariate_names: Vec<String>,
        shared: Vec<String>,
        stages: Vec<StageSpec>,
    ) -> Result<Self> {
        if num_stages == 0 {
            return Err(Error::Spec("num_stages must be positive".into()));
        }
        if stages.len() != num_stages {
            return Err(Error::Spec(format!("{} stage blocks for num_stages = {num_stages}", stages.len())));
        }
        for (i, name) in shared.iter().enumerate() {
            if shared[..i].contains(name) {
                return Err(Error::Spec(format!("shared parameter `{name}` declared twice")));
            }
        }
        let mut uses = vec![0usize; shared.len()];
        for (j, st) in stages.iter().enumerate().map(|(i, s)| (i + 1, s)) {
            let all = st.main.iter().chain(st.interaction.iter().map(|s| &s.feature));
            if let Some(f) = all.clone().find(|f| !f.uses_only_history(j)) {
                return Err(Error::Spec(format!("stage {j} feature `{f}` looks beyond the stage-{j} history")));
            }
            let mut seen = vec![false; shared.len()];
            for slot in &st.interaction {
                if let SlotTarget::Shared(k) = slot.target {
                    if k >= shared.len() {
                        return Err(Error::Spec(format!("stage {j}: shared index {k} out of range")));
                    }
                    if std::mem::replace(&mut seen[k], true) {
                        return Err(Error::Spec(format!("stage {j} uses `{}` twice", shared[k])));
                    }
                    uses[k] += 1;
                }
            }
        }
        if let Some(k) = uses.iter().position(|&u| u == 0) {
            return Err(Error::Spec(format!("shared parameter `{}` is not used by any stage", shared[k])));
        }
        let mut spec =
            ModelSpec { num_stages, covariate_names, shared, stages, layout: Arc::new(ParamLayout::default()) };
        spec.layout = Arc::new(ParamLayout::from_spec(&spec));
        Ok(spec)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        let mut stages = Vec::with_capacity(raw.stages.len());
        for (i, rs) in raw.stages.into_iter().enumerate() {
            if let Some(s) = rs.stage.filter(|&s| s != i + 1) {
                return Err(Error::Spec(format!(
                    "stage blocks must be listed in order; block {} says stage {s}",
                    i + 1
                )));
            }
            let main = rs.main.iter().map(|m| Feature::parse(m, &raw.covariates)).collect::<Result<Vec<_>>>()?;
            let interaction = rs
                .interaction
                .iter()
                .map(|slot| {
                    let feature = Feature::parse(&slot.feature, &raw.covariates)?;
                    let target = match &slot.shared {
                        None => SlotTarget::Local,
                        Some(name) => SlotTarget::Shared(
                            raw.shared
                                .iter()
                                .position(|s| s == name)
                                .ok_or_else(|| Error::Spec(format!("undeclared shared parameter `{name}`")))?,
                        ),
                    };
                    Ok(InteractionSlot { feature, target })
                })
                .collect::<Result<Vec<_>>>()?;
            stages.push(StageSpec { main, interaction });
        }
        ModelSpec::new(raw.num_stages, raw.covariates, raw.shared, stages)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The three-stage simulation model ([`SMART3_SPEC`]).
    pub fn smart3() -> Self {
        Self::from_toml_str(SMART3_SPEC).expect("built-in spec parses")
    }

    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn shared_names(&self) -> &[String] {
        &self.shared
    }

    /// Stage `j` (1-based).
    pub fn stage(&self, j: usize) -> Result<&StageSpec> {
        j.checked_sub(1)
            .and_then(|i| self.stages.get(i))
            .ok_or(Error::StageOutOfRange { stage: j, num_stages: self.num_stages })
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }
}
