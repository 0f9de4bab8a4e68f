use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TreatmentCoding;

pub const DEFAULT_SEED: u64 = 20_240_501;

fn default_n() -> usize {
    300
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_noise() -> f64 {
    1.0
}
fn default_probs() -> [f64; 2] {
    [0.38, 0.18]
}

/// Parameters of the three-stage generative model.
///
/// ```text
/// Y1 = g1 + g2 O1 + g3 A1 + g4 O1 A1 + e1
/// Y2 = Y1 + 3/2 (g5 O2 + g6 A2 + g7 O2 A2 + g8 A1 A2) + e2
/// Y3 = Y2 + 3 (g9 O3 + g10 A3 + g11 O3 A3 + g12 A2 A3 + g13 A1 A2 A3) + e3
/// logit P(O2 = 1) = d21 O1 + d22 A1
/// logit P(O3 = 1) = d31 O2 + d32 A2 + d33 A1 A2
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// `g1 .. g13`.
    pub gamma: [f64; 13],
    #[serde(default)]
    pub delta2: [f64; 2],
    #[serde(default)]
    pub delta3: [f64; 3],
    /// `P(R1 = 1)`, `P(R2 = 1)`.
    #[serde(default = "default_probs")]
    pub response_probs: [f64; 2],
    #[serde(default = "TreatmentCoding::symmetric")]
    pub coding: TreatmentCoding,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Scenario {
    /// A three-stage trial with moderate main effects and clearly non-zero contrasts,
    /// under which the plain iteration is well behaved.
    pub fn reference() -> Self {
        Scenario {
            name: "reference".into(),
            gamma: [0.0, 0.5, 0.2, 0.1, 0.5, 0.2, 0.1, 0.1, 0.5, 0.2, 0.1, 0.1, 0.05],
            delta2: [0.1, 0.1],
            delta3: [0.1, 0.1, 0.1],
            response_probs: default_probs(),
            coding: TreatmentCoding::symmetric(),
            noise_sd: 1.0,
            n: 300,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Scenario(what.to_string()));
        let finite = self.gamma.iter().chain(&self.delta2).chain(&self.delta3).all(|v| v.is_finite());
        if !finite {
            return bad("gamma and delta entries must be finite");
        }
        if !self.response_probs.iter().all(|p| (0.0..=1.0).contains(p)) {
            return bad("response_probs must lie in [0, 1]");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and >= 0");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    /// True stage-3 contrast coefficients `(g10, g11, g12, g13)` on `(1, O3, A2, A1 A2)`.
    pub fn true_psi(&self) -> [f64; 4] {
        [self.gamma[9], self.gamma[10], self.gamma[11], self.gamma[12]]
    }
}
