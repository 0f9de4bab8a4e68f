//! Feature expressions: products of history variables.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! feature := factor ('*' factor)*
//! factor  := '1' | 'A' stage | 'O' stage | name '_' stage
//! ```
//!
//! `O<k>` is the first covariate measured before stage `k`; `name_<k>` picks a
//! covariate declared by name in the spec (`covariates = [...]`). A feature that is
//! only `1` is the constant.

use std::fmt;

use super::dataset::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    Covariate { stage: usize, index: usize },
    Treatment { stage: usize },
}

#[derive(Debug, Clone)]
pub struct Feature {
    source: String,
    /// Sorted, so that equal products compare equal regardless of spelling.
    factors: Vec<Factor>,
}

impl PartialEq for Feature {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn stage_number(digits: &str, src: &str) -> Result<usize> {
    match digits.parse::<usize>() {
        Ok(k) if k >= 1 && !digits.starts_with('+') => Ok(k),
        _ => Err(Error::Spec(format!("bad stage number `{digits}` in feature `{src}`"))),
    }
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

impl Feature {
    pub fn constant() -> Self {
        Feature { source: "1".into(), factors: Vec::new() }
    }

    pub fn from_factors(mut factors: Vec<Factor>) -> Self {
        factors.sort();
        let source = if factors.is_empty() {
            "1".to_string()
        } else {
            factors
                .iter()
                .map(|f| match *f {
                    Factor::Treatment { stage } => format!("A{stage}"),
                    Factor::Covariate { stage, index: 0 } => format!("O{stage}"),
                    Factor::Covariate { stage, index } => format!("O{stage}#{index}"),
                })
                .collect::<Vec<_>>()
                .join("*")
        };
        Feature { source, factors }
    }

    pub fn parse(src: &str, covariate_names: &[String]) -> Result<Self> {
        let source: String = src.split_whitespace().collect();
        if source.is_empty() {
            return Err(Error::Spec("empty feature expression".into()));
        }
        let mut factors = Vec::new();
        for token in source.split('*') {
            if token.is_empty() {
                return Err(Error::Spec(format!("dangling `*` in feature `{src}`")));
            }
            if token == "1" {
                continue;
            }
            if let Some(rest) = token.strip_prefix('A').filter(|r| all_digits(r)) {
                factors.push(Factor::Treatment { stage: stage_number(rest, src)? });
            } else if let Some(rest) = token.strip_prefix('O').filter(|r| all_digits(r)) {
                factors.push(Factor::Covariate { stage: stage_number(rest, src)?, index: 0 });
            } else if let Some((name, digits)) = token.rsplit_once('_').filter(|(_, d)| all_digits(d)) {
                let index = covariate_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Spec(format!("unknown covariate `{name}` in feature `{src}`")))?;
                factors.push(Factor::Covariate { stage: stage_number(digits, src)?, index });
            } else {
                return Err(Error::Spec(format!("cannot parse factor `{token}` in feature `{src}`")));
            }
        }
        factors.sort();
        Ok(Feature { source, factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    /// Whether the feature is a function of `H_j = (O_1, A_1, ..., O_j)`.
    pub fn uses_only_history(&self, stage: usize) -> bool {
        self.factors.iter().all(|f| match *f {
            Factor::Covariate { stage: k, .. } => k <= stage,
            Factor::Treatment { stage: k } => k < stage,
        })
    }

    /// Value on a trajectory; `None` when a referenced entry is missing.
    pub fn eval(&self, traj: &Trajectory) -> Option<f64> {
        self.factors.iter().try_fold(1.0, |acc, f| {
            let v = match *f {
                Factor::Covariate { stage, index } => traj.covariate(stage, index)?,
                Factor::Treatment { stage } => traj.treatment(stage)?,
            };
            Some(acc * v)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["start_qids".into(), "slope_qids".into(), "side_effect".into()]
    }

    #[test]
    fn parses_products_in_any_order() {
        let a = Feature::parse("A1 * A2", &[]).unwrap();
        let b = Feature::parse("A2*A1", &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "A1*A2");
        assert!(Feature::parse("1", &[]).unwrap().is_constant());
        assert_eq!(Feature::parse("1*O3", &[]).unwrap(), Feature::parse("O3", &[]).unwrap());
    }

    #[test]
    fn named_covariates() {
        let f = Feature::parse("slope_qids_2", &names()).unwrap();
        assert_eq!(f.factors(), &[Factor::Covariate { stage: 2, index: 1 }]);
        assert!(Feature::parse("weight_2", &names()).is_err());
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "A", "O0", "A1**A2", "B1", "2", "A-1", "é"] {
            assert!(Feature::parse(bad, &[]).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn history_scope() {
        let f = Feature::parse("O3*A2", &[]).unwrap();
        assert!(f.uses_only_history(3));
        assert!(!f.uses_only_history(2));
        assert!(!Feature::parse("A3", &[]).unwrap().uses_only_history(3));
    }

    #[test]
    fn evaluates_on_trajectory() {
        let t = Trajectory {
            patient_id: "x".into(),
            covariates: vec![vec![-1.0], vec![1.0]],
            treatments: vec![0.5, -1.0],
            responders: vec![false, false],
            stage_outcomes: vec![None, None],
            primary_outcome: 0.0,
        };
        assert_eq!(Feature::parse("O1*A1*A2", &[]).unwrap().eval(&t), Some(0.5));
        assert_eq!(Feature::parse("O3", &[]).unwrap().eval(&t), None);
    }
}
