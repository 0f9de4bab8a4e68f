use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::generate_smart_with;
use super::matching::{allocation_matching, oracle_policy, MatchingReport};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::estimators::{starting_point, FitConfig, FixedPointSolver, InitStrategy, SharedRegime};
use crate::model::{ModelSpec, ParameterVector, SlotTarget};
use crate::resampling::{default_lambda_grid, CrossValidator};
use crate::rng::{derived_seed, domain, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QShared,
    /// Penalized Q-shared with the penalty chosen by ten-fold CV on each training set.
    Penalized,
    /// The oracle itself, for checking the instrumentation.
    Oracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::QShared => "q_shared",
            Method::Penalized => "penalized",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Method::QShared, Method::Penalized, Method::Oracle].into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            Error::InvalidInput(format!("unknown method `{s}` (expected q_shared, penalized or oracle)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOptions {
    /// Patients in the fresh evaluation cohort of each replication.
    pub eval_size: usize,
    pub cfg: FitConfig,
    pub lambda_grid: Vec<f64>,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions { eval_size: 10_000, cfg: FitConfig::default(), lambda_grid: default_lambda_grid() }
    }
}

/// One cell of the comparison table, averaged over the replications that succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub method: Method,
    pub init: InitStrategy,
    /// `mean(psi0_hat) - psi0_true`.
    pub bias: f64,
    /// Mean weighted matching `M`, in percent.
    pub m: f64,
    /// Mean joint matching `M~`, in percent.
    pub m_tilde: f64,
    pub reps_ok: usize,
    pub failures: usize,
    /// Replications where `M~ > M`.
    pub joint_above_weighted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub reps: usize,
    pub seed: u64,
}

struct Cell {
    psi0: f64,
    report: MatchingReport,
}

/// Column of the intercept contrast `psi0`: the shared slot behind stage 3's constant feature.
fn psi0_column(spec: &ModelSpec) -> Result<usize> {
    let slot = spec.stage(spec.num_stages())?.interaction.first();
    match slot.map(|s| s.target) {
        Some(SlotTarget::Shared(k)) => Ok(spec.layout().psi_range().start + k),
        _ => Err(Error::Spec("final stage has no shared intercept contrast".into())),
    }
}

/// Monte Carlo comparison of methods and starting strategies.
///
/// Replication `r` trains on a fresh `scenario.n`-patient trial and scores on an
/// independent `opts.eval_size` cohort; both come from substreams of `seed`, so the
/// table does not depend on scheduling.
pub fn run_comparison(
    scenario: &Scenario,
    spec: &ModelSpec,
    methods: &[Method],
    inits: &[InitStrategy],
    reps: usize,
    seed: u64,
    opts: &ComparisonOptions,
) -> Result<ComparisonTable> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    if methods.is_empty() || inits.is_empty() {
        return Err(Error::InvalidInput("need at least one method and one init strategy".into()));
    }
    scenario.validate()?;
    opts.cfg.validate()?;
    let oracle = oracle_policy(scenario, spec)?;
    let psi0_col = psi0_column(spec)?;
    let truth = oracle.theta.values()[psi0_col];
    let eval_scenario = Scenario { n: opts.eval_size, ..scenario.clone() };

    let per_rep: Vec<Vec<Result<Cell>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let r = r as u64;
            let cells = methods.len() * inits.len();
            let setup = (|| {
                let train = generate_smart_with(scenario, &mut substream(seed, domain::TRAIN, r))?;
                let eval = generate_smart_with(&eval_scenario, &mut substream(seed, domain::EVAL, r))?;
                Ok::<_, Error>((train, eval))
            })();
            let (train, eval) = match setup {
                Ok(v) => v,
                Err(e) => return (0..cells).map(|_| Err(e.clone())).collect(),
            };
            let solver = FixedPointSolver::new(&train, spec, false);
            let cv = methods
                .contains(&Method::Penalized)
                .then(|| CrossValidator::new(&train, spec, derived_seed(seed, domain::CV_FOLDS, r)));
            let score = |theta: ParameterVector| -> Result<Cell> {
                let psi0 = theta.values()[psi0_col];
                let fitted = SharedRegime { theta, spec: spec.clone(), coding: scenario.coding };
                Ok(Cell { psi0, report: allocation_matching(&fitted, &oracle, &eval)? })
            };
            let mut out = Vec::with_capacity(cells);
            for &method in methods {
                for &init in inits {
                    out.push((|| match method {
                        Method::Oracle => score(oracle.theta.clone()),
                        Method::QShared => {
                            let theta0 = starting_point(&train, spec, init)?;
                            score(solver.as_ref().map_err(Clone::clone)?.run(&theta0, &opts.cfg, 0.0)?.theta_hat)
                        }
                        Method::Penalized => {
                            let cv = cv
                                .as_ref()
                                .expect("built when penalized is requested")
                                .as_ref()
                                .map_err(Clone::clone)?;
                            let lambda = cv.run(init, &opts.lambda_grid, &opts.cfg)?.lambda_hat;
                            let theta0 = starting_point(&train, spec, init)?;
                            score(solver.as_ref().map_err(Clone::clone)?.run(&theta0, &opts.cfg, lambda)?.theta_hat)
                        }
                    })());
                }
            }
            out
        })
        .collect();

    let mut rows = Vec::with_capacity(methods.len() * inits.len());
    for (mi, &method) in methods.iter().enumerate() {
        for (ii, &init) in inits.iter().enumerate() {
            let c = mi * inits.len() + ii;
            let (mut psi0, mut m, mut mt, mut ok, mut above) = (0.0, 0.0, 0.0, 0usize, 0usize);
            for rep in &per_rep {
                if let Ok(cell) = &rep[c] {
                    psi0 += cell.psi0;
                    m += cell.report.weighted;
                    mt += cell.report.joint;
                    ok += 1;
                    above += usize::from(cell.report.joint > cell.report.weighted);
                }
            }
            let mean = |x: f64| if ok == 0 { f64::NAN } else { x / ok as f64 };
            rows.push(ComparisonRow {
                scenario: scenario.name.clone(),
                method,
                init,
                bias: mean(psi0) - truth,
                m: 100.0 * mean(m),
                m_tilde: 100.0 * mean(mt),
                reps_ok: ok,
                failures: reps - ok,
                joint_above_weighted: above,
            });
        }
    }
    Ok(ComparisonTable { rows, reps, seed })
}
