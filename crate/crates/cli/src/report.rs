use std::fmt::Write;

use qshared_core::estimators::{FitResult, FitStatus, InitStrategy, UnsharedFit};
use qshared_core::resampling::{BootstrapSummary, CvResult};
use qshared_core::simulator::ComparisonTable;
use qshared_core::{ModelSpec, SmartDataset};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// `fit.json` for the stacked estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub init: InitStrategy,
    pub lambda: f64,
    /// `none`, `flag` or `cv`.
    pub lambda_source: String,
    pub status: FitStatus,
    pub iterations: usize,
    pub hat_inf_norm: Option<f64>,
    pub n: usize,
    pub stage_sizes: Vec<usize>,
    pub coding: (f64, f64),
    pub params: Vec<NamedValue>,
}

pub(crate) fn status_str(s: FitStatus) -> &'static str {
    match s {
        FitStatus::Converged => "converged",
        FitStatus::MaxItersExceeded => "max_iters_exceeded",
        FitStatus::Diverged => "diverged",
    }
}

impl FitReport {
    pub fn new(method: &str, init: InitStrategy, lambda_source: &str, fit: &FitResult, data: &SmartDataset) -> Self {
        let names = fit.theta_hat.layout().names();
        FitReport {
            method: method.into(),
            init,
            lambda: fit.lambda,
            lambda_source: lambda_source.into(),
            status: fit.status,
            iterations: fit.iterations,
            hat_inf_norm: fit.hat_inf_norm,
            n: data.len(),
            stage_sizes: data.stage_sizes(),
            coding: (data.coding().t1(), data.coding().t2()),
            params: names
                .iter()
                .zip(fit.theta_hat.values())
                .map(|(name, &value)| NamedValue { name: name.clone(), value })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "method: {}\nstatus: {}\niterations: {}\nlambda: {}\n",
            self.method,
            status_str(self.status),
            self.iterations,
            self.lambda
        );
        if let Some(h) = self.hat_inf_norm {
            let _ = writeln!(s, "hat_inf_norm: {h}");
        }
        for p in &self.params {
            let _ = writeln!(s, "{:<24} {:>14.6}", p.name, p.value);
        }
        s.pop();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageParam {
    pub name: String,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub n: usize,
    pub beta: Vec<NamedValue>,
    pub psi: Vec<StageParam>,
}

/// `fit.json` for stagewise Q-learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsharedReport {
    pub method: String,
    pub n: usize,
    pub stage_sizes: Vec<usize>,
    pub coding: (f64, f64),
    pub stages: Vec<StageReport>,
}

impl UnsharedReport {
    pub fn new(fit: &UnsharedFit, spec: &ModelSpec, data: &SmartDataset) -> Self {
        let stages = fit
            .stages
            .iter()
            .zip(spec.stages())
            .map(|(f, st)| StageReport {
                stage: f.stage,
                n: f.n,
                beta: st
                    .main
                    .iter()
                    .zip(&f.beta)
                    .map(|(feat, &value)| NamedValue { name: format!("beta{}[{feat}]", f.stage), value })
                    .collect(),
                psi: st
                    .interaction
                    .iter()
                    .zip(f.psi.iter().zip(&f.psi_variance))
                    .map(|(slot, (&value, &variance))| StageParam {
                        name: format!("psi{}[{}]", f.stage, slot.feature),
                        value,
                        variance,
                    })
                    .collect(),
            })
            .collect();
        UnsharedReport {
            method: "unshared".into(),
            n: data.len(),
            stage_sizes: data.stage_sizes(),
            coding: (data.coding().t1(), data.coding().t2()),
            stages,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("method: unshared");
        for st in &self.stages {
            let _ = write!(s, "\nstage {} (n = {})", st.stage, st.n);
            for p in &st.psi {
                let _ = write!(s, "\n{:<24} {:>14.6}  var {:.6}", p.name, p.value, p.variance);
            }
        }
        s
    }
}

/// Long-format trace: `iter,param_name,value`, iteration 0 being the start.
pub fn trace_csv(fit: &FitResult) -> String {
    let names = fit.theta_hat.layout().names();
    let mut s = String::from("iter,param_name,value\n");
    for (k, theta) in fit.trace.iter().enumerate() {
        for (name, v) in names.iter().zip(theta) {
            let _ = writeln!(s, "{k},{name},{v}");
        }
    }
    s
}

pub fn bootstrap_csv(summary: &BootstrapSummary) -> String {
    let mut s = String::from("Parameter,Estimate,Variance,CI_low,CI_high\n");
    for p in &summary.params {
        let _ = writeln!(s, "{},{},{},{},{}", p.name, p.point_estimate, p.variance, p.ci_low, p.ci_high);
    }
    s
}

pub fn cv_csv(cv: &CvResult) -> String {
    let mut s = String::from("lambda,cv_error\n");
    for (l, e) in cv.lambda_grid.iter().zip(&cv.cv_error) {
        let _ = writeln!(s, "{l},{}", e.map(|e| e.to_string()).unwrap_or_default());
    }
    s
}

pub fn compare_csv(tables: &[ComparisonTable]) -> String {
    let mut s = String::from("scenario,method,init,bias,M,M_tilde,reps_ok,failures\n");
    for row in tables.iter().flat_map(|t| &t.rows) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            row.scenario, row.method, row.init, row.bias, row.m, row.m_tilde, row.reps_ok, row.failures
        );
    }
    s
}
