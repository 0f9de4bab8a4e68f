use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::model::{ModelSpec, ParameterVector, SmartDataset, StackedDesign, TreatmentCoding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Stop once `||theta_(k+1) - theta_(k)||_2 < epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Ridge weight for the penalized fit; ignored by the plain Q-shared fit.
    pub lambda: f64,
    /// Abort with [`FitStatus::Diverged`] once `||theta_(k)||_2` exceeds this.
    pub divergence_guard: f64,
    /// Scale design columns to unit root-mean-square before the penalized solve.
    pub standardize: bool,
    /// Also compute the hat-matrix infinity norm of the design.
    pub compute_hat_norm: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 1e-6,
            max_iters: 1000,
            lambda: 0.0,
            divergence_guard: 1e8,
            standardize: false,
            compute_hat_norm: false,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(self, lambda: f64) -> Self {
        FitConfig { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.divergence_guard.is_nan() || self.divergence_guard <= 0.0 {
            return Err(Error::InvalidInput("divergence_guard must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxItersExceeded,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParameterVector,
    /// Number of solves performed.
    pub iterations: usize,
    pub status: FitStatus,
    /// `theta_(0), theta_(1), ..., theta_(iterations)`.
    pub trace: Vec<Vec<f64>>,
    pub hat_inf_norm: Option<f64>,
    /// Penalty used (0 for the plain fit).
    pub lambda: f64,
}

/// The fixed-point iteration `theta <- argmin ||Z theta - Y*(theta_prev)||^2 + lambda ||theta||^2`
/// over one dataset. `Z` does not depend on theta, so it is decomposed once and reused
/// for every iteration and every penalty.
#[derive(Debug, Clone)]
pub struct FixedPointSolver {
    design: StackedDesign,
    lsq: LeastSquares,
}

impl FixedPointSolver {
    pub fn new(data: &SmartDataset, spec: &ModelSpec, standardize: bool) -> Result<Self> {
        Ok(Self::from_design(StackedDesign::build(data, spec)?, standardize))
    }

    pub fn from_design(design: StackedDesign, standardize: bool) -> Self {
        let lsq =
            if standardize { LeastSquares::standardized(design.design()) } else { LeastSquares::new(design.design()) };
        FixedPointSolver { design, lsq }
    }

    pub fn design(&self) -> &StackedDesign {
        &self.design
    }

    pub fn rank(&self) -> usize {
        self.lsq.rank()
    }

    pub fn is_full_rank(&self) -> bool {
        self.lsq.is_full_rank()
    }

    pub fn run(&self, theta0: &ParameterVector, cfg: &FitConfig, lambda: f64) -> Result<FitResult> {
        cfg.validate()?;
        theta0.check_layout(self.design.layout())?;
        if theta0.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("starting value is not finite".into()));
        }
        let mut theta = theta0.values().to_vec();
        let mut trace = vec![theta.clone()];
        let mut status = FitStatus::MaxItersExceeded;
        let mut iterations = 0;
        for k in 1..=cfg.max_iters {
            let response = self.design.response_from(&theta);
            let next: Vec<f64> = self.lsq.solve(&response, lambda)?.iter().copied().collect();
            let step = next.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let size = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            theta = next;
            trace.push(theta.clone());
            iterations = k;
            if !size.is_finite() || size > cfg.divergence_guard {
                status = FitStatus::Diverged;
                break;
            }
            if step < cfg.epsilon {
                status = FitStatus::Converged;
                break;
            }
        }
        let hat_inf_norm = if cfg.compute_hat_norm {
            diagnostics::nonexpansion_check(self.design.design()).ok().map(|r| r.inf_op_norm)
        } else {
            None
        };
        Ok(FitResult {
            theta_hat: ParameterVector::from_values(self.design.layout(), theta)?,
            iterations,
            status,
            trace,
            hat_inf_norm,
            lambda,
        })
    }

    /// `max_i |((Z'Z + lambda I) theta - Z' Y*(theta))_i|`; zero at an exact fixed point.
    pub fn fixed_point_residual(&self, theta: &ParameterVector, lambda: f64) -> Result<f64> {
        let y = self.design.response(theta)?;
        let b = nalgebra::DVector::from_column_slice(theta.values());
        Ok(super::normal_equation_residual(self.design.design(), &y, &b, lambda))
    }
}

fn check_coding(data: &SmartDataset, coding: TreatmentCoding) -> Result<()> {
    if data.coding() == coding {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "dataset is coded ({}, {}) but ({}, {}) was requested",
            data.coding().t1(),
            data.coding().t2(),
            coding.t1(),
            coding.t2()
        )))
    }
}

/// Q-shared: iterate `theta_(k+1) = (Z'Z)^{-1} Z' Y*(theta_(k))` from `theta0`.
pub fn q_shared_fit(
    data: &SmartDataset,
    spec: &ModelSpec,
    coding: TreatmentCoding,
    theta0: &ParameterVector,
    cfg: &FitConfig,
) -> Result<FitResult> {
    check_coding(data, coding)?;
    FixedPointSolver::new(data, spec, false)?.run(theta0, cfg, 0.0)
}

/// Penalized Q-shared: each step is a ridge solve with weight `cfg.lambda` on all of
/// theta. With `lambda = 0` the iterates are exactly those of [`q_shared_fit`].
pub fn penalized_q_shared_fit(
    data: &SmartDataset,
    spec: &ModelSpec,
    coding: TreatmentCoding,
    theta0: &ParameterVector,
    cfg: &FitConfig,
) -> Result<FitResult> {
    check_coding(data, coding)?;
    let standardize = cfg.standardize && cfg.lambda > 0.0;
    FixedPointSolver::new(data, spec, standardize)?.run(theta0, cfg, cfg.lambda)
}
