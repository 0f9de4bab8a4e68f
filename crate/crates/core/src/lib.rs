//! Shared-parameter Q-learning for multi-stage (SMART) studies.
//!
//! The estimators fit Q-functions whose treatment-interaction parameters `psi` are
//! shared across stages. Because every stage's pseudo-outcome depends on the
//! next stage's parameters, the stacked least-squares problem is solved by
//! fixed-point iteration ([`estimators::q_shared_fit`]); the ridge-penalized variant
//! ([`estimators::penalized_q_shared_fit`]) stabilizes designs where that iteration
//! wanders. [`diagnostics`] checks the hat-matrix condition under which the plain
//! iteration is guaranteed to behave, [`resampling`] provides the m-out-of-n
//! bootstrap and cross-validated penalty selection, and [`simulator`] generates
//! three-stage trials and scores fitted regimens against the oracle.

pub mod diagnostics;
pub mod error;
pub mod estimators;
mod linalg;
pub mod model;
pub mod resampling;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    assemble_stacked, primary_outcome, pseudo_outcome, stage_features, ModelSpec, ParamLayout, ParameterVector,
    SmartDataset, StackedDesign, StackedSystem, Trajectory, TreatmentCoding,
};
