//! m-out-of-n bootstrap and cross-validated penalty selection.

mod bootstrap;
mod cv;

pub use bootstrap::{choose_m, m_out_of_n_bootstrap, BootstrapSummary, Estimate, ParamSummary, StatusCounts};
pub use cv::{default_lambda_grid, fold_assignment, select_lambda, CrossValidator, CvResult, NUM_FOLDS};
