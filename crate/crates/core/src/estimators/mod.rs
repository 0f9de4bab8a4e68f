//! Least-squares solvers, the Q-shared and penalized Q-shared fixed-point fits, the
//! unshared backward-induction baseline, starting values and decision rules.

mod fit;
mod init;
mod rule;
mod solve;
mod unshared;

pub use fit::{penalized_q_shared_fit, q_shared_fit, FitConfig, FitResult, FitStatus, FixedPointSolver};
pub use init::{combine, initial_values, starting_point, InitStrategy};
pub use rule::{decision_rule, Regime, SharedRegime, StagewiseRegime};
pub use solve::{normal_equation_residual, ols_solve, ridge_solve};
pub use unshared::{q_unshared_fit, StageFit, UnsharedFit};
