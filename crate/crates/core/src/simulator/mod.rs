//! Three-stage SMART simulation, the oracle regimen and allocation matching.

mod compare;
mod generate;
mod matching;
mod scenario;

pub use compare::{run_comparison, ComparisonOptions, ComparisonRow, ComparisonTable, Method};
pub use generate::{generate_smart, generate_smart_with};
pub use matching::{allocation_matching, oracle_policy, MatchingReport};
pub use scenario::{Scenario, DEFAULT_SEED};
