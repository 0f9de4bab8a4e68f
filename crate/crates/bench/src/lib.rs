//! Fixtures shared by the benchmarks.

use qshared_core::simulator::{generate_smart, Scenario};
use qshared_core::SmartDataset;

/// A seeded three-stage trial from the reference scenario.
pub fn reference_trial(n: usize, seed: u64) -> SmartDataset {
    let mut scenario = Scenario::reference();
    scenario.n = n;
    scenario.seed = seed;
    generate_smart(&scenario).expect("reference scenario is valid")
}
