use rand::Rng;
use rand_distr::StandardNormal;

use super::scenario::Scenario;
use crate::error::Result;
use crate::model::{primary_outcome, SmartDataset, Trajectory};
use crate::rng::{root, StreamRng};

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sign(rng: &mut StreamRng, p_plus: f64) -> f64 {
    if rng.random_bool(p_plus) {
        1.0
    } else {
        -1.0
    }
}

/// A trial of `scenario.n` patients drawn from the scenario's own seed.
pub fn generate_smart(scenario: &Scenario) -> Result<SmartDataset> {
    generate_smart_with(scenario, &mut root(scenario.seed))
}

/// A trial of `scenario.n` patients drawn from `rng`. Patients are generated one
/// after another, each consuming only the draws for the stages it reaches.
pub fn generate_smart_with(scenario: &Scenario, rng: &mut StreamRng) -> Result<SmartDataset> {
    scenario.validate()?;
    let g = &scenario.gamma;
    let (d2, d3) = (&scenario.delta2, &scenario.delta3);
    let coding = scenario.coding;
    let sd = scenario.noise_sd;
    let treat = |rng: &mut StreamRng| if rng.random_bool(0.5) { coding.t2() } else { coding.t1() };
    let mut trajectories = Vec::with_capacity(scenario.n);
    for i in 0..scenario.n {
        let noise = |rng: &mut StreamRng| sd * rng.sample::<f64, _>(StandardNormal);
        let o1 = sign(rng, 0.5);
        let a1 = treat(rng);
        let y1 = g[0] + g[1] * o1 + g[2] * a1 + g[3] * o1 * a1 + noise(rng);
        let r1 = rng.random_bool(scenario.response_probs[0]);
        let mut t = Trajectory {
            patient_id: (i + 1).to_string(),
            covariates: vec![vec![o1]],
            treatments: vec![a1],
            responders: vec![r1],
            stage_outcomes: vec![Some(y1)],
            primary_outcome: y1,
        };
        if !r1 {
            let o2 = sign(rng, logistic(d2[0] * o1 + d2[1] * a1));
            let a2 = treat(rng);
            let y2 = y1 + 1.5 * (g[4] * o2 + g[5] * a2 + g[6] * o2 * a2 + g[7] * a1 * a2) + noise(rng);
            let r2 = rng.random_bool(scenario.response_probs[1]);
            t.covariates.push(vec![o2]);
            t.treatments.push(a2);
            t.responders.push(r2);
            t.stage_outcomes.push(Some(y2));
            t.primary_outcome = primary_outcome(y1, y2, 0.0, false, r2)?;
            if !r2 {
                let o3 = sign(rng, logistic(d3[0] * o2 + d3[1] * a2 + d3[2] * a1 * a2));
                let a3 = treat(rng);
                let y3 = y2
                    + 3.0 * (g[8] * o3 + g[9] * a3 + g[10] * o3 * a3 + g[11] * a2 * a3 + g[12] * a1 * a2 * a3)
                    + noise(rng);
                t.covariates.push(vec![o3]);
                t.treatments.push(a3);
                t.stage_outcomes.push(Some(y3));
                t.primary_outcome = primary_outcome(y1, y2, y3, false, false)?;
            }
        }
        trajectories.push(t);
    }
    SmartDataset::new(3, coding, trajectories)
}
