//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use qshared_core::diagnostics::{hat_matrix, inf_operator_norm};
use qshared_core::estimators::{penalized_q_shared_fit, q_shared_fit, starting_point, FitConfig, InitStrategy, Regime};
use qshared_core::resampling::{choose_m, default_lambda_grid, m_out_of_n_bootstrap, select_lambda, Estimate};
use qshared_core::rng::root;
use qshared_core::simulator::{
    allocation_matching, generate_smart, oracle_policy, run_comparison, ComparisonOptions, Method, Scenario,
    DEFAULT_SEED,
};
use qshared_core::{primary_outcome, ModelSpec, SmartDataset, StackedDesign, Trajectory, TreatmentCoding};

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_data() -> SmartDataset {
    generate_smart(&Scenario::reference()).unwrap()
}

/// Narrow treatment coding `{-0.1, 0.1}`.
fn narrow(data: &SmartDataset) -> SmartDataset {
    data.recode_treatments(TreatmentCoding::new(-0.1, 0.1).unwrap())
}

/// Near-tied treatments `{0.250, 0.248}` with covariates `{-0.01, 0.01}`.
fn near_tied(data: &SmartDataset) -> SmartDataset {
    data.recode_treatments(TreatmentCoding::new(0.250, 0.248).unwrap())
        .recode_covariates((-1.0, 1.0), (-0.01, 0.01))
        .unwrap()
}

fn c1_primary_outcome() -> Outcome {
    // (Y1, Y2, Y3, R1, R2) and the printed Y_primary of each row.
    let rows = [
        (1.5448, 2.857, 2.230, true, true, 1.544),
        (-0.4734, -0.688, -0.724, false, true, -0.580),
        (0.4853, -0.327, -0.741, true, true, 0.485),
        (-0.4224, 0.547, -0.377, false, false, -0.084),
    ];
    let mut errs = Vec::new();
    for (y1, y2, y3, r1, r2, printed) in rows {
        errs.push((primary_outcome(y1, y2, y3, r1, r2).unwrap() - printed).abs());
    }
    let failing: Vec<usize> = errs.iter().enumerate().filter(|(_, &e)| e > 5e-4).map(|(i, _)| i + 1).collect();
    outcome(failing.is_empty(), format!("abs errors [{}] vs tol 5e-4; rows outside tolerance: {failing:?}", sci(&errs)))
}

fn c2_reduction() -> Outcome {
    let data = reference_data();
    let spec = ModelSpec::smart3();
    let theta0 = starting_point(&data, &spec, InitStrategy::Zero).unwrap();
    let cfg = FitConfig::default();
    let q = q_shared_fit(&data, &spec, data.coding(), &theta0, &cfg).unwrap();
    let p = penalized_q_shared_fit(&data, &spec, data.coding(), &theta0, &cfg.with_lambda(0.0)).unwrap();
    let diff =
        q.trace.iter().zip(&p.trace).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
    let same_len = q.trace.len() == p.trace.len();
    outcome(
        same_len && diff <= 1e-10,
        format!("{} vs {} iterates, max abs difference {diff:.1e}", q.trace.len(), p.trace.len()),
    )
}

fn c3_hat_properties() -> Outcome {
    let mut rng = root(3);
    let (mut sym, mut idem, mut tr) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(5..60);
        let p = rng.random_range(1..=n.min(8));
        let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = hat_matrix(&z).unwrap();
        sym = sym.max((&h - h.transpose()).abs().max());
        idem = idem.max((&h * &h - &h).abs().max());
        tr = tr.max((h.trace() - p as f64).abs());
    }
    let n = 37;
    let h = hat_matrix(&DMatrix::from_element(n, 1, 1.0)).unwrap();
    let ones = h.iter().map(|v| (v - 1.0 / n as f64).abs()).fold(0.0, f64::max);
    outcome(
        sym <= 1e-8 && idem <= 1e-8 && tr <= 1e-8 && ones <= 1e-12,
        format!("symmetry {sym:.1e}, idempotency {idem:.1e}, trace-rank {tr:.1e}, ones column {ones:.1e}"),
    )
}

fn c4_nonexpansion() -> Outcome {
    let data = reference_data();
    let spec = ModelSpec::smart3();
    let norm = |d: &SmartDataset| {
        let z = StackedDesign::build(d, &spec).unwrap();
        inf_operator_norm(&hat_matrix(z.design()).unwrap()).unwrap()
    };
    let (n1, n2) = (norm(&narrow(&data)), norm(&near_tied(&data)));
    outcome(n1 > 2.0 && n2 > 2.0, format!("narrow coding {n1:.3}, near-tied coding {n2:.3} (need > 1, expect > 2)"))
}

fn c5_pathology() -> Outcome {
    let data = near_tied(&reference_data());
    let spec = ModelSpec::smart3();
    let cfg = FitConfig::default();
    let m = choose_m(data.len(), 0.8).unwrap();
    let cv = select_lambda(&data, &spec, data.coding(), InitStrategy::Zero, &default_lambda_grid(), DEFAULT_SEED, &cfg)
        .unwrap();
    let boot = |lambda: f64| {
        let fit = |d: &SmartDataset| {
            let theta0 = starting_point(d, &spec, InitStrategy::Zero)?;
            Ok(Estimate::shared(&penalized_q_shared_fit(d, &spec, d.coding(), &theta0, &cfg.with_lambda(lambda))?))
        };
        m_out_of_n_bootstrap(&data, spec.shared_names(), fit, m, 200, DEFAULT_SEED).unwrap()
    };
    let (q, p) = (boot(0.0), boot(cv.lambda_hat));
    let ratios: Vec<f64> = q.params.iter().zip(&p.params).map(|(a, b)| a.variance / b.variance).collect();
    let big = ratios.iter().filter(|&&r| r >= 100.0).count();
    outcome(
        big >= 2,
        format!("m = {m}, lambda = {:.3e}, variance ratios [{}]; {big} of 4 >= 100", cv.lambda_hat, sci(&ratios)),
    )
}

fn c6_convergence() -> Outcome {
    let data = reference_data();
    let spec = ModelSpec::smart3();
    let theta0 = starting_point(&data, &spec, InitStrategy::Zero).unwrap();
    let fit = q_shared_fit(&data, &spec, data.coding(), &theta0, &FitConfig::default()).unwrap();
    outcome(
        fit.status == qshared_core::estimators::FitStatus::Converged && fit.iterations <= 50,
        format!("{:?} after {} iterations", fit.status, fit.iterations),
    )
}

fn patient(id: usize, stages: usize) -> Trajectory {
    Trajectory {
        patient_id: id.to_string(),
        covariates: vec![vec![1.0]; stages],
        treatments: vec![1.0; stages],
        responders: (1..=stages.min(2)).map(|j| j == stages).collect(),
        stage_outcomes: vec![Some(0.0); stages],
        primary_outcome: 0.0,
    }
}

fn c7_matching() -> Outcome {
    let scenario = Scenario { n: 2000, ..Scenario::reference() };
    let oracle = oracle_policy(&scenario, &ModelSpec::smart3()).unwrap();
    let same = allocation_matching(&oracle, &oracle, &generate_smart(&scenario).unwrap()).unwrap();

    // Patients 1-5 reach three stages and 6-10 one stage: 20 decisions.
    // Four decisions differ, each for a different patient.
    let data = SmartDataset::new(
        3,
        TreatmentCoding::symmetric(),
        (1..=10).map(|i| patient(i, if i <= 5 { 3 } else { 1 })).collect(),
    )
    .unwrap();
    let flipped = [("1", 1), ("2", 2), ("3", 3), ("6", 1)];
    let base = |_: &Trajectory, _: usize| Ok(1.0);
    let fitted = |t: &Trajectory, j: usize| Ok(if flipped.contains(&(t.patient_id.as_str(), j)) { -1.0 } else { 1.0 });
    let crafted = allocation_matching(&fitted as &dyn Regime, &base as &dyn Regime, &data).unwrap();
    let pass = same.weighted == 1.0 && same.joint == 1.0 && crafted.weighted == 0.8 && crafted.joint == 0.6;
    outcome(
        pass,
        format!(
            "oracle vs itself M = {}, M~ = {}; crafted M = {}, M~ = {}",
            same.weighted, same.joint, crafted.weighted, crafted.joint
        ),
    )
}

fn c8_comparison() -> Outcome {
    let spec = ModelSpec::smart3();
    let opts = ComparisonOptions::default();
    let mut wins = 0;
    let mut spread = 0.0f64;
    let mut cells = Vec::new();
    for k in 1..=7 {
        let path = format!("{}/../../scenarios/example-{k}.toml", env!("CARGO_MANIFEST_DIR"));
        let scenario = Scenario::from_path(path).unwrap();
        let table = run_comparison(
            &scenario,
            &spec,
            &[Method::QShared, Method::Penalized],
            &InitStrategy::ALL,
            200,
            DEFAULT_SEED,
            &opts,
        )
        .unwrap();
        let ms = |method: Method| table.rows.iter().filter(|r| r.method == method).map(|r| r.m).collect::<Vec<_>>();
        let (q, p) = (ms(Method::QShared), ms(Method::Penalized));
        for v in [&q, &p] {
            let hi = v.iter().copied().fold(f64::MIN, f64::max);
            let lo = v.iter().copied().fold(f64::MAX, f64::min);
            spread = spread.max(hi - lo);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (qm, pm) = (mean(&q), mean(&p));
        wins += usize::from(pm >= qm);
        cells.push(format!("ex{k} {qm:.2}->{pm:.2}"));
    }
    outcome(
        wins >= 4 && spread < 2.0,
        format!("penalized M >= Q-shared M in {wins} of 7 [{}]; max init spread {spread:.3}", cells.join(", ")),
    )
}

fn c9_cv() -> Outcome {
    let spec = ModelSpec::from_toml_str(
        r#"
        num_stages = 1
        shared = ["psi0", "psi1"]
        [[stages]]
        main = ["1", "O1"]
        interaction = [{ feature = "1", shared = "psi0" }, { feature = "O1", shared = "psi1" }]
        "#,
    )
    .unwrap();
    let mut rng = root(9);
    let trajectories = (0..120)
        .map(|i| {
            let o: f64 = rng.sample(StandardNormal);
            let a = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let y = 1.0 + 0.5 * o + (0.3 - 0.2 * o) * a;
            Trajectory {
                patient_id: i.to_string(),
                covariates: vec![vec![o]],
                treatments: vec![a],
                responders: vec![],
                stage_outcomes: vec![Some(y)],
                primary_outcome: y,
            }
        })
        .collect();
    let data = SmartDataset::new(1, TreatmentCoding::symmetric(), trajectories).unwrap();
    let grid = default_lambda_grid();
    let cv = select_lambda(&data, &spec, data.coding(), InitStrategy::Zero, &grid, 5, &FitConfig::default()).unwrap();
    let argmin = cv
        .cv_error
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (i, e)))
        .fold(None, |best: Option<(usize, f64)>, (i, e)| match best {
            Some((_, b)) if b <= e => best,
            _ => Some((i, e)),
        })
        .map(|(i, _)| grid[i]);
    outcome(
        argmin == Some(cv.lambda_hat) && cv.lambda_hat == grid[0],
        format!("lambda_hat {:e}, grid argmin {argmin:?}, smallest grid point {:e}", cv.lambda_hat, grid[0]),
    )
}

fn c10_determinism() -> Outcome {
    let data = reference_data();
    let spec = ModelSpec::smart3();
    let cfg = FitConfig::default();
    let boot = || {
        let fit = |d: &SmartDataset| {
            let theta0 = starting_point(d, &spec, InitStrategy::Sa)?;
            Ok(Estimate::shared(&q_shared_fit(d, &spec, d.coding(), &theta0, &cfg)?))
        };
        m_out_of_n_bootstrap(&data, spec.shared_names(), fit, 96, 64, 11).unwrap()
    };
    let scenario = Scenario { n: 200, ..Scenario::reference() };
    let opts = ComparisonOptions { eval_size: 1000, ..ComparisonOptions::default() };
    let compare = || {
        run_comparison(&scenario, &spec, &[Method::QShared, Method::Penalized], &[InitStrategy::Ivwa], 4, 12, &opts)
            .unwrap()
    };
    let pool = |threads: usize| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let (b1, c1) = pool(1).install(|| (boot(), compare()));
    let (b4, c4) = pool(4).install(|| (boot(), compare()));
    let (b4b, c4b) = pool(4).install(|| (boot(), compare()));
    let data_again = generate_smart(&Scenario::reference()).unwrap() == data;
    let pass = data_again
        && format!("{b1:?}") == format!("{b4:?}")
        && format!("{b4:?}") == format!("{b4b:?}")
        && format!("{c1:?}") == format!("{c4:?}")
        && format!("{c4:?}") == format!("{c4b:?}");
    outcome(pass, "simulation, bootstrap and comparison identical across reruns and 1 vs 4 threads".into())
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("primary outcome on the worked rows", c1_primary_outcome),
        ("penalized at lambda = 0 reduces to Q-shared", c2_reduction),
        ("hat-matrix properties", c3_hat_properties),
        ("non-expansion diagnostic direction", c4_nonexpansion),
        ("bootstrap variance pathology", c5_pathology),
        ("well-behaved convergence", c6_convergence),
        ("allocation-matching identities", c7_matching),
        ("seven-scenario comparison direction", c8_comparison),
        ("CV coherence", c9_cv),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {}: {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
