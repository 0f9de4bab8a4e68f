//! Command-line front end: dataset ingestion, subcommand dispatch and report files.

mod csvio;
mod error;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qshared_core::estimators::{
    q_unshared_fit, starting_point, FitConfig, FitResult, FitStatus, FixedPointSolver, InitStrategy,
};
use qshared_core::model::Factor;
use qshared_core::resampling::{choose_m, default_lambda_grid, m_out_of_n_bootstrap, select_lambda, Estimate};
use qshared_core::simulator::{run_comparison, ComparisonOptions, Method, Scenario, DEFAULT_SEED};
use qshared_core::{diagnostics, ModelSpec, SmartDataset, StackedDesign, TreatmentCoding};

pub use csvio::{ingest_csv, read_csv, write_csv, IngestOptions, ResponderPolicy};
pub use error::{CliError, EXIT_GATE, EXIT_IO, EXIT_NUMERICAL, EXIT_VALIDATION};
pub use report::{FitReport, NamedValue, StageReport, UnsharedReport};

#[derive(Debug, Parser)]
#[command(name = "qshared", version, about = "Shared-parameter Q-learning for SMART data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a three-stage trial from a scenario file and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model to a dataset.
    Fit(FitArgs),
    /// Check the hat-matrix non-expansion condition; exits 4 when it fails.
    Diagnose(DiagnoseArgs),
    /// m-out-of-n bootstrap of the fitted interaction parameters.
    Bootstrap(BootstrapArgs),
    /// Ten-fold cross-validation curve of the penalized fit.
    Cv(CvArgs),
    /// Monte Carlo comparison of methods against the oracle regimen.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    #[value(name = "q_shared")]
    QShared,
    Penalized,
    Unshared,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Model spec TOML [default: built-in three-stage model].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Treatment coding `t1,t2` [default: the two treatment values in the data, smaller first].
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub coding: Option<(f64, f64)>,
    /// Responder rows with later-stage cells.
    #[arg(long, value_enum, default_value_t = ResponderPolicy::Reject)]
    pub responders: ResponderPolicy,
    /// Relabel treatments to `t1,t2` after loading.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub recode_treatments: Option<(f64, f64)>,
    /// Relabel binary covariates from -1,1 to `a,b` after loading.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub recode_covariates: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Convergence tolerance on the step norm.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Declare divergence once the parameter norm exceeds this.
    #[arg(long, default_value_t = 1e8)]
    pub divergence_guard: f64,
    /// Scale design columns before penalized solves.
    #[arg(long, default_value_t = false)]
    pub standardize: bool,
    /// Starting values.
    #[arg(long, value_parser = parse_init, default_value = "zero")]
    pub init: InitStrategy,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            divergence_guard: self.divergence_guard,
            standardize: self.standardize,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario TOML.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Patients [default: the scenario's n].
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed [default: the scenario's seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; receives `simulated.csv`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Estimator.
    #[arg(long, value_enum, default_value = "q_shared")]
    pub method: FitMethod,
    /// Ridge penalty for `penalized` [default: chosen by ten-fold CV].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed for the CV folds.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Also write the iteration trace to `trace.csv`.
    #[arg(long, default_value_t = false)]
    pub trace: bool,
    /// Report the hat-matrix infinity norm of the design.
    #[arg(long, default_value_t = false)]
    pub hat_norm: bool,
    /// Output directory; receives `fit.json`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory; receives `diagnose.json`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Estimator.
    #[arg(long, value_enum, default_value = "q_shared")]
    pub method: FitMethod,
    /// Ridge penalty for `penalized` [default: chosen once by ten-fold CV on the full data].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    /// Resample size exponent: m = ceil(n^exponent).
    #[arg(long, default_value_t = 0.8)]
    pub m_exponent: f64,
    /// Resample size, overriding --m-exponent.
    #[arg(long)]
    pub m: Option<usize>,
    /// Seed for resampling and CV.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory; receives `bootstrap.json` and `bootstrap.csv`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated penalties [default: 25 log-spaced values over 1e-4..1e2].
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Seed for the fold split.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory; receives `cv.csv` and `cv.json`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario TOML files.
    #[arg(long, required = true, num_args = 1..)]
    pub scenario: Vec<PathBuf>,
    /// Model spec TOML [default: built-in three-stage model].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Methods to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "q_shared,penalized")]
    pub methods: Vec<Method>,
    /// Starting strategies.
    #[arg(long, value_delimiter = ',', value_parser = parse_init, default_value = "sa,ivwa,max,min,zero")]
    pub inits: Vec<InitStrategy>,
    /// Monte Carlo replications per scenario.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Patients in each evaluation cohort.
    #[arg(long, default_value_t = 10_000)]
    pub eval_size: usize,
    /// Convergence tolerance on the step norm.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Seed for training sets, evaluation cohorts and CV folds.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory; receives `compare.csv` and `compare.json`.
    #[arg(long, default_value = "qshared-out")]
    pub out_dir: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_init(s: &str) -> Result<InitStrategy, String> {
    s.parse::<InitStrategy>().map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s.into_bytes()
}

/// The built-in three-stage model, or the spec at `path`.
pub fn load_spec(path: Option<&Path>) -> Result<ModelSpec, CliError> {
    match path {
        None => Ok(ModelSpec::smart3()),
        Some(p) => Ok(ModelSpec::from_toml_str(&read_text(p)?)?),
    }
}

/// A scenario file; an unnamed scenario takes the file stem as its name.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let mut s = Scenario::from_toml_str(&read_text(path)?)?;
    if s.name.is_empty() {
        s.name = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(s)
}

fn load_data(args: &DataArgs) -> Result<(SmartDataset, ModelSpec), CliError> {
    let spec = load_spec(args.spec.as_deref())?;
    let coding = args.coding.map(|(a, b)| TreatmentCoding::new(a, b)).transpose()?;
    let opts = IngestOptions {
        covariates: spec.covariate_names().to_vec(),
        coding,
        responders: args.responders,
        optional: unused_covariates(&spec),
    };
    let mut data = ingest_csv(&args.data, &opts)?;
    if data.num_stages() != spec.num_stages() {
        return Err(CliError::Invalid(format!(
            "dataset has {} stages, spec has {}",
            data.num_stages(),
            spec.num_stages()
        )));
    }
    if let Some((a, b)) = args.recode_treatments {
        data = data.recode_treatments(TreatmentCoding::new(a, b)?);
    }
    if let Some(to) = args.recode_covariates {
        data = data.recode_covariates((-1.0, 1.0), to)?;
    }
    Ok((data, spec))
}

/// Covariate columns `(stage, index)` that no feature of `spec` reads.
pub fn unused_covariates(spec: &ModelSpec) -> Vec<(usize, usize)> {
    let used: Vec<Factor> = spec
        .stages()
        .iter()
        .flat_map(|st| st.main.iter().chain(st.interaction.iter().map(|s| &s.feature)))
        .flat_map(|f| f.factors().iter().copied())
        .collect();
    let n_cov = spec.covariate_names().len().max(1);
    (1..=spec.num_stages())
        .flat_map(|j| (0..n_cov).map(move |k| (j, k)))
        .filter(|&(stage, index)| !used.contains(&Factor::Covariate { stage, index }))
        .collect()
}

fn check_lambda(lambda: f64) -> Result<f64, CliError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(CliError::Invalid(format!("--lambda must be finite and >= 0, got {lambda}")))
    }
}

/// `--lambda` if given, otherwise the CV choice on `data`.
fn penalty(
    data: &SmartDataset,
    spec: &ModelSpec,
    lambda: Option<f64>,
    init: InitStrategy,
    seed: u64,
    cfg: &FitConfig,
) -> Result<(f64, &'static str), CliError> {
    match lambda {
        Some(l) => Ok((check_lambda(l)?, "flag")),
        None => {
            let cv = select_lambda(data, spec, data.coding(), init, &default_lambda_grid(), seed, cfg)?;
            Ok((cv.lambda_hat, "cv"))
        }
    }
}

fn shared_fit(
    data: &SmartDataset,
    spec: &ModelSpec,
    init: InitStrategy,
    cfg: &FitConfig,
    lambda: f64,
) -> Result<FitResult, qshared_core::Error> {
    let theta0 = starting_point(data, spec, init)?;
    let standardize = cfg.standardize && lambda > 0.0;
    FixedPointSolver::new(data, spec, standardize)?.run(&theta0, cfg, lambda)
}

fn unshared_names(spec: &ModelSpec) -> Vec<String> {
    spec.stages()
        .iter()
        .enumerate()
        .flat_map(|(i, st)| st.interaction.iter().map(move |s| format!("psi{}[{}]", i + 1, s.feature)))
        .collect()
}

/// Run one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Cv(a) => cv(a),
        Command::Compare(a) => compare(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(n) = a.n {
        scenario.n = n;
    }
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let data = qshared_core::simulator::generate_smart(&scenario)?;
    let mut buf = Vec::new();
    write_csv(&data, &[], &mut buf)?;
    let path = write_file(&a.out_dir, "simulated.csv", &buf)?;
    println!("wrote {} patients to {}", data.len(), path.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let (data, spec) = load_data(&a.data)?;
    let mut cfg = a.solver.config();
    cfg.compute_hat_norm = a.hat_norm;
    cfg.validate()?;
    let (lambda, source) = match a.method {
        FitMethod::Unshared => {
            let fit = q_unshared_fit(&data, &spec, data.coding())?;
            let report = UnsharedReport::new(&fit, &spec, &data);
            let path = write_file(&a.out_dir, "fit.json", &to_json(&report))?;
            println!("{}", report.to_text());
            println!("wrote {}", path.display());
            return Ok(());
        }
        FitMethod::QShared => (0.0, "none"),
        FitMethod::Penalized => penalty(&data, &spec, a.lambda, a.solver.init, a.seed, &cfg)?,
    };
    let result = shared_fit(&data, &spec, a.solver.init, &cfg, lambda)?;
    let method = match a.method {
        FitMethod::Penalized => "penalized",
        _ => "q_shared",
    };
    let report = FitReport::new(method, a.solver.init, source, &result, &data);
    let path = write_file(&a.out_dir, "fit.json", &to_json(&report))?;
    if a.trace {
        write_file(&a.out_dir, "trace.csv", report::trace_csv(&result).as_bytes())?;
    }
    println!("{}", report.to_text());
    println!("wrote {}", path.display());
    match result.status {
        FitStatus::Converged => Ok(()),
        s => Err(CliError::NotConverged(report::status_str(s).into(), result.iterations)),
    }
}

fn diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let (data, spec) = load_data(&a.data)?;
    let design = StackedDesign::build(&data, &spec)?;
    let r = diagnostics::nonexpansion_check(design.design())?;
    write_file(&a.out_dir, "diagnose.json", &to_json(&r))?;
    println!("inf_op_norm: {}", r.inf_op_norm);
    println!("is_nonexpansion: {}", r.is_nonexpansion);
    println!("worst_row: {}", r.worst_row);
    println!("rank: {}", r.rank);
    println!("rows: {}", design.design().nrows());
    println!("verdict: {}", r.verdict());
    if r.is_nonexpansion {
        Ok(())
    } else {
        Err(CliError::Gate(r.inf_op_norm))
    }
}

fn bootstrap(a: BootstrapArgs) -> Result<(), CliError> {
    let (data, spec) = load_data(&a.data)?;
    let cfg = a.solver.config();
    cfg.validate()?;
    let m = match a.m {
        Some(m) => m,
        None => choose_m(data.len(), a.m_exponent)?,
    };
    let init = a.solver.init;
    let summary = match a.method {
        FitMethod::Unshared => {
            let names = unshared_names(&spec);
            let f = |d: &SmartDataset| {
                let fit = q_unshared_fit(d, &spec, d.coding())?;
                Ok(Estimate::exact(fit.stages.iter().flat_map(|s| s.psi.iter().copied()).collect()))
            };
            m_out_of_n_bootstrap(&data, &names, f, m, a.b, a.seed)?
        }
        method => {
            let lambda = match method {
                FitMethod::Penalized => penalty(&data, &spec, a.lambda, init, a.seed, &cfg)?.0,
                _ => 0.0,
            };
            let f = |d: &SmartDataset| Ok(Estimate::shared(&shared_fit(d, &spec, init, &cfg, lambda)?));
            m_out_of_n_bootstrap(&data, spec.shared_names(), f, m, a.b, a.seed)?
        }
    };
    let table = report::bootstrap_csv(&summary);
    write_file(&a.out_dir, "bootstrap.json", &to_json(&summary))?;
    let path = write_file(&a.out_dir, "bootstrap.csv", table.as_bytes())?;
    print!("{table}");
    println!(
        "n = {}, m = {}, B = {}; converged {}, max_iters {}, diverged {}, failed {}",
        summary.n,
        summary.m,
        summary.b,
        summary.status.converged,
        summary.status.max_iters_exceeded,
        summary.status.diverged,
        summary.status.failed
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cv(a: CvArgs) -> Result<(), CliError> {
    let (data, spec) = load_data(&a.data)?;
    let cfg = a.solver.config();
    cfg.validate()?;
    let grid = a.grid.unwrap_or_else(default_lambda_grid);
    let result = select_lambda(&data, &spec, data.coding(), a.solver.init, &grid, a.seed, &cfg)?;
    let curve = report::cv_csv(&result);
    write_file(&a.out_dir, "cv.json", &to_json(&result))?;
    let path = write_file(&a.out_dir, "cv.csv", curve.as_bytes())?;
    print!("{curve}");
    println!("lambda_hat = {}", result.lambda_hat);
    println!("wrote {}", path.display());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let spec = load_spec(a.spec.as_deref())?;
    let cfg = FitConfig { epsilon: a.epsilon, max_iters: a.max_iters, ..FitConfig::default() };
    let opts = ComparisonOptions { eval_size: a.eval_size, cfg, lambda_grid: default_lambda_grid() };
    let mut tables = Vec::with_capacity(a.scenario.len());
    for path in &a.scenario {
        let scenario = load_scenario(path)?;
        tables.push(run_comparison(&scenario, &spec, &a.methods, &a.inits, a.reps, a.seed, &opts)?);
    }
    let csv = report::compare_csv(&tables);
    write_file(&a.out_dir, "compare.json", &to_json(&tables))?;
    let path = write_file(&a.out_dir, "compare.csv", csv.as_bytes())?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}
