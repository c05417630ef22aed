//! The `stratify` command-line tool.
//!
//! Every command writes a JSON [`RunReport`] that records the full command
//! line, so `stratify replay report.json` can rerun it and check that the
//! results match.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::baseline::{build_baseline, percentile_of, RandomBaseline};
use crate::cohort::{
    assignment_from_arm_column, loosest_constraints, Assignment, AssignmentConstraints, Cohort,
};
use crate::error::{Error, Result};
use crate::exact::{solve_exact, ExactConfig};
use crate::heuristic::{simulated_annealing, tabu_search, HeuristicConfig};
use crate::io::{self, BenchmarkRow, IngestionConfig, LoadedCohort, SchemaFile};
use crate::metrics::{compute_scales, objective, DiscrepancyReport, ObjectiveConfig};
use crate::qubo::{solve_qaoa, solve_qubo_anneal, AnnealSchedule, QaoaConfig, QuboSolverConfig};
use crate::rng::{derive_seed, seeded};
use crate::sensitivity::{
    attach_baseline, greedy_removal_trace, random_removal_baseline, RemovalTrace,
};
use crate::solve::SolveResult;
use crate::synthetic::{confounded_trial, random_cohort, TrialDesign};

#[derive(Debug, Parser)]
#[command(
    name = "stratify",
    version,
    about = "Covariate-balanced treatment assignment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Find a balanced assignment and write it with a report.
    Stratify(StratifyArgs),
    /// Report the balance of an existing assignment.
    Diagnose(DiagnoseArgs),
    /// Run solvers on seeded subsamples of increasing size.
    Benchmark(BenchmarkArgs),
    /// Greedy patient-removal trace of the log-rank p-value.
    Sensitivity(SensitivityArgs),
    /// Write a synthetic cohort and its schema.
    Generate(GenerateArgs),
    /// Rerun the command recorded in a report and compare the results.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputArgs {
    /// Cohort CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML schema sidecar.
    #[arg(long)]
    pub schema: PathBuf,
    /// Skip rows with missing values instead of failing.
    #[arg(long)]
    pub drop_incomplete: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectiveArgs {
    /// Weight of the categorical (total variation) term.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Weight of standard-deviation differences in the numerical term.
    #[arg(long, default_value_t = 1.0)]
    pub variance_weight: f64,
}

impl ObjectiveArgs {
    fn config(&self) -> Result<ObjectiveConfig> {
        ObjectiveConfig::new(self.alpha, self.variance_weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Exact,
    Tabu,
    Anneal,
    QuboAnneal,
    Qaoa,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Tabu => "tabu",
            Solver::Anneal => "anneal",
            Solver::QuboAnneal => "qubo-anneal",
            Solver::Qaoa => "qaoa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Solver::Anneal)]
    pub solver: Solver,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent restarts of the randomized solvers.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Iterations (tabu) or temperature steps (anneal) per restart; default 20·n.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Size-penalty weight of the QUBO encoding.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Sweeps of the QUBO annealer.
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    /// QAOA circuit depth.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Largest cohort the exact solver accepts.
    #[arg(long)]
    pub exact_cap: Option<usize>,
}

impl Default for SolverArgs {
    fn default() -> Self {
        SolverArgs {
            solver: Solver::Anneal,
            seed: 0,
            restarts: 10,
            max_iters: None,
            penalty: None,
            sweeps: 1000,
            layers: 2,
            exact_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StratifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 2)]
    pub arms: usize,
    /// Allowed deviation of each arm size from n/m.
    #[arg(long, default_value_t = 0)]
    pub tolerance: usize,
    /// Place the result in a randomization baseline of this many draws.
    #[arg(long)]
    pub baseline_samples: Option<usize>,
    /// Keep every baseline value in the report, not just the summary.
    #[arg(long)]
    pub full_baseline: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Assignment CSV (patientId, arm); the schema's arm column otherwise.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[arg(long)]
    pub arms: Option<usize>,
    /// Size tolerance for baseline draws; default: the loosest the assignment needs.
    #[arg(long)]
    pub tolerance: Option<usize>,
    #[arg(long)]
    pub baseline_samples: Option<usize>,
    #[arg(long)]
    pub full_baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Subsample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 50, 75, 100, 150, 200])]
    pub sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Solver::Exact, Solver::Anneal])]
    pub solvers: Vec<Solver>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub tolerance: usize,
    #[arg(long, default_value_t = crate::baseline::DEFAULT_SAMPLES)]
    pub baseline_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Assignment CSV (patientId, arm); the schema's arm column otherwise.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// Default: a third of the cohort, within the two-per-arm floor.
    #[arg(long)]
    pub max_removals: Option<usize>,
    /// Random-removal repetitions at the p-minimizing step.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Two-arm survival trial with a confounded prognostic covariate.
    Trial,
    /// Standard-normal and three-level covariates, no outcomes.
    Random,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = SyntheticKind::Trial)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 120)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub report: PathBuf,
    /// Where the rerun writes its files; a temporary directory by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineSummary {
    pub samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub seed: u64,
    /// Where the reported objective falls in the baseline, in percent.
    pub percentile: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl BaselineSummary {
    fn new(baseline: RandomBaseline, value: f64, full: bool) -> Self {
        BaselineSummary {
            percentile: percentile_of(&baseline, value),
            samples: baseline.samples,
            mean: baseline.mean,
            std_dev: baseline.std_dev,
            seed: baseline.seed,
            values: full.then_some(baseline.values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub tool_version: String,
    /// The command exactly as run; replaying it reproduces the results.
    pub invocation: Command,
    pub instance_digest: String,
    pub patients: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_lines: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<DiscrepancyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<RemovalTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<Vec<BenchmarkRow>>,
    /// Milliseconds per phase. Not reproducible, so ignored by replay.
    pub wall_times_ms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(invocation: Command, loaded: &LoadedCohort) -> Self {
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            instance_digest: io::instance_digest(&loaded.cohort, &digest_config(&invocation)),
            invocation,
            patients: loaded.cohort.len(),
            dropped_lines: loaded.dropped_lines.clone(),
            solve: None,
            discrepancy: None,
            baseline: None,
            trace: None,
            benchmark: None,
            wall_times_ms: BTreeMap::new(),
            warnings: compute_scales(&loaded.cohort).warnings(),
        }
    }

    fn time(&mut self, phase: &str, started: Instant) {
        self.wall_times_ms
            .insert(phase.to_string(), started.elapsed().as_secs_f64() * 1e3);
    }

    /// A copy with every timing field zeroed, for comparing runs.
    pub fn without_timings(&self) -> RunReport {
        let mut r = self.clone();
        r.wall_times_ms.values_mut().for_each(|v| *v = 0.0);
        if let Some(s) = &mut r.solve {
            s.wall_time = Default::default();
        }
        if let Some(rows) = &mut r.benchmark {
            rows.iter_mut().for_each(|row| row.wall_time_ms = 0.0);
        }
        r
    }
}

/// The invocation without file locations, so the digest depends on content.
fn digest_config(command: &Command) -> serde_json::Value {
    let mut v = serde_json::to_value(command).expect("commands serialize");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("out");
        obj.remove("assignment");
        if let Some(input) = obj.get_mut("input").and_then(|i| i.as_object_mut()) {
            input.remove("data");
            input.remove("schema");
        }
    }
    v
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

impl InputArgs {
    fn load(&self) -> Result<LoadedCohort> {
        io::load_cohort(&IngestionConfig {
            csv_path: self.data.clone(),
            schema_path: self.schema.clone(),
            delimiter: self.delimiter,
            drop_incomplete: self.drop_incomplete,
            ..IngestionConfig::new("", "")
        })
    }

    fn absolutize(&mut self) -> Result<()> {
        self.data = absolute(&self.data)?;
        self.schema = absolute(&self.schema)?;
        Ok(())
    }
}

/// Runs one backend with the settings in `args`.
pub fn run_solver(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    objective_config: &ObjectiveConfig,
    args: &SolverArgs,
) -> Result<SolveResult> {
    let heuristic = HeuristicConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        seed: args.seed,
        ..Default::default()
    };
    match args.solver {
        Solver::Exact => {
            let config = ExactConfig {
                max_patients: args.exact_cap,
                ..Default::default()
            };
            solve_exact(cohort, constraints, &config, objective_config)
        }
        Solver::Tabu => tabu_search(cohort, constraints, &heuristic, objective_config),
        Solver::Anneal => simulated_annealing(cohort, constraints, &heuristic, objective_config),
        Solver::QuboAnneal => {
            let config = QuboSolverConfig {
                penalty: args.penalty,
                schedule: AnnealSchedule {
                    sweeps: args.sweeps,
                    ..Default::default()
                },
                restarts: args.restarts,
                seed: args.seed,
            };
            solve_qubo_anneal(cohort, constraints, &config, objective_config)
        }
        Solver::Qaoa => {
            let config = QaoaConfig {
                layers: args.layers,
                seed: args.seed,
                ..Default::default()
            };
            solve_qaoa(cohort, constraints, &config, args.penalty, objective_config)
        }
    }
}

/// Runs a parsed command and returns the process exit status: 0, or 1 when
/// a replay does not match.
pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Stratify(args) => cmd_stratify(args).map(|_| 0),
        Command::Diagnose(args) => cmd_diagnose(args).map(|_| 0),
        Command::Benchmark(args) => cmd_benchmark(args).map(|_| 0),
        Command::Sensitivity(args) => cmd_sensitivity(args).map(|_| 0),
        Command::Generate(args) => cmd_generate(&args).map(|_| 0),
        Command::Replay(args) => {
            let outcome = cmd_replay(&args)?;
            if outcome.matches {
                println!("replay of {} matches", args.report.display());
                Ok(0)
            } else {
                println!(
                    "replay of {} differs in: {}",
                    args.report.display(),
                    outcome.differences.join(", ")
                );
                Ok(1)
            }
        }
    }
}

fn run_analysis(command: Command) -> Result<RunReport> {
    match command {
        Command::Stratify(a) => cmd_stratify(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Generate(_) | Command::Replay(_) => Err(Error::Data(
            "the report records no replayable command".into(),
        )),
    }
}

fn write_report(out: &Path, report: &RunReport) -> Result<()> {
    io::write_json(&out.join("report.json"), report)
}

pub fn cmd_stratify(mut args: StratifyArgs) -> Result<RunReport> {
    args.input.absolutize()?;
    let started = Instant::now();
    let loaded = args.input.load()?;
    let cohort = &loaded.cohort;
    let mut report = RunReport::new(Command::Stratify(args.clone()), &loaded);
    report.time("load", started);

    let cfg = args.objective.config()?;
    let constraints = AssignmentConstraints::new(args.arms, args.tolerance)?;
    let started = Instant::now();
    let result = run_solver(cohort, &constraints, &cfg, &args.solver)?;
    report.time("solve", started);
    report.discrepancy = Some(objective(
        cohort,
        &result.assignment,
        args.arms,
        &cfg,
        &compute_scales(cohort),
    )?);

    if let Some(samples) = args.baseline_samples {
        let started = Instant::now();
        let baseline = build_baseline(cohort, &constraints, &cfg, samples, args.solver.seed)?;
        report.baseline = Some(BaselineSummary::new(
            baseline,
            result.objective,
            args.full_baseline,
        ));
        report.time("baseline", started);
    }
    io::write_atomic(
        &args.out.join("assignment.csv"),
        &io::assignment_csv(cohort, &result.assignment)?,
    )?;
    report.solve = Some(result);
    write_report(&args.out, &report)?;
    Ok(report)
}

pub fn cmd_diagnose(mut args: DiagnoseArgs) -> Result<RunReport> {
    args.input.absolutize()?;
    if let Some(a) = &mut args.assignment {
        *a = absolute(a)?;
    }
    let started = Instant::now();
    let loaded = args.input.load()?;
    let cohort = &loaded.cohort;
    let mut report = RunReport::new(Command::Diagnose(args.clone()), &loaded);
    let (assignment, inferred) = match &args.assignment {
        Some(path) => {
            let a = io::read_assignment_csv(path, cohort)?;
            let arms = args
                .arms
                .unwrap_or_else(|| a.arm_of().iter().max().map_or(2, |m| (m + 1).max(2)));
            let c = loosest_constraints(&a, arms)?;
            (a, c)
        }
        None => {
            if cohort.schema().arm_column().is_none() {
                return Err(Error::Data(
                    "no assignment given and the schema has no arm column".into(),
                ));
            }
            assignment_from_arm_column(cohort)?
        }
    };
    let arms = args.arms.unwrap_or(inferred.arms());
    if let Some(&bad) = assignment.arm_of().iter().find(|&&a| a >= arms) {
        return Err(Error::Data(format!(
            "assignment uses arm {bad} but only {arms} arms were requested"
        )));
    }
    let constraints =
        AssignmentConstraints::new(arms, args.tolerance.unwrap_or(inferred.tolerance()))?;
    report.time("load", started);

    let cfg = args.objective.config()?;
    let started = Instant::now();
    let disc = objective(cohort, &assignment, arms, &cfg, &compute_scales(cohort))?;
    report.time("diagnose", started);
    if let Some(samples) = args.baseline_samples {
        let started = Instant::now();
        let baseline = build_baseline(cohort, &constraints, &cfg, samples, args.seed)?;
        report.baseline = Some(BaselineSummary::new(
            baseline,
            disc.objective,
            args.full_baseline,
        ));
        report.time("baseline", started);
    }
    report.discrepancy = Some(disc);
    write_report(&args.out, &report)?;
    Ok(report)
}

/// Seeded subsample of `size` patients; positions are kept in cohort order.
pub fn subsample(cohort: &Cohort, size: usize, seed: u64) -> Result<Cohort> {
    if size > cohort.len() {
        return Err(Error::Config(format!(
            "subsample of {size} requested from a cohort of {}",
            cohort.len()
        )));
    }
    let mut rng = seeded(derive_seed(seed, size as u64));
    let mut positions = sample(&mut rng, cohort.len(), size).into_vec();
    positions.sort_unstable();
    cohort.subset(&positions)
}

/// One benchmark row per size and solver. Solvers refusing a size (size cap)
/// are skipped with a warning.
pub fn benchmark_rows(
    cohort: &Cohort,
    args: &BenchmarkArgs,
) -> Result<(Vec<BenchmarkRow>, Vec<String>)> {
    let cfg = args.objective.config()?;
    let constraints = AssignmentConstraints::new(2, args.tolerance)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &n in &args.sizes {
        let sub = subsample(cohort, n, args.seed)?;
        let baseline = build_baseline(&sub, &constraints, &cfg, args.baseline_samples, args.seed)?;
        for &solver in &args.solvers {
            let solver_args = SolverArgs {
                solver,
                seed: args.seed,
                restarts: args.restarts,
                max_iters: args.max_iters,
                ..Default::default()
            };
            match run_solver(&sub, &constraints, &cfg, &solver_args) {
                Ok(r) => rows.push(BenchmarkRow {
                    n,
                    solver: solver.name().to_string(),
                    objective: r.objective,
                    baseline_mean: baseline.mean,
                    wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
                    seed: args.seed,
                }),
                Err(e @ Error::SizeCap { .. }) => {
                    let msg = format!("skipped {} at n = {n}: {e}", solver.name());
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((rows, warnings))
}

pub fn cmd_benchmark(mut args: BenchmarkArgs) -> Result<RunReport> {
    args.input.absolutize()?;
    let started = Instant::now();
    let loaded = args.input.load()?;
    let mut report = RunReport::new(Command::Benchmark(args.clone()), &loaded);
    report.time("load", started);
    let started = Instant::now();
    let (rows, warnings) = benchmark_rows(&loaded.cohort, &args)?;
    report.time("benchmark", started);
    report.warnings.extend(warnings);
    io::write_atomic(&args.out.join("benchmark.csv"), &io::benchmark_csv(&rows)?)?;
    report.benchmark = Some(rows);
    write_report(&args.out, &report)?;
    Ok(report)
}

pub fn cmd_sensitivity(mut args: SensitivityArgs) -> Result<RunReport> {
    args.input.absolutize()?;
    if let Some(a) = &mut args.assignment {
        *a = absolute(a)?;
    }
    let started = Instant::now();
    let loaded = args.input.load()?;
    let cohort = &loaded.cohort;
    if !cohort.has_survival() {
        return Err(Error::Data(
            "the schema declares no survival time and event columns".into(),
        ));
    }
    let mut report = RunReport::new(Command::Sensitivity(args.clone()), &loaded);
    let assignment: Assignment = match &args.assignment {
        Some(path) => io::read_assignment_csv(path, cohort)?,
        None => assignment_from_arm_column(cohort)?.0,
    };
    report.time("load", started);

    let cfg = args.objective.config()?;
    let floor = cohort.len().saturating_sub(5);
    let max_removals = args.max_removals.unwrap_or((cohort.len() / 3).min(floor));
    let started = Instant::now();
    let trace = greedy_removal_trace(cohort, &assignment, &cfg, max_removals)?;
    report.time("trace", started);
    let started = Instant::now();
    let p = random_removal_baseline(cohort, &assignment, trace.k_star, args.reps, args.seed)?;
    report.time("randomRemoval", started);
    let trace = attach_baseline(trace, p);

    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    io::write_atomic(&args.out.join("trace.csv"), &csv)?;
    report.discrepancy = Some(objective(
        cohort,
        &assignment,
        2,
        &cfg,
        &compute_scales(cohort),
    )?);
    report.trace = Some(trace);
    write_report(&args.out, &report)?;
    Ok(report)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (cohort, schema) = match args.kind {
        SyntheticKind::Trial => {
            let design = TrialDesign {
                patients: args.n,
                ..Default::default()
            };
            let schema = SchemaFile {
                numerical: vec!["risk".into(), "age".into()],
                categorical: vec![io::CategoricalSpec::Inline("sex:f,m".into())],
                time: Some("time".into()),
                event: Some("event".into()),
                arm: Some("arm".into()),
                arm_labels: Some(vec!["0".into(), "1".into()]),
                id: Some("id".into()),
                ..Default::default()
            };
            (confounded_trial(&design, args.seed), schema)
        }
        SyntheticKind::Random => {
            let schema = SchemaFile {
                numerical: vec!["x0".into(), "x1".into()],
                categorical: vec![io::CategoricalSpec::Inline("g0:a,b,c".into())],
                id: Some("id".into()),
                ..Default::default()
            };
            (random_cohort(args.n, 2, 1, args.seed), schema)
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let s = cohort.schema();
    let mut header = vec!["id".to_string()];
    header.extend((0..s.num_numerical()).map(|j| s.numerical_name(j).to_string()));
    header.extend((0..s.num_categorical()).map(|c| s.categorical_name(c).to_string()));
    if cohort.has_survival() {
        header.extend(["time".into(), "event".into(), "arm".into()]);
    }
    let err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(&header).map_err(err)?;
    for p in cohort.patients() {
        let mut row = vec![p.id.clone()];
        row.extend(p.numerical.iter().map(|v| format!("{v:?}")));
        row.extend(
            p.categorical
                .iter()
                .enumerate()
                .map(|(c, &k)| s.categorical_labels(c)[k].clone()),
        );
        if let Some(sv) = p.survival {
            row.push(format!("{:?}", sv.time));
            row.push(u8::from(sv.event).to_string());
            row.push(p.original_arm.unwrap_or(0).to_string());
        }
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    io::write_atomic(&args.out.join("cohort.csv"), &bytes)?;
    io::write_atomic(&args.out.join("schema.toml"), schema.to_toml().as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub matches: bool,
    pub differences: Vec<String>,
    pub rerun: RunReport,
}

/// Reruns the command recorded in a report (into `args.out` or a temporary
/// directory) and compares everything except timings.
pub fn cmd_replay(args: &ReplayArgs) -> Result<ReplayOutcome> {
    let original: RunReport = io::read_json(&args.report)?;
    let tmp;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => {
            tmp = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            tmp.path().to_path_buf()
        }
    };
    let command = match original.invocation.clone() {
        Command::Stratify(mut a) => {
            a.out = out;
            Command::Stratify(a)
        }
        Command::Diagnose(mut a) => {
            a.out = out;
            Command::Diagnose(a)
        }
        Command::Benchmark(mut a) => {
            a.out = out;
            Command::Benchmark(a)
        }
        Command::Sensitivity(mut a) => {
            a.out = out;
            Command::Sensitivity(a)
        }
        Command::Generate(_) | Command::Replay(_) => {
            return Err(Error::Data(
                "the report records no replayable command".into(),
            ))
        }
    };
    let rerun = run_analysis(command)?;
    let (a, b) = (original.without_timings(), rerun.without_timings());
    let mut differences = Vec::new();
    let mut check = |name: &str, same: bool| {
        if !same {
            differences.push(name.to_string());
        }
    };
    check("instanceDigest", a.instance_digest == b.instance_digest);
    check("solve", a.solve == b.solve);
    check("discrepancy", a.discrepancy == b.discrepancy);
    check("baseline", a.baseline == b.baseline);
    check("trace", a.trace == b.trace);
    check("benchmark", a.benchmark == b.benchmark);
    Ok(ReplayOutcome {
        matches: differences.is_empty(),
        differences,
        rerun,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_flags() {
        let cli = Cli::try_parse_from([
            "stratify",
            "stratify",
            "--data",
            "d.csv",
            "--schema",
            "s.toml",
            "--solver",
            "exact",
            "--seed",
            "7",
            "--alpha",
            "0.5",
            "--variance-weight",
            "0",
            "--tolerance",
            "1",
            "--arms",
            "3",
            "--baseline-samples",
            "100",
            "--drop-incomplete",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Stratify(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.solver.solver, Solver::Exact);
        assert_eq!((a.arms, a.tolerance, a.solver.seed), (3, 1, 7));
        assert!(a.input.drop_incomplete);
        let cli = Cli::try_parse_from([
            "stratify",
            "sensitivity",
            "--data",
            "d",
            "--schema",
            "s",
            "--max-removals",
            "4",
            "--reps",
            "9",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Sensitivity(a) = cli.command else {
            panic!()
        };
        assert_eq!((a.max_removals, a.reps), (Some(4), 9));
        let cli = Cli::try_parse_from([
            "stratify",
            "benchmark",
            "--data",
            "d",
            "--schema",
            "s",
            "--sizes",
            "10,20",
            "--solvers",
            "exact,qubo-anneal",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Benchmark(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.sizes, vec![10, 20]);
        assert_eq!(a.solvers, vec![Solver::Exact, Solver::QuboAnneal]);
    }

    #[test]
    fn commands_round_trip_through_json() {
        let cli = Cli::try_parse_from([
            "stratify",
            "diagnose",
            "--data",
            "d",
            "--schema",
            "s",
            "--baseline-samples",
            "5",
            "--out",
            "o",
        ])
        .unwrap();
        let json = serde_json::to_string(&cli.command).unwrap();
        assert_eq!(serde_json::from_str::<Command>(&json).unwrap(), cli.command);
    }

    #[test]
    fn digest_ignores_locations() {
        let a = Cli::try_parse_from([
            "stratify", "diagnose", "--data", "a", "--schema", "s", "--out", "x",
        ])
        .unwrap();
        let b = Cli::try_parse_from([
            "stratify", "diagnose", "--data", "b", "--schema", "t", "--out", "y",
        ])
        .unwrap();
        assert_eq!(digest_config(&a.command), digest_config(&b.command));
        let c = Cli::try_parse_from([
            "stratify", "diagnose", "--data", "a", "--schema", "s", "--alpha", "2", "--out", "x",
        ])
        .unwrap();
        assert_ne!(digest_config(&a.command), digest_config(&c.command));
    }
}
