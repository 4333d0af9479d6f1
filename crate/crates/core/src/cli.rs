//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::adjustment::{
    check_exchangeability, derive_adjustment_plan, scenario_dag, with_unmeasured_ice_cause, CausalStructure,
};
use crate::datagen::{
    generate_single_period, generate_trial, single_period_oracle, true_effect_oracle, ArmMoments, IcePattern,
    ScenarioSpec, SinglePeriodSpec, SinglePeriodTarget,
};
use crate::estimators::{estimate, estimate_crossworld, EstimatorError, EstimatorSpec};
use crate::harness::{run_study_with, HarnessError, StudyConfig};
use crate::io::{
    detect_dataset_kind, read_single_period_csv, read_trial_csv, serialize_f64, to_json_string,
    write_single_period_csv, write_trial_csv, DatasetKind, IoError,
};

pub const SEED_ENV: &str = "ICEPATH_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "icepath",
    version,
    about = "Simulate trials with discontinuation and rescue, compute true effects and estimate them"
)]
pub struct Cli {
    /// Worker threads (default: all cores); never changes results.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated dataset as CSV.
    Generate(GenerateArgs),
    /// Print the Monte-Carlo true effect as JSON.
    Oracle(OracleArgs),
    /// Apply one estimator to a dataset and print the estimate as JSON.
    Estimate(EstimateArgs),
    /// Run a replicated study from a JSON config.
    Simulate(SimulateArgs),
    /// Print a scenario DAG and its adjustment plan.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
pub struct Coefficients {
    /// Intercept of the ICE models.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Effect of baseline and time-varying covariates.
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    pub beta: f64,
    /// Effect of each ICE on later variables.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// D/R ordering: independent, d-first or r-first.
    #[arg(long, required_unless_present = "single_period")]
    pub scenario: Option<CausalStructure>,
    /// Number of subjects.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Master seed (falls back to ICEPATH_SEED).
    #[arg(long, env = SEED_ENV)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Write one-visit data with cross-world columns instead.
    #[arg(long, conflicts_with = "scenario")]
    pub single_period: bool,
    /// One-visit data only: draw separate noise in each intervention world.
    #[arg(long, requires = "single_period")]
    pub independent_noise: bool,
    #[command(flatten)]
    pub coefficients: Coefficients,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// D/R ordering: independent, d-first or r-first.
    #[arg(long, required_unless_present = "single_period")]
    pub scenario: Option<CausalStructure>,
    /// ICEs withheld: r (rescue), rd (rescue and discontinuation) or none.
    #[arg(long, default_value = "r")]
    pub fix: IcePattern,
    /// Counterfactual subjects per arm.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub oracle_n: u64,
    /// Master seed (falls back to ICEPATH_SEED).
    #[arg(long, env = SEED_ENV)]
    pub seed: u64,
    /// One-visit model: print the cross-world and rescue-withheld contrasts.
    #[arg(long, conflicts_with_all = ["scenario", "fix"])]
    pub single_period: bool,
    #[command(flatten)]
    pub coefficients: Coefficients,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Dataset CSV written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// treatment-policy, naive, ipw-{independent,d-first,r-first},
    /// mi-{independent,d-first,r-first} or crossworld.
    #[arg(long)]
    pub estimator: EstimatorSpec,
    /// Imputations for mi-* estimators.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub m: Option<u64>,
    /// Seed for mi-* estimators (falls back to ICEPATH_SEED).
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// crossworld only: add D×L0 and D×L1 terms to the outcome model.
    #[arg(long)]
    pub interaction: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for replications.csv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// D/R ordering: independent, d-first or r-first.
    #[arg(long)]
    pub structure: CausalStructure,
    /// Visits (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub periods: usize,
    /// Also report sequential exchangeability of the plan, with and without
    /// unmeasured common causes of D and R.
    #[arg(long)]
    pub check_exchangeability: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: IoError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

fn file_err(path: &Path) -> impl FnOnce(IoError) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn from_estimator(e: EstimatorError) -> CliError {
    if e.is_numerical() {
        CliError::Numerical(e.to_string())
    } else {
        CliError::Invalid(e.to_string())
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn install<R: Send>(threads: Option<u32>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t as usize);
    }
    let pool = b.build().map_err(|e| CliError::Invalid(format!("--threads: {e}")))?;
    Ok(pool.install(f))
}

fn scenario_spec(s: CausalStructure, n: usize, c: &Coefficients) -> Result<ScenarioSpec<f64>, CliError> {
    let spec = ScenarioSpec::standard(s, n).with_coefficients(c.alpha, c.beta, c.gamma);
    spec.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(spec)
}

fn single_spec(n: usize, c: &Coefficients, shared_noise: bool) -> SinglePeriodSpec<f64> {
    let mut spec = SinglePeriodSpec::standard(n);
    spec.shared_noise = shared_noise;
    let k = &mut spec.coefficients;
    k.r_intercept = c.alpha;
    k.d_intercept = c.alpha;
    for b in [
        &mut k.l1_l0,
        &mut k.l1_a,
        &mut k.r_l0,
        &mut k.r_a,
        &mut k.r_l1,
        &mut k.d_l0,
        &mut k.d_a,
        &mut k.d_l1,
        &mut k.y_l0,
        &mut k.y_a,
        &mut k.y_l1,
    ] {
        *b = c.beta;
    }
    for g in [&mut k.d_r, &mut k.y_r, &mut k.y_d] {
        *g = c.gamma;
    }
    spec
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let text = to_json_string(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| CliError::Invalid(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| file_err(path)(IoError::Io(e)))
}

#[derive(Serialize)]
struct OracleOutput {
    scenario: Option<CausalStructure>,
    fix: Option<IcePattern>,
    target: &'static str,
    oracle_n: u64,
    seed: u64,
    #[serde(serialize_with = "serialize_f64")]
    tau: f64,
    #[serde(serialize_with = "serialize_f64")]
    mc_se: f64,
    treated: ArmMoments,
    control: ArmMoments,
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => {
            let n = a.n as usize;
            if a.single_period {
                let spec = single_spec(n, &a.coefficients, !a.independent_noise);
                let data = install(cli.threads, || generate_single_period(&spec, a.seed))?
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                write_single_period_csv(&data, create(&a.out)?).map_err(file_err(&a.out))
            } else {
                let spec = scenario_spec(a.scenario.expect("clap requires scenario"), n, &a.coefficients)?;
                let data = install(cli.threads, || generate_trial(&spec, a.seed))?
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                write_trial_csv(&data, create(&a.out)?).map_err(file_err(&a.out))
            }
        }
        Command::Oracle(a) => {
            let n = a.oracle_n as usize;
            if a.single_period {
                let spec = single_spec(1, &a.coefficients, true);
                for (target, name) in [
                    (SinglePeriodTarget::CrossWorld, "crossworld"),
                    (SinglePeriodTarget::WithoutRescue, "without-rescue"),
                ] {
                    let t = install(cli.threads, || single_period_oracle(&spec, target, n, a.seed))?
                        .map_err(|e| CliError::Invalid(e.to_string()))?;
                    write_json(
                        out,
                        &OracleOutput {
                            scenario: None,
                            fix: None,
                            target: name,
                            oracle_n: a.oracle_n,
                            seed: a.seed,
                            tau: t.contrast,
                            mc_se: t.mc_se,
                            treated: t.treated,
                            control: t.control,
                        },
                    )?;
                }
                Ok(())
            } else {
                let scenario = a.scenario.expect("clap requires scenario");
                let spec = scenario_spec(scenario, 1, &a.coefficients)?;
                let t = install(cli.threads, || true_effect_oracle(&spec, a.fix, n, a.seed))?
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                write_json(
                    out,
                    &OracleOutput {
                        scenario: Some(scenario),
                        fix: Some(a.fix),
                        target: "two-visit",
                        oracle_n: a.oracle_n,
                        seed: a.seed,
                        tau: t.tau,
                        mc_se: t.mc_se,
                        treated: t.treated,
                        control: t.control,
                    },
                )
            }
        }
        Command::Estimate(a) => {
            let mut spec = a.estimator;
            match (&mut spec, a.m) {
                (EstimatorSpec::Mi { m, .. }, Some(v)) => *m = v as usize,
                (_, Some(_)) => return Err(CliError::Invalid("--m applies only to mi-* estimators".into())),
                _ => {}
            }
            match (&mut spec, a.interaction) {
                (EstimatorSpec::CrossWorld { interaction }, v) => *interaction = v,
                (_, true) => return Err(CliError::Invalid("--interaction applies only to crossworld".into())),
                _ => {}
            }
            let mut text = String::new();
            File::open(&a.data)
                .and_then(|f| BufReader::new(f).read_to_string(&mut text))
                .map_err(|e| file_err(&a.data)(IoError::Io(e)))?;
            let kind = detect_dataset_kind(text.lines().next().unwrap_or(""));
            let result = match (kind, spec) {
                (Some(DatasetKind::SingleVisit), EstimatorSpec::CrossWorld { interaction }) => {
                    let data = read_single_period_csv::<f64, _>(text.as_bytes()).map_err(file_err(&a.data))?;
                    estimate_crossworld(&data, interaction)
                }
                (Some(DatasetKind::TwoVisit), s) if !s.is_single_period() => {
                    let seed = match s {
                        EstimatorSpec::Mi { .. } => a
                            .seed
                            .ok_or_else(|| CliError::Invalid(format!("{s} needs --seed (or {SEED_ENV})")))?,
                        _ => a.seed.unwrap_or(0),
                    };
                    let data = read_trial_csv::<f64, _>(text.as_bytes()).map_err(file_err(&a.data))?;
                    estimate(&data, &s, seed)
                }
                (None, _) => {
                    return Err(CliError::Invalid(format!(
                        "{}: header matches neither two-visit nor one-visit data",
                        a.data.display()
                    )))
                }
                (Some(k), s) => {
                    return Err(CliError::Invalid(format!(
                        "--estimator {s} does not apply to {} data",
                        if k == DatasetKind::TwoVisit {
                            "two-visit"
                        } else {
                            "one-visit"
                        }
                    )))
                }
            }
            .map_err(from_estimator)?;
            write_json(out, &result)
        }
        Command::Simulate(a) => {
            let text = fs::read_to_string(&a.config).map_err(|e| file_err(&a.config)(IoError::Io(e)))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", a.config.display())))?;
            let mut config: StudyConfig = serde_json::from_value(value.clone())
                .map_err(|e| CliError::Invalid(format!("{}: {e}", a.config.display())))?;
            if value.get("master_seed").is_none() {
                config.master_seed = match std::env::var(SEED_ENV) {
                    Ok(s) => s
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Invalid(format!("{SEED_ENV}: not an unsigned integer: `{s}`")))?,
                    Err(_) => {
                        return Err(CliError::Invalid(format!(
                            "{}: no master_seed and {SEED_ENV} is unset",
                            a.config.display()
                        )))
                    }
                };
            }
            let report = run_study_with::<f64>(&config, cli.threads.map(|t| t as usize)).map_err(|e| match e {
                HarnessError::Config(_) | HarnessError::ThreadPool(_) => CliError::Invalid(e.to_string()),
                other => CliError::Numerical(other.to_string()),
            })?;
            fs::create_dir_all(&a.out_dir).map_err(|e| file_err(&a.out_dir)(IoError::Io(e)))?;
            let reps_path = a.out_dir.join("replications.csv");
            report
                .write_replications_csv(create(&reps_path)?)
                .map_err(file_err(&reps_path))?;
            let summary_path = a.out_dir.join("summary.json");
            let summary = report.summary_json().map_err(file_err(&summary_path))?;
            fs::write(&summary_path, summary + "\n").map_err(|e| file_err(&summary_path)(IoError::Io(e)))?;
            writeln!(out, "wrote {} and {}", reps_path.display(), summary_path.display())
                .map_err(|e| CliError::Invalid(e.to_string()))
        }
        Command::Graph(a) => {
            let invalid = |e: crate::graph::GraphError| CliError::Invalid(e.to_string());
            let g = scenario_dag(a.structure, a.periods).map_err(invalid)?;
            let plan = derive_adjustment_plan(a.structure, a.periods).map_err(invalid)?;
            let mut text = g.to_text();
            text.push('\n');
            text.push_str(&plan.to_string());
            if a.check_exchangeability {
                let plain = check_exchangeability(a.structure, a.periods, &plan, false).map_err(invalid)?;
                let hidden = check_exchangeability(a.structure, a.periods, &plan, true).map_err(invalid)?;
                let u = with_unmeasured_ice_cause(&g, a.periods).map_err(invalid)?;
                let u_nodes: Vec<&str> = u.node_names().into_iter().filter(|n| !g.contains(n)).collect();
                text.push_str(&format!("\nexchangeable given plan: {plain}\n"));
                text.push_str(&format!(
                    "exchangeable with unmeasured D/R causes ({}): {hidden}\n",
                    u_nodes.join(",")
                ));
            }
            write!(out, "{text}").map_err(|e| CliError::Invalid(e.to_string()))
        }
    }
}
