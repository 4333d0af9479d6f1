//! Monte-Carlo study runner: oracle truths per scenario, replicated datasets
//! analysed by every configured estimator, and bias summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjustment::CausalStructure;
use crate::datagen::{generate_trial, true_effect_oracle, DatagenError, IcePattern, OracleTruth, ScenarioSpec};
use crate::estimators::{estimate, EstimatorSpec};
use crate::io::{format_float, serialize_f64, to_json_string, IoError};
use crate::rng::derive_seed;
use crate::scalar::Real;

/// Failed replications allowed per (scenario, estimator), as a fraction.
pub const MAX_FAILURE_RATE: f64 = 0.01;

const ORACLE_TAG: u64 = 0x07ac1e;
const REP_TAG: u64 = 0x4e9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid study config: {0}")]
    Config(String),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error("{estimator} failed in {failures} of {reps} replications of scenario {scenario} (first: {first_reason})")]
    TooManyFailures {
        scenario: CausalStructure,
        estimator: String,
        failures: usize,
        reps: usize,
        first_reason: String,
    },
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn default_n() -> usize {
    2000
}
fn default_reps() -> usize {
    1000
}
fn default_oracle_n() -> usize {
    1_000_000
}
fn default_alpha() -> f64 {
    -1.0
}
fn default_beta() -> f64 {
    0.25
}
fn default_gamma() -> f64 {
    1.0
}
fn default_scenarios() -> Vec<CausalStructure> {
    CausalStructure::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<CausalStructure>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl StudyConfig {
    pub fn new(scenarios: Vec<CausalStructure>, estimators: Vec<EstimatorSpec>, master_seed: u64) -> Self {
        Self {
            scenarios,
            n: default_n(),
            reps: default_reps(),
            estimators,
            oracle_n: default_oracle_n(),
            master_seed,
            alpha: default_alpha(),
            beta: default_beta(),
            gamma: default_gamma(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n == 0 || self.oracle_n == 0 {
            return bad("n and oracle_n must be at least 1".into());
        }
        if self.scenarios.is_empty() || self.estimators.is_empty() {
            return bad("need at least one scenario and one estimator".into());
        }
        if let Some(e) = self.estimators.iter().find(|e| e.is_single_period()) {
            return bad(format!(
                "`{e}` needs one-visit data and cannot run in a two-visit study"
            ));
        }
        if let Some(e) = self
            .estimators
            .iter()
            .find(|e| matches!(e, EstimatorSpec::Mi { m, .. } if *m < 2))
        {
            return bad(format!("`{e}` needs m >= 2"));
        }
        if ![self.alpha, self.beta, self.gamma].iter().all(|v| v.is_finite()) {
            return bad("alpha, beta and gamma must be finite".into());
        }
        Ok(())
    }

    pub fn scenario_spec<T: Real>(&self, structure: CausalStructure) -> ScenarioSpec<T> {
        ScenarioSpec::standard(structure, self.n).with_coefficients(T::c(self.alpha), T::c(self.beta), T::c(self.gamma))
    }
}

/// Seed of replication `rep` of a scenario.
pub fn replication_seed(master: u64, scenario: CausalStructure, rep: usize) -> u64 {
    derive_seed(master, &[REP_TAG, scenario.tag(), rep as u64])
}

pub fn oracle_seed(master: u64, scenario: CausalStructure) -> u64 {
    derive_seed(master, &[ORACLE_TAG, scenario.tag()])
}

/// ICE pattern whose oracle contrast an estimator targets.
pub fn target_pattern(spec: &EstimatorSpec) -> IcePattern {
    match spec {
        EstimatorSpec::TreatmentPolicy => IcePattern::None,
        _ => IcePattern::FixR,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub scenario: CausalStructure,
    pub estimator: String,
    pub rep: usize,
    pub estimate: Option<f64>,
    pub reason: Option<String>,
}

impl ReplicationResult {
    pub fn failed(&self) -> bool {
        self.estimate.is_none()
    }
}

/// One (scenario, estimator) line of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: CausalStructure,
    pub estimator: String,
    #[serde(serialize_with = "serialize_f64")]
    pub truth: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub truth_mc_se: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub mean: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub bias: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub mc_se: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub sd: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub mse: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub q025: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub q25: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub q50: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub q75: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub q975: f64,
    pub failures: usize,
}

impl SummaryRow {
    /// √(mc_se² + truth_mc_se²).
    pub fn combined_se(&self) -> f64 {
        self.mc_se.hypot(self.truth_mc_se)
    }

    pub fn classify(&self) -> BiasClass {
        classify_bias(self.bias, self.combined_se())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasClass {
    Unbiased,
    Biased,
    /// Between 3 and 5 standard errors: more replications needed.
    Indeterminate,
}

/// Unbiased iff |bias| ≤ 3·se; biased iff |bias| ≥ 5·se.
pub fn classify_bias(bias: f64, se: f64) -> BiasClass {
    if bias.abs() <= 3.0 * se {
        BiasClass::Unbiased
    } else if bias.abs() >= 5.0 * se {
        BiasClass::Biased
    } else {
        BiasClass::Indeterminate
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of the successful estimates among `results` against `truth`.
pub fn summarize(results: &[ReplicationResult], truth: f64, truth_mc_se: f64) -> SummaryRow {
    let first = results.first().expect("nonempty results");
    let mut est: Vec<f64> = results.iter().filter_map(|r| r.estimate).collect();
    let failures = results.len() - est.len();
    let k = est.len() as f64;
    let mean = est.iter().sum::<f64>() / k;
    let sd = if est.len() > 1 {
        (est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mse = est.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / k;
    est.sort_by(f64::total_cmp);
    let q = |p| {
        if est.is_empty() {
            f64::NAN
        } else {
            quantile_sorted(&est, p)
        }
    };
    SummaryRow {
        scenario: first.scenario,
        estimator: first.estimator.clone(),
        truth,
        truth_mc_se,
        mean,
        bias: mean - truth,
        mc_se: sd / k.sqrt(),
        sd,
        mse,
        q025: q(0.025),
        q25: q(0.25),
        q50: q(0.5),
        q75: q(0.75),
        q975: q(0.975),
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub rows: Vec<SummaryRow>,
    pub replications: Vec<ReplicationResult>,
    /// Oracle contrasts per scenario and target pattern.
    pub truths: Vec<(CausalStructure, IcePattern, OracleTruth)>,
}

impl StudyReport {
    pub fn row(&self, scenario: CausalStructure, estimator: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.estimator == estimator)
    }

    /// `scenario,estimator,rep,estimate,failed,reason`.
    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<(), IoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "estimator", "rep", "estimate", "failed", "reason"])?;
        for r in &self.replications {
            w.write_record([
                r.scenario.cli_name().to_string(),
                r.estimator.clone(),
                r.rep.to_string(),
                r.estimate.map(format_float).unwrap_or_default(),
                u8::from(r.failed()).to_string(),
                r.reason.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String, IoError> {
        to_json_string(&self.rows)
    }
}

/// Run the study in `T` precision on a pool of `threads` workers (all cores
/// when `None`). The report does not depend on the thread count.
pub fn run_study_with<T: Real>(config: &StudyConfig, threads: Option<usize>) -> Result<StudyReport, HarnessError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    pool.install(|| run_in_pool::<T>(config))
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport, HarnessError> {
    run_study_with::<f64>(config, None)
}

fn run_in_pool<T: Real>(config: &StudyConfig) -> Result<StudyReport, HarnessError> {
    let mut rows = Vec::new();
    let mut replications = Vec::new();
    let mut truths = Vec::new();
    for &scenario in &config.scenarios {
        let spec = config.scenario_spec::<T>(scenario);
        let mut patterns: Vec<IcePattern> = config.estimators.iter().map(target_pattern).collect();
        patterns.sort_by_key(|p| p.tag());
        patterns.dedup();
        for p in patterns {
            let seed = derive_seed(oracle_seed(config.master_seed, scenario), &[p.tag()]);
            truths.push((scenario, p, true_effect_oracle(&spec, p, config.oracle_n, seed)?));
        }

        let per_rep: Vec<Result<Vec<ReplicationResult>, DatagenError>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.master_seed, scenario, rep);
                let data = generate_trial(&spec, seed)?;
                Ok(config
                    .estimators
                    .iter()
                    .map(|est| {
                        let outcome = estimate(&data, est, derive_seed(seed, &[est.seed_tag()]));
                        let (estimate, reason) = match outcome {
                            Ok(e) => (Some(e.point.to_f64_lossy()), None),
                            Err(err) => (None, Some(err.to_string())),
                        };
                        ReplicationResult {
                            scenario,
                            estimator: est.name(),
                            rep,
                            estimate,
                            reason,
                        }
                    })
                    .collect())
            })
            .collect();
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>, _>>()?;

        for (j, est) in config.estimators.iter().enumerate() {
            let results: Vec<ReplicationResult> = per_rep.iter().map(|r| r[j].clone()).collect();
            let failures: Vec<&ReplicationResult> = results.iter().filter(|r| r.failed()).collect();
            if failures.len() as f64 >= MAX_FAILURE_RATE * config.reps as f64 && !failures.is_empty() {
                return Err(HarnessError::TooManyFailures {
                    scenario,
                    estimator: est.name(),
                    failures: failures.len(),
                    reps: config.reps,
                    first_reason: failures[0].reason.clone().unwrap_or_default(),
                });
            }
            let pattern = target_pattern(est);
            let truth = truths
                .iter()
                .find(|(s, p, _)| *s == scenario && *p == pattern)
                .map(|t| t.2)
                .expect("oracle computed");
            rows.push(summarize(&results, truth.tau, truth.mc_se));
        }
        replications.extend(per_rep.into_iter().flatten());
    }
    Ok(StudyReport {
        rows,
        replications,
        truths,
    })
}
