//! Effect estimators for two-visit trial data: treatment policy, naive
//! complete-case, IPW and sequential multiple imputation under each assumed
//! D/R ordering, plus the one-visit cross-world imputation estimator.
//!
//! Every estimator reports the coefficient of `A` (or an arm difference) as
//! its point estimate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::adjustment::{derive_adjustment_plan, AdjustmentPlan, CausalStructure};
use crate::datagen::{SinglePeriodObservation, TrialRecord};
use crate::numerics::{
    logistic_fit, ols_fit, rubins_pool, wls_fit, DesignMatrix, LinearFit, LogisticFit, NumericsError, PooledEstimate,
    PosteriorDraw,
};
use crate::rng::NoiseSource;
use crate::scalar::{expit, Real};

/// Probabilities of staying rescue-free are floored here before inversion.
pub const WEIGHT_FLOOR: f64 = 1e-6;

pub const DEFAULT_IMPUTATIONS: usize = 10;

const MI_DOMAIN: u64 = 0x4d49;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("no subjects in arm A={0}")]
    EmptyArm(u8),
    #[error("no rescue-free subjects in arm A={0}")]
    NoRescueFree(u8),
    #[error("{model}: {source}")]
    Model {
        model: String,
        #[source]
        source: NumericsError,
    },
    #[error("multiple imputation needs m >= 2 (got {0})")]
    TooFewImputations(usize),
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error("non-finite estimate")]
    NonFinite,
}

impl EstimatorError {
    /// True for failures of a fitted model, as opposed to unusable input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, EstimatorError::Model { .. } | EstimatorError::NonFinite)
    }
}

fn model_err(model: impl Into<String>) -> impl FnOnce(NumericsError) -> EstimatorError {
    let model = model.into();
    move |source| EstimatorError::Model { model, source }
}

/// What to estimate and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorSpec {
    TreatmentPolicy,
    Naive,
    Ipw(CausalStructure),
    Mi { assumed: CausalStructure, m: usize },
    CrossWorld { interaction: bool },
}

impl EstimatorSpec {
    pub fn mi(assumed: CausalStructure) -> Self {
        EstimatorSpec::Mi {
            assumed,
            m: DEFAULT_IMPUTATIONS,
        }
    }

    pub fn assumed_structure(&self) -> Option<CausalStructure> {
        match *self {
            EstimatorSpec::Ipw(s) | EstimatorSpec::Mi { assumed: s, .. } => Some(s),
            _ => None,
        }
    }

    /// Name used on the command line and in study configs.
    pub fn name(&self) -> String {
        match self {
            EstimatorSpec::TreatmentPolicy => "treatment-policy".into(),
            EstimatorSpec::Naive => "naive".into(),
            EstimatorSpec::Ipw(s) => format!("ipw-{}", s.cli_name()),
            EstimatorSpec::Mi { assumed, .. } => format!("mi-{}", assumed.cli_name()),
            EstimatorSpec::CrossWorld { .. } => "crossworld".into(),
        }
    }

    /// Whether the estimator consumes one-visit data.
    pub fn is_single_period(&self) -> bool {
        matches!(self, EstimatorSpec::CrossWorld { .. })
    }

    /// Stable identifier used to derive per-estimator seeds.
    pub fn seed_tag(&self) -> u64 {
        match *self {
            EstimatorSpec::TreatmentPolicy => 1,
            EstimatorSpec::Naive => 2,
            EstimatorSpec::Ipw(s) => 0x10 + s.tag(),
            EstimatorSpec::Mi { assumed, .. } => 0x20 + assumed.tag(),
            EstimatorSpec::CrossWorld { .. } => 0x30,
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EstimatorSpec {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || EstimatorError::UnknownEstimator(s.to_string());
        match s {
            "treatment-policy" => Ok(EstimatorSpec::TreatmentPolicy),
            "naive" => Ok(EstimatorSpec::Naive),
            "crossworld" => Ok(EstimatorSpec::CrossWorld { interaction: false }),
            _ => {
                if let Some(rest) = s.strip_prefix("ipw-") {
                    rest.parse().map(EstimatorSpec::Ipw).map_err(|_| unknown())
                } else if let Some(rest) = s.strip_prefix("mi-") {
                    rest.parse().map(EstimatorSpec::mi).map_err(|_| unknown())
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EstimatorObject {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    interaction: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EstimatorRepr {
    Name(String),
    Object(EstimatorObject),
}

/// Serialized as a bare name unless a non-default option is set, e.g.
/// `"ipw-d-first"` or `{"name": "mi-r-first", "m": 20}`.
impl Serialize for EstimatorSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            EstimatorSpec::Mi { m, .. } if m != DEFAULT_IMPUTATIONS => EstimatorObject {
                name: self.name(),
                m: Some(m),
                interaction: false,
            }
            .serialize(serializer),
            EstimatorSpec::CrossWorld { interaction: true } => EstimatorObject {
                name: self.name(),
                m: None,
                interaction: true,
            }
            .serialize(serializer),
            _ => serializer.serialize_str(&self.name()),
        }
    }
}

impl<'de> Deserialize<'de> for EstimatorSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let (name, m, interaction) = match EstimatorRepr::deserialize(deserializer)? {
            EstimatorRepr::Name(n) => (n, None, false),
            EstimatorRepr::Object(o) => (o.name, o.m, o.interaction),
        };
        let mut spec: EstimatorSpec = name.parse().map_err(D::Error::custom)?;
        match (&mut spec, m) {
            (EstimatorSpec::Mi { m: slot, .. }, Some(v)) => *slot = v,
            (_, Some(_)) => return Err(D::Error::custom(format!("`m` does not apply to `{name}`"))),
            _ => {}
        }
        match (&mut spec, interaction) {
            (EstimatorSpec::CrossWorld { interaction: slot }, v) => *slot = v,
            (_, true) => return Err(D::Error::custom(format!("`interaction` does not apply to `{name}`"))),
            _ => {}
        }
        Ok(spec)
    }
}

/// Side information about one estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics<T> {
    /// Subjects entering the final outcome regression.
    pub retained: usize,
    pub weight_min: Option<T>,
    pub weight_max: Option<T>,
    /// Probabilities raised to the weight floor.
    pub floored_weights: usize,
    /// Whether every fitted logistic model converged.
    pub models_converged: bool,
    /// Values filled in per imputation.
    pub imputed_values: usize,
    pub pooled: Option<PooledEstimate<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate<T> {
    pub estimator: String,
    pub point: T,
    /// Model-based variance of the point estimate where one is available.
    pub variance: Option<T>,
    pub diagnostics: Diagnostics<T>,
}

fn check_arms<T: Real>(data: &[TrialRecord<T>]) -> Result<(), EstimatorError> {
    for arm in [0, 1] {
        if !data.iter().any(|r| r.a == arm) {
            return Err(EstimatorError::EmptyArm(arm));
        }
    }
    Ok(())
}

/// Design (intercept, A, L0) over the selected subjects.
fn a_l0_design<T: Real>(rows: &[&TrialRecord<T>]) -> Result<DesignMatrix<T>, NumericsError> {
    DesignMatrix::with_intercept(
        ["A", "L0"],
        vec![
            rows.iter().map(|r| T::indicator(r.a)).collect(),
            rows.iter().map(|r| r.l0).collect(),
        ],
    )
}

fn coefficient_of_a<T: Real>(fit: &LinearFit<T>) -> Result<(T, T), EstimatorError> {
    let point = fit.coefficient("A").expect("A column");
    if !point.is_finite() {
        return Err(EstimatorError::NonFinite);
    }
    Ok((point, fit.variance("A").expect("A column")))
}

/// OLS of Y on (intercept, A, L0) over the selected subjects.
fn regress_on_a_l0<T: Real>(rows: &[&TrialRecord<T>], weights: Option<&[T]>) -> Result<LinearFit<T>, EstimatorError> {
    let x = a_l0_design(rows).map_err(model_err("outcome regression"))?;
    let y: Vec<T> = rows.iter().map(|r| r.y).collect();
    match weights {
        None => ols_fit(&x, &y),
        Some(w) => wls_fit(&x, &y, w),
    }
    .map_err(model_err("outcome regression"))
}

/// Coefficient of A from OLS of Y on (intercept, A, L0), all subjects.
pub fn estimate_treatment_policy<T: Real>(data: &[TrialRecord<T>]) -> Result<EffectEstimate<T>, EstimatorError> {
    check_arms(data)?;
    let rows: Vec<&TrialRecord<T>> = data.iter().collect();
    let (point, variance) = coefficient_of_a(&regress_on_a_l0(&rows, None)?)?;
    Ok(EffectEstimate {
        estimator: EstimatorSpec::TreatmentPolicy.name(),
        point,
        variance: Some(variance),
        diagnostics: Diagnostics {
            retained: rows.len(),
            models_converged: true,
            ..Diagnostics::default()
        },
    })
}

fn rescue_free_rows<T: Real>(data: &[TrialRecord<T>]) -> Result<Vec<&TrialRecord<T>>, EstimatorError> {
    let rows: Vec<&TrialRecord<T>> = data.iter().filter(|r| r.rescue_free()).collect();
    for arm in [0, 1] {
        if !rows.iter().any(|r| r.a == arm) {
            return Err(EstimatorError::NoRescueFree(arm));
        }
    }
    Ok(rows)
}

/// Same regression restricted to subjects with R1 = R2 = 0.
pub fn estimate_naive<T: Real>(data: &[TrialRecord<T>]) -> Result<EffectEstimate<T>, EstimatorError> {
    check_arms(data)?;
    let rows = rescue_free_rows(data)?;
    let (point, variance) = coefficient_of_a(&regress_on_a_l0(&rows, None)?)?;
    Ok(EffectEstimate {
        estimator: EstimatorSpec::Naive.name(),
        point,
        variance: Some(variance),
        diagnostics: Diagnostics {
            retained: rows.len(),
            models_converged: true,
            ..Diagnostics::default()
        },
    })
}

fn covariate_design<T: Real>(
    rows: &[&TrialRecord<T>],
    covariates: &[String],
) -> Result<DesignMatrix<T>, NumericsError> {
    DesignMatrix::with_intercept(
        covariates.iter().cloned(),
        covariates
            .iter()
            .map(|c| rows.iter().map(|r| r.get(c).expect("known variable")).collect())
            .collect(),
    )
}

/// Fitted P(R_k = 0 | covariates) on `rows`, or all ones when nobody in
/// `rows` was rescued.
fn stay_probabilities<T: Real>(
    rows: &[&TrialRecord<T>],
    rescue: &str,
    covariates: &[String],
) -> Result<(Vec<T>, Option<LogisticFit<T>>), EstimatorError> {
    let y: Vec<T> = rows.iter().map(|r| r.get(rescue).expect("rescue column")).collect();
    if y.iter().all(|&v| v == T::zero()) {
        return Ok((vec![T::one(); rows.len()], None));
    }
    let model = format!("{rescue} model");
    let x = covariate_design(rows, covariates).map_err(model_err(model.clone()))?;
    let fit = logistic_fit(&x, &y).map_err(model_err(model))?;
    let pi = (0..rows.len())
        .map(|i| T::one() - fit.predict_proba(&x.row(i)))
        .collect();
    Ok((pi, Some(fit)))
}

/// Inverse probability weighting with the rescue models of the assumed
/// structure: weight (π1 π2)⁻¹ among subjects with R1 = R2 = 0, then WLS of
/// Y on (intercept, A, L0).
pub fn estimate_ipw<T: Real>(
    data: &[TrialRecord<T>],
    assumed: CausalStructure,
) -> Result<EffectEstimate<T>, EstimatorError> {
    let plan = derive_adjustment_plan(assumed, 2).expect("two-visit plan");
    estimate_ipw_with_plan(data, &plan)
}

pub fn estimate_ipw_with_plan<T: Real>(
    data: &[TrialRecord<T>],
    plan: &AdjustmentPlan,
) -> Result<EffectEstimate<T>, EstimatorError> {
    check_arms(data)?;
    let all: Vec<&TrialRecord<T>> = data.iter().collect();
    let (pi1, fit1) = stay_probabilities(&all, "R1", plan.covariates(1))?;

    let at_risk: Vec<usize> = (0..data.len()).filter(|&i| data[i].r1 == 0).collect();
    let at_risk_rows: Vec<&TrialRecord<T>> = at_risk.iter().map(|&i| &data[i]).collect();
    let (pi2, fit2) = if at_risk_rows.is_empty() {
        (Vec::new(), None)
    } else {
        stay_probabilities(&at_risk_rows, "R2", plan.covariates(2))?
    };

    let floor = T::c(WEIGHT_FLOOR);
    let mut floored = 0;
    let mut floor_pi = |p: T| {
        if p < floor {
            floored += 1;
            floor
        } else {
            p
        }
    };
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (j, &i) in at_risk.iter().enumerate() {
        if data[i].r2 == 0 {
            rows.push(&data[i]);
            weights.push(T::one() / (floor_pi(pi1[i]) * floor_pi(pi2[j])));
        }
    }
    for arm in [0, 1] {
        if !rows.iter().any(|r| r.a == arm) {
            return Err(EstimatorError::NoRescueFree(arm));
        }
    }

    let fit = regress_on_a_l0(&rows, Some(&weights))?;
    let point = fit.coefficient("A").expect("A column");
    if !point.is_finite() {
        return Err(EstimatorError::NonFinite);
    }
    let converged = [fit1, fit2].iter().flatten().all(|f| f.converged);
    Ok(EffectEstimate {
        estimator: EstimatorSpec::Ipw(plan.structure).name(),
        point,
        variance: None,
        diagnostics: Diagnostics {
            retained: rows.len(),
            weight_min: weights.iter().copied().reduce(T::min),
            weight_max: weights.iter().copied().reduce(T::max),
            floored_weights: floored,
            models_converged: converged,
            ..Diagnostics::default()
        },
    })
}

/// Two-visit data in long form with missingness markers.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTrial<T> {
    /// Columns `L0, A, L1, D1, R1, L2, D2, R2, Y`.
    pub columns: BTreeMap<String, Vec<T>>,
    /// `missing[v][i]` marks variable `v` of subject `i` as deleted.
    pub missing: BTreeMap<String, Vec<bool>>,
}

pub const TRIAL_VARIABLES: [&str; 9] = ["L0", "A", "L1", "D1", "R1", "L2", "D2", "R2", "Y"];

impl<T: Real> MaskedTrial<T> {
    pub fn len(&self) -> usize {
        self.columns["A"].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, variable: &str, subject: usize) -> bool {
        self.missing[variable][subject]
    }

    /// Number of deleted values across all variables.
    pub fn missing_count(&self) -> usize {
        self.missing.values().flatten().filter(|&&m| m).count()
    }
}

/// Mark the post-rescue values the assumed structure treats as
/// unobservable: for each visit k with `R_k = 1`, the variables downstream
/// of `R_k`.
pub fn delete_post_ice<T: Real>(data: &[TrialRecord<T>], assumed: CausalStructure) -> MaskedTrial<T> {
    let plan = derive_adjustment_plan(assumed, 2).expect("two-visit plan");
    delete_with_plan(data, &plan)
}

fn delete_with_plan<T: Real>(data: &[TrialRecord<T>], plan: &AdjustmentPlan) -> MaskedTrial<T> {
    let columns = TRIAL_VARIABLES
        .iter()
        .map(|&v| {
            (
                v.to_string(),
                data.iter().map(|r| r.get(v).expect("variable")).collect(),
            )
        })
        .collect();
    let mut missing: BTreeMap<String, Vec<bool>> = TRIAL_VARIABLES
        .iter()
        .map(|&v| (v.to_string(), vec![false; data.len()]))
        .collect();
    for k in 1..=plan.periods {
        let rescue = format!("R{k}");
        for (i, rec) in data.iter().enumerate() {
            if rec.get(&rescue) == Some(T::one()) {
                for v in plan.deleted(k) {
                    missing.get_mut(v).expect("deleted variable")[i] = true;
                }
            }
        }
    }
    MaskedTrial { columns, missing }
}

fn is_binary(variable: &str) -> bool {
    variable.starts_with('D')
}

enum ImputationModel<T> {
    Linear(LinearFit<T>),
    Logistic(LogisticFit<T>),
    /// Every observed value is 0 (binary) so imputations are 0 too.
    Constant(T),
}

struct FittedStep<T> {
    variable: String,
    covariates: Vec<String>,
    model: ImputationModel<T>,
    targets: Vec<usize>,
}

fn design_row<T: Real>(columns: &BTreeMap<String, Vec<T>>, covariates: &[String], i: usize) -> Vec<T> {
    std::iter::once(T::one())
        .chain(covariates.iter().map(|c| columns[c][i]))
        .collect()
}

/// Sequential multiple imputation of post-rescue values under the assumed
/// structure, then OLS of Y on (intercept, A, L0) per completed dataset,
/// pooled by Rubin's rules.
///
/// Missingness is monotone, so every imputation model is fitted once on the
/// subjects observing the variable and its predictors; each imputation then
/// draws fresh parameters from the models' approximate posteriors and fills
/// the variables in temporal order.
pub fn estimate_mi<T: Real>(
    data: &[TrialRecord<T>],
    assumed: CausalStructure,
    m: usize,
    seed: u64,
) -> Result<EffectEstimate<T>, EstimatorError> {
    let plan = derive_adjustment_plan(assumed, 2).expect("two-visit plan");
    estimate_mi_with_plan(data, &plan, m, seed)
}

pub fn estimate_mi_with_plan<T: Real>(
    data: &[TrialRecord<T>],
    plan: &AdjustmentPlan,
    m: usize,
    seed: u64,
) -> Result<EffectEstimate<T>, EstimatorError> {
    if m < 2 {
        return Err(EstimatorError::TooFewImputations(m));
    }
    check_arms(data)?;
    let masked = delete_with_plan(data, plan);
    let n = masked.len();

    let mut steps = Vec::with_capacity(plan.imputation.len());
    let mut converged = true;
    for step in &plan.imputation {
        let v = &step.variable;
        let observed: Vec<usize> = (0..n)
            .filter(|&i| !masked.is_missing(v, i) && !step.covariates.iter().any(|c| masked.is_missing(c, i)))
            .collect();
        let targets: Vec<usize> = (0..n).filter(|&i| masked.is_missing(v, i)).collect();
        if targets.is_empty() {
            continue;
        }
        let name = format!("{v} imputation model");
        let x = DesignMatrix::with_intercept(
            step.covariates.iter().cloned(),
            step.covariates
                .iter()
                .map(|c| observed.iter().map(|&i| masked.columns[c][i]).collect())
                .collect(),
        )
        .map_err(model_err(name.clone()))?;
        let y: Vec<T> = observed.iter().map(|&i| masked.columns[v][i]).collect();
        let model = if is_binary(v) {
            if y.iter().all(|&b| b == T::zero()) {
                ImputationModel::Constant(T::zero())
            } else {
                let fit = logistic_fit(&x, &y).map_err(model_err(name))?;
                converged &= fit.converged;
                ImputationModel::Logistic(fit)
            }
        } else {
            ImputationModel::Linear(ols_fit(&x, &y).map_err(model_err(name))?)
        };
        steps.push(FittedStep {
            variable: v.clone(),
            covariates: step.covariates.clone(),
            model,
            targets,
        });
    }
    let imputed_values = steps.iter().map(|s| s.targets.len()).sum();

    let source = NoiseSource::new(seed, MI_DOMAIN);
    let a_col: Vec<T> = masked.columns["A"].clone();
    let l0_col: Vec<T> = masked.columns["L0"].clone();
    let mut estimates = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for j in 0..m {
        let mut rng = source.sequential(j as u64);
        let mut columns = masked.columns.clone();
        for step in &steps {
            match &step.model {
                ImputationModel::Constant(c) => {
                    for &i in &step.targets {
                        columns.get_mut(&step.variable).expect("column")[i] = *c;
                    }
                }
                ImputationModel::Linear(fit) => {
                    let draw = fit.posterior_draw(&mut rng);
                    let sigma = draw.residual_variance.expect("linear draw").sqrt();
                    for &i in &step.targets {
                        let row = design_row(&columns, &step.covariates, i);
                        let mean: T = row.iter().zip(&draw.coefficients).map(|(&x, &b)| x * b).sum();
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        columns.get_mut(&step.variable).expect("column")[i] = mean + sigma * T::c(z);
                    }
                }
                ImputationModel::Logistic(fit) => {
                    let draw = fit.posterior_draw(&mut rng);
                    for &i in &step.targets {
                        let row = design_row(&columns, &step.covariates, i);
                        let eta: T = row.iter().zip(&draw.coefficients).map(|(&x, &b)| x * b).sum();
                        let u: f64 = rng.random();
                        let value = if u < expit(eta).to_f64_lossy() {
                            T::one()
                        } else {
                            T::zero()
                        };
                        columns.get_mut(&step.variable).expect("column")[i] = value;
                    }
                }
            }
        }
        let x = DesignMatrix::with_intercept(["A", "L0"], vec![a_col.clone(), l0_col.clone()])
            .map_err(model_err("outcome regression"))?;
        let fit = ols_fit(&x, &columns["Y"]).map_err(model_err("outcome regression"))?;
        let (point, variance) = coefficient_of_a(&fit)?;
        estimates.push(point);
        variances.push(variance);
    }
    let pooled = rubins_pool(&estimates, &variances).map_err(model_err("pooling"))?;
    Ok(EffectEstimate {
        estimator: EstimatorSpec::Mi {
            assumed: plan.structure,
            m,
        }
        .name(),
        point: pooled.point,
        variance: Some(pooled.total_var),
        diagnostics: Diagnostics {
            retained: n,
            models_converged: converged,
            imputed_values,
            pooled: Some(pooled),
            ..Diagnostics::default()
        },
    })
}

/// One-visit cross-world imputation estimator: per arm, the mean of
/// `(1 − R) Y + R · Ê(Y | A = a, L0, L1, R = 0, D)`, where the outcome model
/// is linear in (L0, L1, D) (plus D×L0 and D×L1 with `interaction`) and
/// fitted among rescue-free subjects of that arm.
pub fn estimate_crossworld<T: Real>(
    data: &[SinglePeriodObservation<T>],
    interaction: bool,
) -> Result<EffectEstimate<T>, EstimatorError> {
    let mut means = [T::zero(); 2];
    let mut retained = 0;
    for arm in [0u8, 1] {
        let rows: Vec<&SinglePeriodObservation<T>> = data.iter().filter(|r| r.a == arm).collect();
        if rows.is_empty() {
            return Err(EstimatorError::EmptyArm(arm));
        }
        let fit_rows: Vec<&SinglePeriodObservation<T>> = rows.iter().copied().filter(|r| r.r == 0).collect();
        retained += fit_rows.len();
        let features = |r: &SinglePeriodObservation<T>| {
            let d = T::indicator(r.d);
            let mut v = vec![T::one(), r.l0, r.l1, d];
            if interaction {
                v.push(d * r.l0);
                v.push(d * r.l1);
            }
            v
        };
        let fit = if rows.iter().any(|r| r.r == 1) {
            if fit_rows.is_empty() {
                return Err(EstimatorError::NoRescueFree(arm));
            }
            let mut names = vec!["L0", "L1", "D"];
            if interaction {
                names.extend(["D:L0", "D:L1"]);
            }
            let feats: Vec<Vec<T>> = fit_rows.iter().map(|r| features(r)).collect();
            let columns = (1..=names.len())
                .map(|j| feats.iter().map(|f| f[j]).collect())
                .collect();
            let model = format!("outcome model (A={arm})");
            let x = DesignMatrix::with_intercept(names, columns).map_err(model_err(model.clone()))?;
            let y: Vec<T> = fit_rows.iter().map(|r| r.y).collect();
            Some(ols_fit(&x, &y).map_err(model_err(model))?)
        } else {
            None
        };
        let total: T = rows
            .iter()
            .map(|r| match (&fit, r.r) {
                (Some(f), 1) => f.predict(&features(r)),
                _ => r.y,
            })
            .sum();
        means[arm as usize] = total / T::from_usize_lossy(rows.len());
    }
    let point = means[1] - means[0];
    if !point.is_finite() {
        return Err(EstimatorError::NonFinite);
    }
    Ok(EffectEstimate {
        estimator: EstimatorSpec::CrossWorld { interaction }.name(),
        point,
        variance: None,
        diagnostics: Diagnostics {
            retained,
            models_converged: true,
            ..Diagnostics::default()
        },
    })
}

/// Dispatch a two-visit estimator. `seed` is used only by MI.
pub fn estimate<T: Real>(
    data: &[TrialRecord<T>],
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<EffectEstimate<T>, EstimatorError> {
    match *spec {
        EstimatorSpec::TreatmentPolicy => estimate_treatment_policy(data),
        EstimatorSpec::Naive => estimate_naive(data),
        EstimatorSpec::Ipw(s) => estimate_ipw(data, s),
        EstimatorSpec::Mi { assumed, m } => estimate_mi(data, assumed, m, seed),
        EstimatorSpec::CrossWorld { .. } => Err(EstimatorError::UnknownEstimator(
            "crossworld needs one-visit data".into(),
        )),
    }
}
