//! Trial data under the three D/R orderings, counterfactual generation and
//! Monte-Carlo truths.
//!
//! Every subject's noise comes from its own counter-based substream with one
//! fixed slot per variable ([`crate::rng`]), so factual and counterfactual
//! runs with the same seed share noise variable by variable, and output does
//! not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjustment::CausalStructure;
use crate::rng::{derive_seed, NoiseSource, SubjectNoise};
use crate::scalar::{expit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("subject count must be at least 1")]
    EmptySample,
    #[error("only two-visit trials are generated (got {0} periods)")]
    UnsupportedPeriods(usize),
    #[error("treatment arm must be 0 or 1 (got {0})")]
    InvalidArm(u8),
    #[error("non-finite coefficient `{0}`")]
    NonFinite(&'static str),
}

/// Seed domains, so factual trials, oracle arms and single-visit data never
/// share substreams by accident.
mod domain {
    pub const TRIAL: u64 = 0;
    pub const ORACLE: u64 = 0x0a;
    pub const SINGLE: u64 = 0x51;
    pub const SINGLE_ORACLE: u64 = 0x5a;
}

/// Noise slot of each variable in the two-visit trial.
mod slot {
    pub const L0: usize = 0;
    pub const A: usize = 1;
    pub const L1: usize = 2;
    pub const D1: usize = 3;
    pub const R1: usize = 4;
    pub const L2: usize = 5;
    pub const D2: usize = 6;
    pub const R2: usize = 7;
    pub const Y: usize = 8;
}

/// Two-visit data-generating mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec<T> {
    pub structure: CausalStructure,
    /// Intercept of every ICE model.
    pub alpha: T,
    /// Effect of L0, A and every L on later variables.
    pub beta: T,
    /// Effect of every ICE on later variables.
    pub gamma: T,
    pub n: usize,
    pub periods: usize,
}

impl<T: Real> ScenarioSpec<T> {
    /// α = −1, β = 0.25, γ = 1, two visits.
    pub fn standard(structure: CausalStructure, n: usize) -> Self {
        Self {
            structure,
            alpha: T::c(-1.0),
            beta: T::c(0.25),
            gamma: T::one(),
            n,
            periods: 2,
        }
    }

    pub fn with_coefficients(mut self, alpha: T, beta: T, gamma: T) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self.gamma = gamma;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n == 0 {
            return Err(DatagenError::EmptySample);
        }
        if self.periods != 2 {
            return Err(DatagenError::UnsupportedPeriods(self.periods));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(DatagenError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// One subject's observed trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord<T> {
    pub l0: T,
    pub a: u8,
    pub l1: T,
    pub d1: u8,
    pub r1: u8,
    pub l2: T,
    pub d2: u8,
    pub r2: u8,
    pub y: T,
}

impl<T: Real> TrialRecord<T> {
    /// Value of a named variable (`L0`, `A`, `L1`, `D1`, `R1`, `L2`, `D2`,
    /// `R2` or `Y`), binaries as 0/1.
    pub fn get(&self, name: &str) -> Option<T> {
        let ind = T::indicator;
        Some(match name {
            "L0" => self.l0,
            "A" => ind(self.a),
            "L1" => self.l1,
            "D1" => ind(self.d1),
            "R1" => ind(self.r1),
            "L2" => self.l2,
            "D2" => ind(self.d2),
            "R2" => ind(self.r2),
            "Y" => self.y,
            _ => return None,
        })
    }

    /// Free of rescue at both visits.
    pub fn rescue_free(&self) -> bool {
        self.r1 == 0 && self.r2 == 0
    }
}

/// Interventions applied when generating counterfactual data. ICEs can only
/// be withheld (fixed at 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionSet {
    pub a: u8,
    pub fix_r: [bool; 2],
    pub fix_d: [bool; 2],
}

impl InterventionSet {
    /// Set A only.
    pub fn assign(a: u8) -> Self {
        Self {
            a,
            fix_r: [false; 2],
            fix_d: [false; 2],
        }
    }

    /// Set A and withhold rescue at both visits.
    pub fn without_rescue(a: u8) -> Self {
        Self {
            a,
            fix_r: [true; 2],
            fix_d: [false; 2],
        }
    }

    /// Set A, withhold rescue and prevent discontinuation at both visits.
    pub fn without_ices(a: u8) -> Self {
        Self {
            a,
            fix_r: [true; 2],
            fix_d: [true; 2],
        }
    }

    pub fn for_pattern(a: u8, pattern: IcePattern) -> Self {
        match pattern {
            IcePattern::None => Self::assign(a),
            IcePattern::FixR => Self::without_rescue(a),
            IcePattern::FixRD => Self::without_ices(a),
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.a > 1 {
            return Err(DatagenError::InvalidArm(self.a));
        }
        Ok(())
    }
}

/// Which ICEs an oracle withholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcePattern {
    /// Nothing withheld: the treatment-policy effect E(Y^{a=1} − Y^{a=0}).
    None,
    /// Rescue withheld: E(Y^{a=1,r=0} − Y^{a=0,r=0}).
    #[serde(rename = "r")]
    FixR,
    /// Rescue withheld and discontinuation prevented.
    #[serde(rename = "rd")]
    FixRD,
}

impl IcePattern {
    pub fn tag(self) -> u64 {
        match self {
            IcePattern::None => 0,
            IcePattern::FixR => 1,
            IcePattern::FixRD => 2,
        }
    }
}

impl std::str::FromStr for IcePattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(IcePattern::None),
            "r" => Ok(IcePattern::FixR),
            "rd" => Ok(IcePattern::FixRD),
            other => Err(format!("unknown ICE pattern `{other}` (expected r, rd or none)")),
        }
    }
}

fn bern<T: Real>(noise: &SubjectNoise, slot: usize, eta: T) -> u8 {
    noise.bernoulli(slot, expit(eta).to_f64_lossy())
}

fn simulate_subject<T: Real>(
    spec: &ScenarioSpec<T>,
    noise: &SubjectNoise,
    iv: Option<&InterventionSet>,
) -> TrialRecord<T> {
    let (alpha, beta, gamma) = (spec.alpha, spec.beta, spec.gamma);
    let fix_r = |k: usize| iv.is_some_and(|v| v.fix_r[k]);
    let fix_d = |k: usize| iv.is_some_and(|v| v.fix_d[k]);
    let ind = T::indicator;

    let l0 = T::c(noise.normal(slot::L0));
    let a = match iv {
        Some(v) => v.a,
        None => noise.bernoulli(slot::A, 0.5),
    };
    let l1 = beta * l0 + beta * ind(a) + T::c(noise.normal(slot::L1));
    let base1 = alpha + beta * (l0 + ind(a) + l1);

    let draw_d1 = |eta: T| if fix_d(0) { 0 } else { bern(noise, slot::D1, eta) };
    let draw_r1 = |eta: T| if fix_r(0) { 0 } else { bern(noise, slot::R1, eta) };
    let (d1, r1) = match spec.structure {
        CausalStructure::NoCrossEffects => (draw_d1(base1), draw_r1(base1)),
        CausalStructure::DPrecedesR => {
            let d1 = draw_d1(base1);
            (d1, draw_r1(base1 + gamma * ind(d1)))
        }
        CausalStructure::RPrecedesD => {
            let r1 = draw_r1(base1);
            (draw_d1(base1 + gamma * ind(r1)), r1)
        }
    };

    let l2 = beta * (l0 + ind(a) + l1) + gamma * ind(d1) + gamma * ind(r1) + T::c(noise.normal(slot::L2));
    let base2 = alpha + beta * (l0 + ind(a) + l1) + beta * l2;

    let draw_d2 = |eta: T| if fix_d(1) { 0 } else { bern(noise, slot::D2, eta) };
    let draw_r2 = |eta: T| if fix_r(1) { 0 } else { bern(noise, slot::R2, eta) };
    let (d2, r2) = match spec.structure {
        CausalStructure::NoCrossEffects => (draw_d2(base2 + gamma * ind(d1)), draw_r2(base2 + gamma * ind(r1))),
        CausalStructure::DPrecedesR => {
            let hist = base2 + gamma * ind(d1) + gamma * ind(r1);
            let d2 = draw_d2(hist);
            (d2, draw_r2(hist + gamma * ind(d2)))
        }
        CausalStructure::RPrecedesD => {
            let hist = base2 + gamma * ind(r1) + gamma * ind(d1);
            let r2 = draw_r2(hist);
            (draw_d2(hist + gamma * ind(r2)), r2)
        }
    };

    let y =
        beta * (l0 + ind(a) + l1 + l2) + gamma * (ind(d1) + ind(r1) + ind(d2) + ind(r2)) + T::c(noise.normal(slot::Y));

    TrialRecord {
        l0,
        a,
        l1,
        d1,
        r1,
        l2,
        d2,
        r2,
        y,
    }
}

/// Factual trial data; deterministic in `(spec, seed)`.
pub fn generate_trial<T: Real>(spec: &ScenarioSpec<T>, seed: u64) -> Result<Vec<TrialRecord<T>>, DatagenError> {
    spec.validate()?;
    let src = NoiseSource::new(seed, domain::TRIAL);
    Ok((0..spec.n as u64)
        .into_par_iter()
        .map(|i| simulate_subject(spec, &src.subject(i), None))
        .collect())
}

/// Counterfactual data under `iv`, sharing noise with [`generate_trial`]
/// for the same seed.
pub fn generate_counterfactual<T: Real>(
    spec: &ScenarioSpec<T>,
    iv: &InterventionSet,
    seed: u64,
) -> Result<Vec<TrialRecord<T>>, DatagenError> {
    spec.validate()?;
    iv.validate()?;
    let src = NoiseSource::new(seed, domain::TRIAL);
    Ok((0..spec.n as u64)
        .into_par_iter()
        .map(|i| simulate_subject(spec, &src.subject(i), Some(iv)))
        .collect())
}

/// Monte-Carlo mean of an arm-level quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmMoments {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

impl ArmMoments {
    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Deterministic parallel mean/variance: fixed-size chunks reduced in
/// index order.
fn moments(n: usize, value: impl Fn(u64) -> f64 + Sync) -> ArmMoments {
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).fold((0.0, 0.0), |(s, ss), i| {
                let v = value(i as u64);
                (s + v, ss + v * v)
            })
        })
        .collect();
    let (s, ss) = partial.iter().fold((0.0, 0.0), |(a, b), &(c, d)| (a + c, b + d));
    let nf = n as f64;
    let mean = s / nf;
    let variance = if n > 1 {
        ((ss - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    ArmMoments { mean, variance, n }
}

/// Difference of two independent arm means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTruth {
    pub tau: f64,
    pub mc_se: f64,
    pub treated: ArmMoments,
    pub control: ArmMoments,
}

impl OracleTruth {
    fn from_arms(treated: ArmMoments, control: ArmMoments) -> Self {
        Self {
            tau: treated.mean - control.mean,
            mc_se: (treated.variance / treated.n as f64 + control.variance / control.n as f64).sqrt(),
            treated,
            control,
        }
    }
}

/// Mean outcome difference between `n_oracle` counterfactual subjects with
/// A = 1 and an independent `n_oracle` with A = 0, withholding the ICEs in
/// `pattern`.
pub fn true_effect_oracle<T: Real>(
    spec: &ScenarioSpec<T>,
    pattern: IcePattern,
    n_oracle: usize,
    seed: u64,
) -> Result<OracleTruth, DatagenError> {
    spec.validate()?;
    if n_oracle == 0 {
        return Err(DatagenError::EmptySample);
    }
    let arm = |a: u8| {
        let iv = InterventionSet::for_pattern(a, pattern);
        let src = NoiseSource::new(derive_seed(seed, &[domain::ORACLE, u64::from(a)]), domain::ORACLE);
        moments(n_oracle, |i| {
            simulate_subject(spec, &src.subject(i), Some(&iv)).y.to_f64_lossy()
        })
    };
    Ok(OracleTruth::from_arms(arm(1), arm(0)))
}

// ---------------------------------------------------------------------------
// One-visit structural equation model with cross-world counterfactuals
// ---------------------------------------------------------------------------

/// Coefficients of the one-visit SEM in which R may affect D:
/// `L1 ~ N(.)`, `R ~ expit(.)`, `D ~ expit(. + d_r·R)`, `Y ~ N(. + y_r R + y_d D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePeriodCoefficients<T> {
    pub l1_l0: T,
    pub l1_a: T,
    pub r_intercept: T,
    pub r_l0: T,
    pub r_a: T,
    pub r_l1: T,
    pub d_intercept: T,
    pub d_l0: T,
    pub d_a: T,
    pub d_l1: T,
    pub d_r: T,
    pub y_l0: T,
    pub y_a: T,
    pub y_l1: T,
    pub y_r: T,
    pub y_d: T,
}

impl<T: Real> SinglePeriodCoefficients<T> {
    /// Intercepts −1, covariate effects 0.25, ICE effects 1.
    pub fn standard() -> Self {
        let (a, b, g) = (T::c(-1.0), T::c(0.25), T::one());
        Self {
            l1_l0: b,
            l1_a: b,
            r_intercept: a,
            r_l0: b,
            r_a: b,
            r_l1: b,
            d_intercept: a,
            d_l0: b,
            d_a: b,
            d_l1: b,
            d_r: g,
            y_l0: b,
            y_a: b,
            y_l1: b,
            y_r: g,
            y_d: g,
        }
    }

    pub fn zeros() -> Self {
        let z = T::zero();
        Self {
            l1_l0: z,
            l1_a: z,
            r_intercept: z,
            r_l0: z,
            r_a: z,
            r_l1: z,
            d_intercept: z,
            d_l0: z,
            d_a: z,
            d_l1: z,
            d_r: z,
            y_l0: z,
            y_a: z,
            y_l1: z,
            y_r: z,
            y_d: z,
        }
    }

    fn all(&self) -> [T; 16] {
        [
            self.l1_l0,
            self.l1_a,
            self.r_intercept,
            self.r_l0,
            self.r_a,
            self.r_l1,
            self.d_intercept,
            self.d_l0,
            self.d_a,
            self.d_l1,
            self.d_r,
            self.y_l0,
            self.y_a,
            self.y_l1,
            self.y_r,
            self.y_d,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePeriodSpec<T> {
    pub coefficients: SinglePeriodCoefficients<T>,
    pub n: usize,
    /// Reuse each variable's noise across intervention worlds.
    pub shared_noise: bool,
}

impl<T: Real> SinglePeriodSpec<T> {
    pub fn standard(n: usize) -> Self {
        Self {
            coefficients: SinglePeriodCoefficients::standard(),
            n,
            shared_noise: true,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n == 0 {
            return Err(DatagenError::EmptySample);
        }
        if self.coefficients.all().iter().any(|v| !v.is_finite()) {
            return Err(DatagenError::NonFinite("single-period coefficient"));
        }
        Ok(())
    }
}

/// Factual one-visit values plus counterfactuals at the subject's own arm a:
/// `D^{a,r}` for r ∈ {0,1} and `Y^{a,r=0,d}` for d ∈ {0,1}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SinglePeriodRecord<T> {
    pub l0: T,
    pub a: u8,
    pub l1: T,
    pub r: u8,
    pub d: u8,
    pub y: T,
    pub d_a_r0: u8,
    pub d_a_r1: u8,
    pub y_a_r0_d0: T,
    pub y_a_r0_d1: T,
}

impl<T: Real> SinglePeriodRecord<T> {
    /// `Y^{a, r=0, D^{a,R^a}}`: rescue withheld, D at its natural value.
    pub fn crossworld_outcome(&self) -> T {
        if self.d == 1 {
            self.y_a_r0_d1
        } else {
            self.y_a_r0_d0
        }
    }

    /// `Y^{a, r=0}`: rescue withheld, D at its value without rescue.
    pub fn hypothetical_outcome(&self) -> T {
        if self.d_a_r0 == 1 {
            self.y_a_r0_d1
        } else {
            self.y_a_r0_d0
        }
    }
}

/// The factual columns of a one-visit record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SinglePeriodObservation<T> {
    pub l0: T,
    pub a: u8,
    pub l1: T,
    pub r: u8,
    pub d: u8,
    pub y: T,
}

impl<T: Real> SinglePeriodRecord<T> {
    pub fn observation(&self) -> SinglePeriodObservation<T> {
        SinglePeriodObservation {
            l0: self.l0,
            a: self.a,
            l1: self.l1,
            r: self.r,
            d: self.d,
            y: self.y,
        }
    }
}

mod sslot {
    pub const L0: usize = 0;
    pub const A: usize = 1;
    pub const L1: usize = 2;
    pub const R: usize = 3;
    pub const D: usize = 4;
    pub const Y: usize = 5;
    // world-specific slots when noise is not shared
    pub const D_R0: usize = 6;
    pub const D_R1: usize = 7;
    pub const Y_R0_D0: usize = 8;
    pub const Y_R0_D1: usize = 9;
}

fn simulate_single<T: Real>(
    spec: &SinglePeriodSpec<T>,
    noise: &SubjectNoise,
    arm: Option<u8>,
) -> SinglePeriodRecord<T> {
    let c = &spec.coefficients;
    let ind = T::indicator;
    let l0 = T::c(noise.normal(sslot::L0));
    let a = arm.unwrap_or_else(|| noise.bernoulli(sslot::A, 0.5));
    let l1 = c.l1_l0 * l0 + c.l1_a * ind(a) + T::c(noise.normal(sslot::L1));
    let r = bern(
        noise,
        sslot::R,
        c.r_intercept + c.r_l0 * l0 + c.r_a * ind(a) + c.r_l1 * l1,
    );

    let d_eta = |rv: u8| c.d_intercept + c.d_l0 * l0 + c.d_a * ind(a) + c.d_l1 * l1 + c.d_r * ind(rv);
    let (d_slot_r0, d_slot_r1) = if spec.shared_noise {
        (sslot::D, sslot::D)
    } else {
        (sslot::D_R0, sslot::D_R1)
    };
    let d_a_r0 = bern(noise, d_slot_r0, d_eta(0));
    let d_a_r1 = bern(noise, d_slot_r1, d_eta(1));
    let d = if r == 1 { d_a_r1 } else { d_a_r0 };

    let y_mean = |rv: u8, dv: u8| c.y_l0 * l0 + c.y_a * ind(a) + c.y_l1 * l1 + c.y_r * ind(rv) + c.y_d * ind(dv);
    let (y_slot_d0, y_slot_d1) = if spec.shared_noise {
        (sslot::Y, sslot::Y)
    } else {
        (sslot::Y_R0_D0, sslot::Y_R0_D1)
    };
    let y_a_r0_d0 = y_mean(0, 0) + T::c(noise.normal(y_slot_d0));
    let y_a_r0_d1 = y_mean(0, 1) + T::c(noise.normal(y_slot_d1));
    let y = match (r, d) {
        (0, 0) => y_a_r0_d0,
        (0, _) => y_a_r0_d1,
        _ => y_mean(r, d) + T::c(noise.normal(sslot::Y)),
    };

    SinglePeriodRecord {
        l0,
        a,
        l1,
        r,
        d,
        y,
        d_a_r0,
        d_a_r1,
        y_a_r0_d0,
        y_a_r0_d1,
    }
}

/// One-visit data with cross-world columns; exogenous noise is drawn once
/// per subject and reused in every world when `shared_noise` is set.
pub fn generate_single_period<T: Real>(
    spec: &SinglePeriodSpec<T>,
    seed: u64,
) -> Result<Vec<SinglePeriodRecord<T>>, DatagenError> {
    spec.validate()?;
    let src = NoiseSource::new(seed, domain::SINGLE);
    Ok((0..spec.n as u64)
        .into_par_iter()
        .map(|i| simulate_single(spec, &src.subject(i), None))
        .collect())
}

/// Per-arm means and contrast of a one-visit potential outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePeriodTruth {
    pub treated: ArmMoments,
    pub control: ArmMoments,
    pub contrast: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinglePeriodTarget {
    /// `Y^{a, r=0, D^{a,R^a}}`.
    CrossWorld,
    /// `Y^{a, r=0}`.
    WithoutRescue,
}

pub fn single_period_oracle<T: Real>(
    spec: &SinglePeriodSpec<T>,
    target: SinglePeriodTarget,
    n_oracle: usize,
    seed: u64,
) -> Result<SinglePeriodTruth, DatagenError> {
    spec.validate()?;
    if n_oracle == 0 {
        return Err(DatagenError::EmptySample);
    }
    let arm = |a: u8| {
        let src = NoiseSource::new(
            derive_seed(seed, &[domain::SINGLE_ORACLE, u64::from(a)]),
            domain::SINGLE_ORACLE,
        );
        moments(n_oracle, |i| {
            let rec = simulate_single(spec, &src.subject(i), Some(a));
            match target {
                SinglePeriodTarget::CrossWorld => rec.crossworld_outcome(),
                SinglePeriodTarget::WithoutRescue => rec.hypothetical_outcome(),
            }
            .to_f64_lossy()
        })
    };
    let t = OracleTruth::from_arms(arm(1), arm(0));
    Ok(SinglePeriodTruth {
        treated: t.treated,
        control: t.control,
        contrast: t.tau,
        mc_se: t.mc_se,
    })
}

/// Monte-Carlo truth of the cross-world estimand E(Y^{1,r=0,D^{1,R^1}}) − E(Y^{0,r=0,D^{0,R^0}}).
pub fn crossworld_oracle<T: Real>(
    spec: &SinglePeriodSpec<T>,
    n_oracle: usize,
    seed: u64,
) -> Result<SinglePeriodTruth, DatagenError> {
    single_period_oracle(spec, SinglePeriodTarget::CrossWorld, n_oracle, seed)
}
