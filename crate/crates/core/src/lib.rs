//! Simulation and estimation engine for trial estimands that handle
//! treatment discontinuation (D) with the treatment-policy strategy and
//! rescue medication (R) with the hypothetical strategy.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjustment;
pub mod cli;
pub mod datagen;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod rng;
pub mod scalar;

pub type Trial = Vec<datagen::TrialRecord<f64>>;
pub type TrialRecord = datagen::TrialRecord<f64>;
pub type ScenarioSpec = datagen::ScenarioSpec<f64>;
pub type SinglePeriodSpec = datagen::SinglePeriodSpec<f64>;
pub type SinglePeriodRecord = datagen::SinglePeriodRecord<f64>;
pub type EffectEstimate = estimators::EffectEstimate<f64>;
pub type DesignMatrix = numerics::DesignMatrix<f64>;
pub type LinearFit = numerics::LinearFit<f64>;
pub type LogisticFit = numerics::LogisticFit<f64>;
pub type PooledEstimate = numerics::PooledEstimate<f64>;
