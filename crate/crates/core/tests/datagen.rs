//! Generator and oracle checks against closed forms and forced-zero identities.

use icepath::adjustment::CausalStructure;
use icepath::datagen::{
    crossworld_oracle, generate_counterfactual, generate_single_period, generate_trial, single_period_oracle,
    true_effect_oracle, IcePattern, InterventionSet, ScenarioSpec, SinglePeriodCoefficients, SinglePeriodSpec,
    SinglePeriodTarget,
};
use icepath::scalar::expit;
use proptest::prelude::*;

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn expit_values() {
    assert_eq!(expit(0.0f64), 0.5);
    assert!((expit(-1.0f64) - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
    assert!((expit(-1.0f64) - 0.26894).abs() < 1e-5);
    assert!((expit(2.5f64) - (1.0 - expit(-2.5f64))).abs() < 1e-15);
    assert!(expit(800.0f64) <= 1.0 && expit(-800.0f64) >= 0.0);
}

#[test]
fn rescue_rate_without_covariate_effects() {
    let spec =
        ScenarioSpec::<f64>::standard(CausalStructure::NoCrossEffects, 100_000).with_coefficients(-1.0, 0.0, 0.0);
    let data = generate_trial(&spec, 41).unwrap();
    let p = expit(-1.0f64);
    let rate = data.iter().filter(|r| r.r1 == 1).count() as f64 / data.len() as f64;
    let half_width = 2.576 * (p * (1.0 - p) / data.len() as f64).sqrt();
    assert!((rate - p).abs() <= half_width, "{rate}");
}

#[test]
fn mean_of_first_visit_covariate_in_treated_arm() {
    let spec = ScenarioSpec::<f64>::standard(CausalStructure::NoCrossEffects, 100_000);
    let data = generate_trial(&spec, 42).unwrap();
    let l1: Vec<f64> = data.iter().filter(|r| r.a == 1).map(|r| r.l1).collect();
    let n = l1.len() as f64;
    let mean = l1.iter().sum::<f64>() / n;
    let var = l1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 0.25).abs() <= 3.0 * (var / n).sqrt(), "{mean}");
}

#[test]
fn fixing_ices_equals_zeroing_their_effects() {
    for s in CausalStructure::ALL {
        let spec = ScenarioSpec::<f64>::standard(s, 3000);
        let zeroed = spec.with_coefficients(-1.0, 0.25, 0.0);
        for a in [0, 1] {
            let fixed = generate_counterfactual(&spec, &InterventionSet::without_ices(a), 9).unwrap();
            let natural = generate_counterfactual(&zeroed, &InterventionSet::assign(a), 9).unwrap();
            for (f, z) in fixed.iter().zip(&natural) {
                assert_eq!((f.l0, f.l1, f.l2, f.y), (z.l0, z.l1, z.l2, z.y));
                assert_eq!((f.d1, f.r1, f.d2, f.r2), (0, 0, 0, 0));
            }
        }
    }
}

#[test]
fn truth_without_ice_effects_is_path_traced_value() {
    for s in CausalStructure::ALL {
        let spec = ScenarioSpec::<f64>::standard(s, 1).with_coefficients(-1.0, 0.25, 0.0);
        let truth = true_effect_oracle(&spec, IcePattern::FixR, 1_000_000, 3).unwrap();
        assert!((truth.tau - 0.390625).abs() <= 3.0 * truth.mc_se, "{s}: {}", truth.tau);

        let both = true_effect_oracle(&spec, IcePattern::FixRD, 1_000_000, 4).unwrap();
        let combined = (truth.mc_se.powi(2) + both.mc_se.powi(2)).sqrt();
        assert!((truth.tau - both.tau).abs() <= 3.0 * combined, "{s}");
    }
}

#[test]
fn generation_is_independent_of_thread_count() {
    let spec = ScenarioSpec::<f64>::standard(CausalStructure::RPrecedesD, 20_000);
    let one = pool(1).install(|| generate_trial(&spec, 77).unwrap());
    let four = pool(4).install(|| generate_trial(&spec, 77).unwrap());
    assert_eq!(one, four);

    let t1 = pool(1).install(|| true_effect_oracle(&spec, IcePattern::FixR, 50_000, 5).unwrap());
    let t4 = pool(4).install(|| true_effect_oracle(&spec, IcePattern::FixR, 50_000, 5).unwrap());
    assert_eq!(t1.tau.to_bits(), t4.tau.to_bits());
    assert_eq!(t1.mc_se.to_bits(), t4.mc_se.to_bits());

    let sp = SinglePeriodSpec::<f64>::standard(20_000);
    let s1 = pool(1).install(|| generate_single_period(&sp, 8).unwrap());
    let s3 = pool(3).install(|| generate_single_period(&sp, 8).unwrap());
    assert_eq!(s1, s3);
}

#[test]
fn factual_values_match_counterfactuals_at_factual_settings() {
    let data = generate_single_period(&SinglePeriodSpec::<f64>::standard(20_000), 12).unwrap();
    assert!(data.iter().any(|r| r.r == 1) && data.iter().any(|r| r.r == 0));
    for rec in &data {
        let expected_d = if rec.r == 1 { rec.d_a_r1 } else { rec.d_a_r0 };
        assert_eq!(rec.d, expected_d);
        if rec.r == 0 {
            let expected_y = if rec.d == 1 { rec.y_a_r0_d1 } else { rec.y_a_r0_d0 };
            assert_eq!(rec.y, expected_y);
            assert_eq!(rec.crossworld_outcome(), rec.hypothetical_outcome());
        }
    }
}

#[test]
fn without_rescue_effect_on_discontinuation_worlds_agree() {
    let mut spec = SinglePeriodSpec::<f64>::standard(10_000);
    spec.coefficients.d_r = 0.0;
    for rec in generate_single_period(&spec, 13).unwrap() {
        assert_eq!(rec.d_a_r0, rec.d_a_r1);
    }
}

#[test]
fn direct_effect_only_sem_has_that_contrast() {
    let mut c = SinglePeriodCoefficients::<f64>::zeros();
    c.y_a = 0.7;
    let spec = SinglePeriodSpec {
        coefficients: c,
        n: 1,
        shared_noise: true,
    };
    let t = crossworld_oracle(&spec, 200_000, 14).unwrap();
    assert!((t.contrast - 0.7).abs() <= 3.0 * t.mc_se, "{}", t.contrast);
}

#[test]
fn rare_rescue_makes_crossworld_equal_hypothetical() {
    let mut spec = SinglePeriodSpec::<f64>::standard(1);
    spec.coefficients.r_intercept = -30.0;
    let cw = crossworld_oracle(&spec, 200_000, 15).unwrap();
    let hy = single_period_oracle(&spec, SinglePeriodTarget::WithoutRescue, 200_000, 16).unwrap();
    let combined = (cw.mc_se.powi(2) + hy.mc_se.powi(2)).sqrt();
    assert!((cw.contrast - hy.contrast).abs() <= 3.0 * combined);
}

#[test]
fn no_discontinuation_effect_makes_crossworld_equal_hypothetical() {
    let mut spec = SinglePeriodSpec::<f64>::standard(5000);
    spec.coefficients.y_d = 0.0;
    for rec in generate_single_period(&spec, 17).unwrap() {
        assert_eq!(rec.crossworld_outcome(), rec.hypothetical_outcome());
    }
    let cw = crossworld_oracle(&spec, 200_000, 18).unwrap();
    let hy = single_period_oracle(&spec, SinglePeriodTarget::WithoutRescue, 200_000, 19).unwrap();
    let combined = (cw.mc_se.powi(2) + hy.mc_se.powi(2)).sqrt();
    assert!((cw.contrast - hy.contrast).abs() <= 3.0 * combined);
}

#[test]
fn crossworld_mean_is_stable_across_seeds() {
    let spec = SinglePeriodSpec::<f64>::standard(1);
    let truths: Vec<_> = (0..10)
        .map(|s| crossworld_oracle(&spec, 100_000, 100 + s).unwrap())
        .collect();
    let mean = truths.iter().map(|t| t.treated.mean).sum::<f64>() / 10.0;
    for t in &truths {
        // the deviation from the pooled mean has variance se²·(9/10)
        let se = t.treated.std_error() * (0.9f64).sqrt();
        assert!(
            (t.treated.mean - mean).abs() <= 3.0 * se,
            "{} vs {mean}",
            t.treated.mean
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_data(seed in any::<u64>(), s in 0usize..3, n in 1usize..200) {
        let spec = ScenarioSpec::<f64>::standard(CausalStructure::ALL[s], n);
        prop_assert_eq!(generate_trial(&spec, seed).unwrap(), generate_trial(&spec, seed).unwrap());
    }

    #[test]
    fn factual_data_agrees_with_assigned_arm_world(seed in any::<u64>(), s in 0usize..3) {
        let spec = ScenarioSpec::<f64>::standard(CausalStructure::ALL[s], 200);
        let data = generate_trial(&spec, seed).unwrap();
        let treated = generate_counterfactual(&spec, &InterventionSet::assign(1), seed).unwrap();
        let control = generate_counterfactual(&spec, &InterventionSet::assign(0), seed).unwrap();
        for (i, rec) in data.iter().enumerate() {
            let world = if rec.a == 1 { &treated[i] } else { &control[i] };
            prop_assert_eq!(rec, world);
        }
    }

    #[test]
    fn fixing_rescue_forces_only_rescue(seed in any::<u64>(), s in 0usize..3, a in 0u8..2) {
        let spec = ScenarioSpec::<f64>::standard(CausalStructure::ALL[s], 200);
        let cf = generate_counterfactual(&spec, &InterventionSet::without_rescue(a), seed).unwrap();
        prop_assert!(cf.iter().all(|r| r.r1 == 0 && r.r2 == 0 && r.a == a));
    }
}
