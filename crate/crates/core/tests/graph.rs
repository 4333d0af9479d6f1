//! d-separation against exhaustive path enumeration, SWIG structure
//! properties, and the scenario graphs' exchangeability results.

use std::collections::BTreeSet;

use icepath::adjustment::{
    check_exchangeability, derive_adjustment_plan, exchangeable_in, scenario_dag, with_unmeasured_ice_cause,
    CausalStructure,
};
use icepath::graph::{swig_transform, CausalGraph, Half, Interventions, NodeKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force_d_separated, random_dag};

#[test]
fn d_separation_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd5e9);
    let mut queries = 0;
    let mut separated = 0;
    while queries < 12_000 {
        let n = rng.random_range(2..=8);
        let density = rng.random_range(0.15..0.7);
        let g = random_dag(&mut rng, n, density);
        for _ in 0..20 {
            let x = rng.random_range(0..n);
            let mut y = rng.random_range(0..n);
            while y == x {
                y = rng.random_range(0..n);
            }
            let (xs, ys) = (format!("V{x}"), format!("V{y}"));
            let z: BTreeSet<String> = (0..n)
                .filter(|&i| i != x && i != y && rng.random_bool(0.35))
                .map(|i| format!("V{i}"))
                .collect();
            let zr: Vec<&str> = z.iter().map(String::as_str).collect();
            let fast = g.d_separated(&xs, &ys, &zr).unwrap();
            assert_eq!(
                fast,
                brute_force_d_separated(&g, &xs, &ys, &z),
                "{g}\n{xs} vs {ys} given {z:?}"
            );
            separated += usize::from(fast);
            queries += 1;
        }
    }
    // the battery exercises both outcomes
    assert!(separated > 1000 && separated < queries - 1000, "{separated}/{queries}");
}

#[test]
fn swig_d_separation_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5916);
    for _ in 0..400 {
        let n = rng.random_range(3..=7);
        let g = random_dag(&mut rng, n, 0.45);
        let iv: Interventions = (0..n)
            .filter(|_| rng.random_bool(0.3))
            .map(|i| (format!("V{i}"), "0".to_string()))
            .collect();
        let s = swig_transform(&g, &iv).unwrap();
        let fixed: BTreeSet<String> = s
            .graph()
            .node_names()
            .into_iter()
            .filter(|m| s.is_fixed(m))
            .map(String::from)
            .collect();
        let random: Vec<String> = s
            .graph()
            .node_names()
            .into_iter()
            .filter(|m| !s.is_fixed(m))
            .map(String::from)
            .collect();
        for _ in 0..10 {
            let x = &random[rng.random_range(0..random.len())];
            let y = &random[rng.random_range(0..random.len())];
            if x == y {
                continue;
            }
            let z: BTreeSet<String> = random
                .iter()
                .filter(|m| *m != x && *m != y && rng.random_bool(0.3))
                .cloned()
                .collect();
            let zr: Vec<&str> = z.iter().map(String::as_str).collect();
            let with_fixed: BTreeSet<String> = z.union(&fixed).cloned().collect();
            assert_eq!(
                s.d_separated(x, y, &zr).unwrap(),
                brute_force_d_separated(s.graph(), x, y, &with_fixed)
            );
        }
    }
}

#[test]
fn textbook_cases() {
    let chain = CausalGraph::observed(["A", "B", "C"], [("A", "B"), ("B", "C")]).unwrap();
    assert!(chain.d_separated("A", "C", &["B"]).unwrap());
    let collider = CausalGraph::observed(["A", "B", "C"], [("A", "C"), ("B", "C")]).unwrap();
    assert!(!collider.d_separated("A", "B", &["C"]).unwrap());
}

#[test]
fn hidden_common_cause_opens_rescue_to_discontinuation() {
    let g = with_unmeasured_ice_cause(&scenario_dag(CausalStructure::NoCrossEffects, 1).unwrap(), 1).unwrap();
    assert_eq!(g.kind("U"), Some(NodeKind::Unobserved));
    assert!(!g.d_separated("R1", "D1", &["A", "L0", "L1"]).unwrap());
}

#[test]
fn scenario_dag_examples() {
    let g = scenario_dag(CausalStructure::NoCrossEffects, 2).unwrap();
    for (p, c) in g.edges() {
        let ice = |n: &str| n.starts_with('D') || n.starts_with('R');
        assert!(!(ice(p) && ice(c) && p[..1] != c[..1]), "{p}->{c}");
    }
    let g = scenario_dag(CausalStructure::DPrecedesR, 2).unwrap();
    for (p, c) in [("D1", "R1"), ("D1", "R2"), ("D2", "R2"), ("R1", "D2")] {
        assert!(g.has_edge(p, c));
    }
    assert_eq!(scenario_dag(CausalStructure::NoCrossEffects, 1).unwrap().len(), 6);
}

#[test]
fn swig_examples() {
    let g = scenario_dag(CausalStructure::NoCrossEffects, 1).unwrap();
    let iv: Interventions = [("A".into(), "a".into())].into();
    let s = swig_transform(&g, &iv).unwrap();
    for v in ["D1", "R1", "Y"] {
        assert_eq!(s.label(v).unwrap().to_string(), format!("{v}^{{A=a}}"));
    }

    let g = scenario_dag(CausalStructure::DPrecedesR, 1).unwrap();
    let iv: Interventions = [("A".into(), "a".into()), ("R1".into(), "0".into())].into();
    let s = swig_transform(&g, &iv).unwrap();
    assert_eq!(s.graph().children("R1=0").unwrap(), vec!["Y"]);
    assert!(s.graph().has_edge("D1", "R1"));
    assert_eq!(s.label("Y").unwrap().to_string(), "Y^{A=a,R1=0}");
    assert_eq!(s.label("D1").unwrap().to_string(), "D1^{A=a}");
}

/// Every plan derived from a DAG passes its own exchangeability check; with
/// unmeasured common causes of D_k and R_k only plans that adjust for D do.
#[test]
fn derived_plans_and_exchangeability() {
    use CausalStructure::*;
    for s in CausalStructure::ALL {
        for periods in [1, 2] {
            let plan = derive_adjustment_plan(s, periods).unwrap();
            assert!(
                check_exchangeability(s, periods, &plan, false).unwrap(),
                "{s} {periods}"
            );
            let hidden = check_exchangeability(s, periods, &plan, true).unwrap();
            assert_eq!(hidden, s == DPrecedesR, "{s} {periods}");
        }
    }
    let plan = derive_adjustment_plan(DPrecedesR, 2).unwrap();
    let omit_d = plan.clone().with_covariates(1, &["A", "L0", "L1"]);
    assert!(!check_exchangeability(DPrecedesR, 2, &omit_d, true).unwrap());
    let omit_d2 = plan.with_covariates(2, &["A", "L0", "L1", "L2", "D1"]);
    assert!(!check_exchangeability(DPrecedesR, 2, &omit_d2, false).unwrap());
}

/// Under r-first D1 is downstream of R1, so it is deleted after rescue and
/// kept out of the visit-1 model even though the SWIG check (which reads D1
/// as its rescue-free potential value) would tolerate it.
#[test]
fn r_first_treats_d1_as_post_rescue() {
    let g = scenario_dag(CausalStructure::RPrecedesD, 2).unwrap();
    assert!(g.descendants("R1").unwrap().contains("D1"));
    let plan = derive_adjustment_plan(CausalStructure::RPrecedesD, 2).unwrap();
    assert!(exchangeable_in(&g, 2, &plan).unwrap());
    assert!(!plan.covariates(1).iter().any(|c| c == "D1"));
    assert!(plan.deleted(1).iter().any(|c| c == "D1"));
}

fn arb_dag() -> impl Strategy<Value = CausalGraph> {
    (2usize..=8, any::<u64>(), 0.1f64..0.8)
        .prop_map(|(n, seed, p)| random_dag(&mut ChaCha8Rng::seed_from_u64(seed), n, p))
}

proptest! {
    #[test]
    fn d_separation_is_symmetric(g in arb_dag(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.len();
        let x = format!("V{}", rng.random_range(0..n));
        let y = format!("V{}", rng.random_range(0..n));
        prop_assume!(x != y);
        let z: Vec<String> = (0..n).map(|i| format!("V{i}")).filter(|m| *m != x && *m != y && rng.random_bool(0.4)).collect();
        let zr: Vec<&str> = z.iter().map(String::as_str).collect();
        prop_assert_eq!(g.d_separated(&x, &y, &zr).unwrap(), g.d_separated(&y, &x, &zr).unwrap());
    }

    #[test]
    fn text_form_round_trips(g in arb_dag()) {
        prop_assert_eq!(g.to_text().parse::<CausalGraph>().unwrap(), g);
    }

    #[test]
    fn swig_structure(g in arb_dag(), mask in any::<u8>()) {
        let iv: Interventions = (0..g.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| (format!("V{i}"), "0".to_string()))
            .collect();
        let s = swig_transform(&g, &iv).unwrap();
        let sg = s.graph();
        for node in s.nodes() {
            let name = match node.half {
                Half::Fixed => format!("{}=0", node.base),
                Half::Random => node.base.clone(),
            };
            if node.half == Half::Fixed {
                prop_assert!(sg.parents(&name).unwrap().is_empty());
            } else if iv.contains_key(&node.base) {
                prop_assert!(sg.children(&name).unwrap().is_empty());
            }
            if node.half == Half::Random {
                // superscript = interventions on fixed ancestors
                let anc = sg.ancestors(&name).unwrap();
                let expected: Vec<(String, String)> = iv
                    .iter()
                    .filter(|(b, _)| anc.contains(&format!("{b}=0")))
                    .map(|(b, v)| (b.clone(), v.clone()))
                    .collect();
                prop_assert_eq!(&node.label.interventions, &expected);
            }
        }
        // removing the fixed halves leaves a subgraph of the base graph
        let rest = s.without_fixed();
        for (p, c) in rest.edges() {
            prop_assert!(g.has_edge(p, c));
        }
        prop_assert_eq!(sg.topological_order().len(), sg.len());
        // intervening again with the same values changes nothing
        let twice = s.with_interventions(&iv).unwrap();
        prop_assert_eq!(twice.graph(), sg);
    }
}
