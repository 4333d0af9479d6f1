//! Trial DAGs for the three D/R orderings, the adjustment plans they imply,
//! and a graphical exchangeability check of a plan.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{fixed_name, swig_transform, CausalGraph, GraphError, Interventions, NodeKind};

/// How discontinuation (D) and rescue (R) relate at each visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CausalStructure {
    /// D_k and R_k do not affect each other.
    #[serde(rename = "independent")]
    NoCrossEffects,
    /// D_k precedes and may affect R_k.
    #[serde(rename = "d-first")]
    DPrecedesR,
    /// R_k precedes and may affect D_k.
    #[serde(rename = "r-first")]
    RPrecedesD,
}

impl CausalStructure {
    pub const ALL: [CausalStructure; 3] = [
        CausalStructure::NoCrossEffects,
        CausalStructure::DPrecedesR,
        CausalStructure::RPrecedesD,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            CausalStructure::NoCrossEffects => "independent",
            CausalStructure::DPrecedesR => "d-first",
            CausalStructure::RPrecedesD => "r-first",
        }
    }

    /// Small stable integer, used for seed derivation.
    pub fn tag(self) -> u64 {
        match self {
            CausalStructure::NoCrossEffects => 1,
            CausalStructure::DPrecedesR => 2,
            CausalStructure::RPrecedesD => 3,
        }
    }
}

impl fmt::Display for CausalStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for CausalStructure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" | "i" | "no-cross-effects" => Ok(CausalStructure::NoCrossEffects),
            "d-first" | "ii" | "d-precedes-r" => Ok(CausalStructure::DPrecedesR),
            "r-first" | "iii" | "r-precedes-d" => Ok(CausalStructure::RPrecedesD),
            other => Err(format!(
                "unknown structure `{other}` (expected independent, d-first or r-first)"
            )),
        }
    }
}

fn check_periods(periods: usize) -> Result<(), GraphError> {
    if periods == 1 || periods == 2 {
        Ok(())
    } else {
        Err(GraphError::UnsupportedPeriods(periods))
    }
}

fn d(k: usize) -> String {
    format!("D{k}")
}
fn r(k: usize) -> String {
    format!("R{k}")
}
fn l(k: usize) -> String {
    format!("L{k}")
}

/// Temporal node order of one structure: `L0, A, L1, (D1, R1 | R1, D1), L2, ...`.
fn temporal_order(structure: CausalStructure, periods: usize) -> Vec<String> {
    let mut order = vec![l(0), "A".to_string()];
    for k in 1..=periods {
        order.push(l(k));
        match structure {
            CausalStructure::RPrecedesD => {
                order.push(r(k));
                order.push(d(k));
            }
            _ => {
                order.push(d(k));
                order.push(r(k));
            }
        }
    }
    order.push("Y".to_string());
    order
}

/// Trial DAG for `periods` visits (1 or 2). Nodes are named `L0, A, L1, D1,
/// R1, L2, D2, R2, Y`; the one-visit graph uses `D1`/`R1` for D and R.
pub fn scenario_dag(structure: CausalStructure, periods: usize) -> Result<CausalGraph, GraphError> {
    check_periods(periods)?;
    let nodes = temporal_order(structure, periods);
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut push = |p: String, c: String| edges.push((p, c));

    // baseline and treatment feed every later variable except other L0/A
    for k in 1..=periods {
        for parent in [l(0), "A".to_string()] {
            push(parent.clone(), l(k));
            push(parent.clone(), d(k));
            push(parent, r(k));
        }
    }
    push(l(0), "Y".into());
    push("A".into(), "Y".into());

    // covariates at visit j feed later covariates and all ICEs from visit j on
    for j in 1..=periods {
        for k in (j + 1)..=periods {
            push(l(j), l(k));
        }
        for k in j..=periods {
            push(l(j), d(k));
            push(l(j), r(k));
        }
        push(l(j), "Y".into());
    }

    // ICE histories: each ICE type affects later covariates, its own later
    // occurrences and Y
    for j in 1..=periods {
        for k in (j + 1)..=periods {
            push(d(j), l(k));
            push(d(j), d(k));
            push(r(j), l(k));
            push(r(j), r(k));
        }
        push(d(j), "Y".into());
        push(r(j), "Y".into());
    }

    // cross effects between the two ICE types
    match structure {
        CausalStructure::NoCrossEffects => {}
        CausalStructure::DPrecedesR => {
            for j in 1..=periods {
                for k in j..=periods {
                    push(d(j), r(k));
                }
                for k in (j + 1)..=periods {
                    push(r(j), d(k));
                }
            }
        }
        CausalStructure::RPrecedesD => {
            for j in 1..=periods {
                for k in j..=periods {
                    push(r(j), d(k));
                }
                for k in (j + 1)..=periods {
                    push(d(j), r(k));
                }
            }
        }
    }

    // emit edges in temporal order of (child, parent) for a stable text form
    let pos = |n: &str| nodes.iter().position(|m| m == n).expect("known node");
    edges.sort_by_key(|(p, c)| (pos(p), pos(c)));
    CausalGraph::observed(
        nodes.iter().map(String::as_str),
        edges.iter().map(|(p, c)| (p.as_str(), c.as_str())),
    )
}

/// The scenario DAG plus an unobserved common cause of D and R at each
/// visit: `U` for one visit, `U1`, `U2` for two (`U_k -> D_k`, `U_k -> R_k`,
/// never into Y).
pub fn with_unmeasured_ice_cause(g: &CausalGraph, periods: usize) -> Result<CausalGraph, GraphError> {
    check_periods(periods)?;
    let names: Vec<String> = if periods == 1 {
        vec!["U".into()]
    } else {
        (1..=periods).map(|k| format!("U{k}")).collect()
    };
    let mut edges = Vec::new();
    for (i, u) in names.iter().enumerate() {
        let k = i + 1;
        edges.push((u.clone(), d(k)));
        edges.push((u.clone(), r(k)));
    }
    g.extended(
        names.iter().map(|u| (u.as_str(), NodeKind::Unobserved)),
        edges.iter().map(|(p, c)| (p.as_str(), c.as_str())),
    )
}

/// One step of the sequential imputation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationStep {
    pub variable: String,
    pub covariates: Vec<String>,
}

/// Rules attached to visit k's rescue indicator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodPlan {
    pub rescue: String,
    /// Covariates of the model for `R_k` (fitted among `R_{k-1} = 0`).
    pub covariates: Vec<String>,
    /// Variables set to missing when `R_k = 1`.
    pub deleted: Vec<String>,
}

/// Which covariates each rescue model needs, what to delete after rescue
/// and in which order to impute, for one assumed structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentPlan {
    pub structure: CausalStructure,
    pub periods: usize,
    pub per_period: Vec<PeriodPlan>,
    pub imputation: Vec<ImputationStep>,
}

impl AdjustmentPlan {
    pub fn covariates(&self, k: usize) -> &[String] {
        &self.per_period[k - 1].covariates
    }

    pub fn deleted(&self, k: usize) -> &[String] {
        &self.per_period[k - 1].deleted
    }

    pub fn covariate_set(&self, k: usize) -> BTreeSet<&str> {
        self.covariates(k).iter().map(String::as_str).collect()
    }

    /// Plan with visit k's rescue covariates replaced.
    pub fn with_covariates(mut self, k: usize, covariates: &[&str]) -> Self {
        self.per_period[k - 1].covariates = covariates.iter().map(|s| s.to_string()).collect();
        self
    }
}

impl fmt::Display for AdjustmentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "adjustment plan ({}, {} periods)", self.structure, self.periods)?;
        for p in &self.per_period {
            writeln!(f, "{} model covariates: {{{}}}", p.rescue, p.covariates.join(","))?;
            writeln!(f, "if {}=1 set missing: {{{}}}", p.rescue, p.deleted.join(","))?;
        }
        for (i, step) in self.imputation.iter().enumerate() {
            writeln!(
                f,
                "impute {}. {} using {{{}}}",
                i + 1,
                step.variable,
                step.covariates.join(",")
            )?;
        }
        Ok(())
    }
}

fn is_rescue(n: &str) -> bool {
    n.starts_with('R')
}

fn is_discontinuation(n: &str) -> bool {
    n.starts_with('D')
}

/// Derive the adjustment plan from the assumed DAG:
///
/// * the `R_k` model uses the observed non-rescue parents of `R_k`
///   (`A` listed first);
/// * the analysis variables are `L`'s, `Y` and, whenever some D is adjacent
///   to some R, the `D`'s;
/// * `R_k = 1` deletes the analysis variables descending from `R_k`;
/// * deleted variables are imputed in temporal order from all earlier
///   analysis variables.
pub fn derive_adjustment_plan(structure: CausalStructure, periods: usize) -> Result<AdjustmentPlan, GraphError> {
    let g = scenario_dag(structure, periods)?;
    let order: Vec<String> = g.topological_order().into_iter().map(String::from).collect();

    let cross = g
        .edges()
        .any(|(p, c)| (is_rescue(p) && is_discontinuation(c)) || (is_discontinuation(p) && is_rescue(c)));
    let analysis: Vec<&String> = order
        .iter()
        .filter(|n| !is_rescue(n))
        .filter(|n| cross || !is_discontinuation(n))
        .collect();

    let a_first = |mut v: Vec<String>| {
        v.sort_by_key(|n| (n != "A", order.iter().position(|m| m == n)));
        v
    };

    let mut per_period = Vec::with_capacity(periods);
    let mut deleted_any: BTreeSet<String> = BTreeSet::new();
    for k in 1..=periods {
        let rk = r(k);
        let covariates: Vec<String> = g
            .parents(&rk)?
            .into_iter()
            .filter(|p| !is_rescue(p) && g.kind(p) == Some(NodeKind::Observed))
            .map(String::from)
            .collect();
        let desc = g.descendants(&rk)?;
        let deleted: Vec<String> = analysis
            .iter()
            .filter(|n| desc.contains(n.as_str()))
            .map(|n| n.to_string())
            .collect();
        deleted_any.extend(deleted.iter().cloned());
        per_period.push(PeriodPlan {
            rescue: rk,
            covariates: a_first(covariates),
            deleted,
        });
    }

    let imputation = analysis
        .iter()
        .enumerate()
        .filter(|(_, n)| deleted_any.contains(n.as_str()))
        .map(|(i, n)| ImputationStep {
            variable: n.to_string(),
            covariates: a_first(analysis[..i].iter().map(|s| s.to_string()).collect()),
        })
        .collect();

    Ok(AdjustmentPlan {
        structure,
        periods,
        per_period,
        imputation,
    })
}

/// Sequential conditional exchangeability of the plan's rescue models.
///
/// For every visit k, builds the SWIG of the scenario DAG (optionally with
/// the unobserved D/R common causes) under `A = a, R_1 = ... = R_K = 0` and
/// checks that the random half of `R_k` is d-separated from the outcome
/// node given the plan's visit-k covariates (`A` enters as its fixed half).
pub fn check_exchangeability(
    structure: CausalStructure,
    periods: usize,
    plan: &AdjustmentPlan,
    with_unmeasured: bool,
) -> Result<bool, GraphError> {
    let mut g = scenario_dag(structure, periods)?;
    if with_unmeasured {
        g = with_unmeasured_ice_cause(&g, periods)?;
    }
    exchangeable_in(&g, periods, plan)
}

/// [`check_exchangeability`] on a caller-supplied trial graph.
pub fn exchangeable_in(g: &CausalGraph, periods: usize, plan: &AdjustmentPlan) -> Result<bool, GraphError> {
    check_periods(periods)?;
    let mut iv = Interventions::new();
    iv.insert("A".into(), "a".into());
    for k in 1..=periods {
        iv.insert(r(k), "0".into());
    }
    let swig = swig_transform(g, &iv)?;
    for k in 1..=periods {
        let cov = &plan
            .per_period
            .get(k - 1)
            .ok_or(GraphError::UnsupportedPeriods(plan.periods))?
            .covariates;
        let z: Vec<String> = cov
            .iter()
            .map(|c| match iv.get(c) {
                Some(v) => fixed_name(c, v),
                None => c.clone(),
            })
            .collect();
        let z_ref: Vec<&str> = z.iter().map(String::as_str).collect();
        if !swig.d_separated(&r(k), "Y", &z_ref)? {
            return Ok(false);
        }
    }
    Ok(true)
}
