//! Causal DAGs, single-world intervention graphs and d-separation.
//!
//! Graphs are immutable values: every transformation returns a new graph.
//! Node identity is the node's name; nodes are stored in insertion order and
//! that order is used as the temporal tie-break wherever an ordering is needed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("empty node name")]
    EmptyName,
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0} -> {1}`")]
    DuplicateEdge(String, String),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("unsupported period count {0} (expected 1 or 2)")]
    UnsupportedPeriods(usize),
    #[error("conflicting interventions on `{node}`: `{first}` vs `{second}`")]
    ConflictingIntervention {
        node: String,
        first: String,
        second: String,
    },
    #[error("line {line}: cannot parse `{text}`")]
    Parse { line: usize, text: String },
}

/// Node label such as `L0`, `A`, `D1`, `R2`, `Y` or `U`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(String);

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(GraphError::EmptyName);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Observed,
    Unobserved,
}

/// Labeled directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    nodes: Vec<NodeId>,
    kinds: Vec<NodeKind>,
    index: BTreeMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl CausalGraph {
    pub fn new<'a>(
        nodes: impl IntoIterator<Item = (&'a str, NodeKind)>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, GraphError> {
        let mut builder = GraphBuilder::default();
        for (name, kind) in nodes {
            builder.node(name, kind)?;
        }
        for (p, c) in edges {
            builder.edge(p, c)?;
        }
        builder.build()
    }

    /// Shorthand for a graph whose nodes are all observed.
    pub fn observed<'a>(
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, GraphError> {
        Self::new(nodes.into_iter().map(|n| (n, NodeKind::Observed)), edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter()
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.nodes.iter().map(NodeId::as_str).collect()
    }

    pub fn kind(&self, name: &str) -> Option<NodeKind> {
        self.idx(name).ok().map(|i| self.kinds[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .map(|&(p, c)| (self.nodes[p].as_str(), self.nodes[c].as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.idx(parent), self.idx(child)) {
            (Ok(p), Ok(c)) => self.children[p].contains(&c),
            _ => false,
        }
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.idx(name)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].as_str()).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.idx(name)?;
        Ok(self.children[i].iter().map(|&c| self.nodes[c].as_str()).collect())
    }

    /// Strict descendants of `name`.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(name)?;
        Ok(self
            .reach(&[i], &self.children)
            .into_iter()
            .filter(|&j| j != i)
            .map(|j| self.nodes[j].0.clone())
            .collect())
    }

    /// Strict ancestors of `name`.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(name)?;
        Ok(self
            .reach(&[i], &self.parents)
            .into_iter()
            .filter(|&j| j != i)
            .map(|j| self.nodes[j].0.clone())
            .collect())
    }

    /// Topological order; ties are broken by insertion order.
    pub fn topological_order(&self) -> Vec<&str> {
        topo_sort(&self.parents, &self.children)
            .expect("graph invariant: acyclic")
            .into_iter()
            .map(|i| self.nodes[i].as_str())
            .collect()
    }

    /// Graph with the given extra nodes and edges appended.
    pub fn extended<'a>(
        &self,
        nodes: impl IntoIterator<Item = (&'a str, NodeKind)>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, GraphError> {
        let mut builder = GraphBuilder::from_graph(self);
        for (name, kind) in nodes {
            builder.node(name, kind)?;
        }
        for (p, c) in edges {
            builder.edge(p, c)?;
        }
        builder.build()
    }

    /// Subgraph induced by the nodes for which `keep` returns true.
    pub fn induced(&self, keep: impl Fn(&str) -> bool) -> Self {
        let mut builder = GraphBuilder::default();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep(n.as_str()) {
                builder.node(n.as_str(), self.kinds[i]).expect("unique names");
            }
        }
        for (p, c) in self.edges() {
            if keep(p) && keep(c) {
                builder.edge(p, c).expect("valid edge");
            }
        }
        builder.build().expect("subgraph of a DAG is a DAG")
    }

    /// True iff every path between `x` and `y` is blocked by `z`.
    pub fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool, GraphError> {
        let xi = self.idx(x)?;
        let yi = self.idx(y)?;
        let zi = z.iter().map(|n| self.idx(n)).collect::<Result<BTreeSet<_>, _>>()?;
        Ok(!self.d_connected_idx(xi, yi, &zi))
    }

    /// Line-oriented text form: `node NAME [unobserved]` lines followed by
    /// `parent -> child` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            match self.kinds[i] {
                NodeKind::Observed => out.push_str(&format!("node {n}\n")),
                NodeKind::Unobserved => out.push_str(&format!("node {n} unobserved\n")),
            }
        }
        for (p, c) in self.edges() {
            out.push_str(&format!("{p} -> {c}\n"));
        }
        out
    }

    fn idx(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    fn reach(&self, start: &[usize], adj: &[Vec<usize>]) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = start.iter().copied().collect();
        let mut queue: VecDeque<usize> = start.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Reachability form of d-connection (Bayes-ball): traverse (node,
    /// direction) states; a collider passes only when it is an ancestor of
    /// (or in) the conditioning set.
    fn d_connected_idx(&self, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        if x == y {
            return true;
        }
        let z_vec: Vec<usize> = z.iter().copied().collect();
        let anc_z = self.reach(&z_vec, &self.parents);
        // `true` = arrived travelling against an edge (from a child)
        let mut visited: BTreeSet<(usize, bool)> = BTreeSet::new();
        let mut queue = VecDeque::from([(x, true)]);
        while let Some((v, up)) = queue.pop_front() {
            if !visited.insert((v, up)) {
                continue;
            }
            let blocked = z.contains(&v);
            if v == y && !blocked {
                return true;
            }
            if up {
                if !blocked {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
            } else {
                if !blocked {
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
                if anc_z.contains(&v) {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                }
            }
        }
        false
    }
}

impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for CausalGraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut builder = GraphBuilder::default();
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || GraphError::Parse {
                line: lineno + 1,
                text: raw.to_string(),
            };
            if let Some(rest) = line.strip_prefix("node ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().ok_or_else(bad)?;
                let kind = match parts.next() {
                    None | Some("observed") => NodeKind::Observed,
                    Some("unobserved") => NodeKind::Unobserved,
                    Some(_) => return Err(bad()),
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                builder.node(name, kind)?;
            } else if let Some((p, c)) = line.split_once("->") {
                let (p, c) = (p.trim(), c.trim());
                if p.is_empty() || c.is_empty() || c.contains(char::is_whitespace) {
                    return Err(bad());
                }
                for n in [p, c] {
                    if !builder.index.contains_key(n) {
                        builder.node(n, NodeKind::Observed)?;
                    }
                }
                builder.edge(p, c)?;
            } else {
                return Err(bad());
            }
        }
        builder.build()
    }
}

#[derive(Default)]
struct GraphBuilder {
    nodes: Vec<NodeId>,
    kinds: Vec<NodeKind>,
    index: BTreeMap<NodeId, usize>,
    edges: Vec<(usize, usize)>,
    edge_set: BTreeSet<(usize, usize)>,
}

impl GraphBuilder {
    fn from_graph(g: &CausalGraph) -> Self {
        Self {
            nodes: g.nodes.clone(),
            kinds: g.kinds.clone(),
            index: g.index.clone(),
            edges: g.edges.clone(),
            edge_set: g.edges.iter().copied().collect(),
        }
    }

    fn node(&mut self, name: &str, kind: NodeKind) -> Result<(), GraphError> {
        let id = NodeId::new(name)?;
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        self.index.insert(id.clone(), self.nodes.len());
        self.nodes.push(id);
        self.kinds.push(kind);
        Ok(())
    }

    fn edge(&mut self, parent: &str, child: &str) -> Result<(), GraphError> {
        let p = *self
            .index
            .get(parent)
            .ok_or_else(|| GraphError::UnknownNode(parent.to_string()))?;
        let c = *self
            .index
            .get(child)
            .ok_or_else(|| GraphError::UnknownNode(child.to_string()))?;
        if p == c {
            return Err(GraphError::SelfLoop(parent.to_string()));
        }
        if !self.edge_set.insert((p, c)) {
            return Err(GraphError::DuplicateEdge(parent.into(), child.into()));
        }
        self.edges.push((p, c));
        Ok(())
    }

    fn build(self) -> Result<CausalGraph, GraphError> {
        let n = self.nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &self.edges {
            parents[c].push(p);
            children[p].push(c);
        }
        if let Err(i) = topo_sort(&parents, &children) {
            return Err(GraphError::Cycle(self.nodes[i].0.clone()));
        }
        Ok(CausalGraph {
            nodes: self.nodes,
            kinds: self.kinds,
            index: self.index,
            parents,
            children,
            edges: self.edges,
        })
    }
}

/// Kahn's algorithm, always taking the lowest-index ready node. On a cycle
/// returns the index of some node left on it.
fn topo_sort(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indeg[i] > 0).unwrap_or(0))
    }
}

// ---------------------------------------------------------------------------
// SWIGs
// ---------------------------------------------------------------------------

/// Interventions keyed by node name; values are symbolic (`a`, `0`, ...).
pub type Interventions = BTreeMap<String, String>;

/// Potential-outcome label: the base variable plus the sorted list of
/// interventions on its fixed ancestors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PotentialLabel {
    pub base: String,
    pub interventions: Vec<(String, String)>,
}

impl fmt::Display for PotentialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        if !self.interventions.is_empty() {
            let sup: Vec<String> = self.interventions.iter().map(|(n, v)| format!("{n}={v}")).collect();
            write!(f, "^{{{}}}", sup.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    /// Unsplit node, or the random half of a split node.
    Random,
    /// Fixed half of a split node; a constant.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwigNode {
    pub base: String,
    pub half: Half,
    pub label: PotentialLabel,
}

/// Single-world intervention graph derived from a base DAG.
///
/// Random halves keep the base node name (and its incoming edges); the fixed
/// half of an intervened node `V` set to `v` is named `V=v` and keeps the
/// outgoing edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Swig {
    base: CausalGraph,
    interventions: Interventions,
    graph: CausalGraph,
    nodes: Vec<SwigNode>,
}

pub fn fixed_name(node: &str, value: &str) -> String {
    format!("{node}={value}")
}

/// Split every intervened node of `g` into a random and a fixed half.
pub fn swig_transform(g: &CausalGraph, interventions: &Interventions) -> Result<Swig, GraphError> {
    for node in interventions.keys() {
        if !g.contains(node) {
            return Err(GraphError::UnknownNode(node.clone()));
        }
    }
    let mut builder = GraphBuilder::default();
    let mut halves: Vec<(String, Half)> = Vec::new();
    for (i, n) in g.nodes.iter().enumerate() {
        builder.node(n.as_str(), g.kinds[i])?;
        halves.push((n.0.clone(), Half::Random));
        if let Some(v) = interventions.get(n.as_str()) {
            builder.node(&fixed_name(n.as_str(), v), NodeKind::Observed)?;
            halves.push((n.0.clone(), Half::Fixed));
        }
    }
    for (p, c) in g.edges() {
        let out = match interventions.get(p) {
            Some(v) => fixed_name(p, v),
            None => p.to_string(),
        };
        builder.edge(&out, c)?;
    }
    let graph = builder.build()?;

    let nodes = halves
        .into_iter()
        .enumerate()
        .map(|(i, (base, half))| {
            let label = match half {
                Half::Fixed => PotentialLabel {
                    base: base.clone(),
                    interventions: Vec::new(),
                },
                Half::Random => {
                    let anc = graph.reach(&[i], &graph.parents);
                    let mut ivs: Vec<(String, String)> = anc
                        .into_iter()
                        .filter(|&j| j != i)
                        .filter_map(|j| {
                            let name = graph.nodes[j].as_str();
                            let (b, v) = name.split_once('=')?;
                            (interventions.get(b).map(String::as_str) == Some(v))
                                .then(|| (b.to_string(), v.to_string()))
                        })
                        .collect();
                    ivs.sort();
                    PotentialLabel {
                        base: base.clone(),
                        interventions: ivs,
                    }
                }
            };
            SwigNode { base, half, label }
        })
        .collect();

    Ok(Swig {
        base: g.clone(),
        interventions: interventions.clone(),
        graph,
        nodes,
    })
}

impl Swig {
    pub fn base(&self) -> &CausalGraph {
        &self.base
    }

    pub fn interventions(&self) -> &Interventions {
        &self.interventions
    }

    /// The split-node DAG.
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[SwigNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&SwigNode> {
        self.graph.idx(name).ok().map(|i| &self.nodes[i])
    }

    pub fn label(&self, name: &str) -> Option<&PotentialLabel> {
        self.node(name).map(|n| &n.label)
    }

    pub fn is_fixed(&self, name: &str) -> bool {
        self.node(name).is_some_and(|n| n.half == Half::Fixed)
    }

    /// Intervene further; re-applying an existing intervention is a no-op.
    pub fn with_interventions(&self, more: &Interventions) -> Result<Swig, GraphError> {
        let mut merged = self.interventions.clone();
        for (k, v) in more {
            match merged.get(k) {
                Some(prev) if prev != v => {
                    return Err(GraphError::ConflictingIntervention {
                        node: k.clone(),
                        first: prev.clone(),
                        second: v.clone(),
                    })
                }
                _ => {
                    merged.insert(k.clone(), v.clone());
                }
            }
        }
        swig_transform(&self.base, &merged)
    }

    /// Graph with all fixed halves removed.
    pub fn without_fixed(&self) -> CausalGraph {
        self.graph.induced(|n| !self.is_fixed(n))
    }

    /// d-separation in the SWIG. Fixed halves are constants: they block
    /// every path through them, and a fixed endpoint is separated from
    /// everything.
    pub fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool, GraphError> {
        for n in [x, y].iter().chain(z.iter()) {
            self.graph.idx(n)?;
        }
        if self.is_fixed(x) || self.is_fixed(y) {
            return Ok(true);
        }
        let mut cond: Vec<&str> = z.to_vec();
        cond.extend(
            self.nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.half == Half::Fixed)
                .map(|(i, _)| self.graph.nodes[i].as_str()),
        );
        self.graph.d_separated(x, y, &cond)
    }
}

impl fmt::Display for Swig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            match n.half {
                Half::Fixed => writeln!(f, "fixed {}={}", n.base, self.interventions[&n.base])?,
                Half::Random => writeln!(f, "random {}", n.label)?,
            }
        }
        for (p, c) in self.graph.edges() {
            writeln!(f, "{p} -> {c}")?;
        }
        Ok(())
    }
}

/// Either kind of graph, for callers that accept both.
pub trait DSeparation {
    fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool, GraphError>;
}

impl DSeparation for CausalGraph {
    fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool, GraphError> {
        CausalGraph::d_separated(self, x, y, z)
    }
}

impl DSeparation for Swig {
    fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool, GraphError> {
        Swig::d_separated(self, x, y, z)
    }
}
