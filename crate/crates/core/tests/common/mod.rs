//! Reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use icepath::graph::CausalGraph;
use icepath::numerics::DesignMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Reference d-separation: enumerate every simple path between x and y in
/// the skeleton and test each for activity given z.
pub fn brute_force_d_separated(g: &CausalGraph, x: &str, y: &str, z: &BTreeSet<String>) -> bool {
    let names: Vec<String> = g.node_names().into_iter().map(String::from).collect();
    let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
    let k = names.len();
    let mut adj = vec![vec![false; k]; k];
    for (p, c) in g.edges() {
        adj[idx(p)][idx(c)] = true;
    }
    let mut desc_or_self: Vec<BTreeSet<usize>> = Vec::new();
    for i in 0..k {
        let mut seen = BTreeSet::from([i]);
        let mut stack = vec![i];
        while let Some(u) = stack.pop() {
            for v in 0..k {
                if adj[u][v] && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        desc_or_self.push(seen);
    }
    let zi: BTreeSet<usize> = z.iter().map(|n| idx(n)).collect();
    let (xi, yi) = (idx(x), idx(y));

    fn active(path: &[usize], adj: &[Vec<bool>], zi: &BTreeSet<usize>, desc: &[BTreeSet<usize>]) -> bool {
        for w in path.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let collider = adj[a][b] && adj[c][b];
            if collider {
                if !desc[b].iter().any(|d| zi.contains(d)) {
                    return false;
                }
            } else if zi.contains(&b) {
                return false;
            }
        }
        true
    }

    fn search(
        path: &mut Vec<usize>,
        target: usize,
        adj: &[Vec<bool>],
        zi: &BTreeSet<usize>,
        desc: &[BTreeSet<usize>],
    ) -> bool {
        let u = *path.last().unwrap();
        if u == target {
            return active(path, adj, zi, desc);
        }
        for v in 0..adj.len() {
            if (adj[u][v] || adj[v][u]) && !path.contains(&v) {
                path.push(v);
                let found = search(path, target, adj, zi, desc);
                path.pop();
                if found {
                    return true;
                }
            }
        }
        false
    }

    !search(&mut vec![xi], yi, &adj, &zi, &desc_or_self)
}

pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> CausalGraph {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(p) {
                edges.push((names[order[a]].clone(), names[order[b]].clone()));
            }
        }
    }
    CausalGraph::observed(
        names.iter().map(String::as_str),
        edges.iter().map(|(p, c)| (p.as_str(), c.as_str())),
    )
    .unwrap()
}

/// Gaussian elimination with partial pivoting on the weighted normal
/// equations XᵀWX β = XᵀWy.
pub fn normal_equations(x: &DesignMatrix<f64>, y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x.cols();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..x.rows()).map(|r| w[r] * x.get(r, i) * x.get(r, j)).sum();
        }
        a[i][p] = (0..x.rows()).map(|r| w[r] * x.get(r, i) * y[r]).sum();
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}
