#![allow(dead_code)]

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use tel_core::chain::Arc;
use tel_core::market::Market;
use tel_core::Utility;

/// Two proposers and two acceptors with opposed preferences: both
/// one-to-one matchings are stable.
pub fn m2() -> Market {
    Market::from_rankings(&[vec![0, 1], vec![1, 0]], &[vec![1, 0], vec![0, 1]]).unwrap()
}

pub fn one_by_one() -> Market {
    Market::new(vec![vec![Utility::new(1, 2)]], vec![vec![Utility::new(1, 2)]]).unwrap()
}

/// Random digraph on `n` nodes, each node with at least one out-edge and
/// integer-ish weights so ties occur.
pub fn random_digraph(n: usize, seed: u64) -> Vec<Arc> {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for from in 0..n {
        let degree = rng.gen_range(1..=3.min(n - 1).max(1));
        for _ in 0..degree {
            let mut to = rng.gen_range(0..n);
            if to == from {
                to = (to + 1) % n;
            }
            let weight = rng.gen_range(0..8) as f64 / 2.0;
            edges.push(Arc { from, to, weight });
        }
    }
    edges
}

/// Minimum in-tree weight rooted at `root` by trying every choice of one
/// out-edge per non-root node. Independent of the contraction algorithm.
pub fn brute_force_in_tree(n: usize, edges: &[Arc], root: usize) -> Option<f64> {
    let out: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..edges.len()).filter(|&k| edges[k].from == v && edges[k].to != v).collect())
        .collect();
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    if others.iter().any(|&v| out[v].is_empty()) {
        return None;
    }
    let mut pick = vec![0usize; others.len()];
    let mut best: Option<f64> = None;
    loop {
        let mut next = vec![usize::MAX; n];
        let mut weight = 0.0;
        for (slot, &v) in others.iter().enumerate() {
            let e = &edges[out[v][pick[slot]]];
            next[v] = e.to;
            weight += e.weight;
        }
        let reaches_root = others.iter().all(|&v| {
            let mut u = v;
            for _ in 0..n {
                if u == root {
                    return true;
                }
                u = next[u];
            }
            u == root
        });
        if reaches_root && best.is_none_or(|b| weight < b) {
            best = Some(weight);
        }
        let mut k = 0;
        while k < others.len() {
            pick[k] += 1;
            if pick[k] < out[others[k]].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == others.len() {
            return best;
        }
    }
}
