#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmd_coreset::graph::Graph;
use tmd_coreset::tmd::{FeatureNorm, TmdConfig, WeightFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random simple graph on exactly `n` nodes with non-negative features.
pub fn graph_with<R: Rng>(rng: &mut R, n: usize, p: f64, dim: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features = (0..n)
        .map(|_| (0..dim).map(|_| 2.0 * rng.random::<f64>()).collect())
        .collect();
    Graph::new(edges, features, None).unwrap()
}

/// Random graph with `lo..=hi` nodes.
pub fn graph<R: Rng>(rng: &mut R, lo: usize, hi: usize, dim: usize) -> Graph {
    let n = rng.random_range(lo..=hi);
    let p = rng.random_range(0.2..0.8);
    graph_with(rng, n, p, dim)
}

/// Random depth in `1..=max_depth` with a random positive weight table.
pub fn config<R: Rng>(rng: &mut R, max_depth: usize) -> TmdConfig {
    let depth = rng.random_range(1..=max_depth);
    let table = (1..depth).map(|_| rng.random_range(0.2..2.0)).collect();
    let norm = if rng.random::<bool>() {
        FeatureNorm::L1
    } else {
        FeatureNorm::L2
    };
    TmdConfig::new(depth, WeightFn::Table(table), norm).unwrap()
}

/// Random subset of `0..n` (each node kept with probability 1/2), sorted.
pub fn subset<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<bool>()).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
