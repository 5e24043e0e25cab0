//! Seeded synthetic graphs and datasets.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};

/// Erdős–Rényi graph with features uniform in `[0, 1)`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64, dim: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    Graph::new(edges, features, None).expect("generated graph is valid")
}

/// `count` random graphs with `min_nodes..=max_nodes` nodes, edge
/// probability `p` and integer labels `|E| mod 3`.
pub fn random_dataset(
    seed: u64,
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    p: f64,
    dim: usize,
) -> Result<Dataset> {
    if min_nodes > max_nodes || dim == 0 {
        return Err(Error::Config("invalid synthetic dataset parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = (0..count)
        .map(|_| {
            let n = rng.random_range(min_nodes..=max_nodes);
            let g = random_graph(&mut rng, n, p, dim);
            let label = (g.edge_count() % 3) as i64;
            g.with_label(Some(label))
        })
        .collect();
    Dataset::new(format!("synthetic-{seed}"), graphs)
}

/// Random 4-regular graph on `n >= 5` nodes as the union of two random
/// Hamiltonian cycles, redrawn until they share no edge. Unit features.
pub fn random_regular4(n: usize, seed: u64) -> Result<Graph> {
    if n < 5 {
        return Err(Error::Config(
            "a simple 4-regular graph needs n >= 5".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycle = |rng: &mut ChaCha8Rng| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        (0..n)
            .map(|i| {
                let (a, b) = (order[i], order[(i + 1) % n]);
                (a.min(b), a.max(b))
            })
            .collect::<Vec<_>>()
    };
    let first = cycle(&mut rng);
    let used: HashSet<(usize, usize)> = first.iter().copied().collect();
    for _ in 0..10_000 {
        let second = cycle(&mut rng);
        if second.iter().all(|e| !used.contains(e)) {
            let mut edges = first;
            edges.extend(second);
            return Graph::new(edges, vec![vec![1.0]; n], None);
        }
    }
    Err(Error::Consistency(
        "could not draw two disjoint Hamiltonian cycles".into(),
    ))
}

/// Two graphs on the path `1 - 2 - ... - n` with features `i` and `10·i`.
pub fn feature_scaled_pair(n: usize) -> (Graph, Graph) {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let f: Vec<Vec<f64>> = (1..=n).map(|i| vec![i as f64]).collect();
    let g: Vec<Vec<f64>> = (1..=n).map(|i| vec![10.0 * i as f64]).collect();
    (
        Graph::new(edges.clone(), f, None).expect("valid"),
        Graph::new(edges, g, None).expect("valid"),
    )
}
