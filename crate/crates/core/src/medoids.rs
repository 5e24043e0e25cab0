//! Graph-level coresets: the medoids objective, PAM k-medoids, cluster
//! weights and the baseline pseudometrics.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::tmd::DistanceMatrix;

/// Selected medoids with their cluster weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub tau: Vec<usize>,
    /// Medoids objective, when a distance matrix was available.
    pub objective: Option<f64>,
}

fn check_indices(d: &DistanceMatrix, idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Input("medoid set must be non-empty".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= d.size()) {
        return Err(Error::Input(format!(
            "medoid index {bad} out of range for {} graphs",
            d.size()
        )));
    }
    Ok(())
}

/// Medoid of `idx` closest to graph `i`; ties go to the smallest index.
/// A selected graph is always its own medoid, so every cluster is non-empty
/// even when distinct graphs are at distance zero.
pub fn nearest_medoid(d: &DistanceMatrix, idx: &[usize], i: usize) -> usize {
    if idx.contains(&i) {
        return i;
    }
    let mut best = idx[0];
    let mut best_d = d.get(i, best);
    for &j in &idx[1..] {
        let dj = d.get(i, j);
        if dj < best_d || (dj == best_d && j < best) {
            best = j;
            best_d = dj;
        }
    }
    best
}

/// Mean over all graphs of the distance to the nearest selected graph.
pub fn medoids_objective(d: &DistanceMatrix, idx: &[usize]) -> Result<f64> {
    check_indices(d, idx)?;
    let n = d.size();
    let total: f64 = (0..n)
        .map(|i| {
            idx.iter()
                .map(|&j| d.get(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / n as f64)
}

/// Number of graphs assigned to each medoid, aligned with `idx`.
pub fn cluster_sizes(d: &DistanceMatrix, idx: &[usize]) -> Result<Vec<usize>> {
    check_indices(d, idx)?;
    let mut tau = vec![0; idx.len()];
    for i in 0..d.size() {
        let m = nearest_medoid(d, idx, i);
        let pos = idx.iter().position(|&j| j == m).expect("medoid in set");
        tau[pos] += 1;
    }
    Ok(tau)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Input(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// k-medoids by PAM: greedy BUILD then best-improvement SWAP.
pub fn kmedoids(d: &DistanceMatrix, k: usize, seed: u64, max_iter: usize) -> Result<Selection> {
    kmedoids_with_trace(d, k, seed, max_iter).map(|(s, _)| s)
}

/// As [`kmedoids`], also returning the objective after BUILD and after every
/// accepted swap.
pub fn kmedoids_with_trace(
    d: &DistanceMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(Selection, Vec<f64>)> {
    let n = d.size();
    check_k(n, k)?;

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = vec![false; n];
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|&c| !chosen[c]) {
            let cost: f64 = (0..n).map(|i| nearest[i].min(d.get(i, c))).sum();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, c));
            }
        }
        let (_, c) = best.expect("k <= n leaves a candidate");
        chosen[c] = true;
        medoids.push(c);
        for (i, v) in nearest.iter_mut().enumerate() {
            *v = v.min(d.get(i, c));
        }
    }
    let mut trace = vec![medoids_objective(d, &medoids)?];

    // SWAP
    for _ in 0..max_iter {
        if k == n {
            break;
        }
        let (first, second) = nearest_two(d, &medoids);
        let current: f64 = (0..n).map(|i| d.get(i, medoids[first[i]])).sum();
        let mut best: Option<(f64, usize, usize)> = None;
        for pos in 0..k {
            for h in (0..n).filter(|&h| !chosen[h]) {
                let cost: f64 = (0..n)
                    .map(|i| {
                        let other = if first[i] == pos {
                            second[i].map_or(f64::INFINITY, |p| d.get(i, medoids[p]))
                        } else {
                            d.get(i, medoids[first[i]])
                        };
                        other.min(d.get(i, h))
                    })
                    .sum();
                if best.is_none_or(|(b, _, _)| cost < b) {
                    best = Some((cost, pos, h));
                }
            }
        }
        match best {
            Some((cost, pos, h)) if cost < current - 1e-12 * current.max(1.0) => {
                chosen[medoids[pos]] = false;
                chosen[h] = true;
                medoids[pos] = h;
                trace.push(medoids_objective(d, &medoids)?);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let selection = finish("kmedoids", d, k, seed, medoids)?;
    Ok((selection, trace))
}

/// Positions (into `medoids`) of the nearest and second-nearest medoid.
fn nearest_two(d: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = d.size();
    let mut first = vec![0; n];
    let mut second = vec![None; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..medoids.len()).collect();
        order.sort_by(|&a, &b| {
            d.get(i, medoids[a])
                .total_cmp(&d.get(i, medoids[b]))
                .then(medoids[a].cmp(&medoids[b]))
        });
        first[i] = order[0];
        second[i] = order.get(1).copied();
    }
    (first, second)
}

fn finish(
    method: &str,
    d: &DistanceMatrix,
    k: usize,
    seed: u64,
    indices: Vec<usize>,
) -> Result<Selection> {
    Ok(Selection {
        method: method.into(),
        k,
        seed,
        tau: cluster_sizes(d, &indices)?,
        objective: Some(medoids_objective(d, &indices)?),
        indices,
    })
}

/// Limit on the number of subsets [`brute_force_medoids`] enumerates.
pub const BRUTE_FORCE_MEDOIDS_MAX: u128 = 1_000_000;

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Advance a sorted k-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive medoids minimum; lexicographically smallest optimal set.
pub fn brute_force_medoids(d: &DistanceMatrix, k: usize) -> Result<Selection> {
    let n = d.size();
    check_k(n, k)?;
    if binomial(n, k) > BRUTE_FORCE_MEDOIDS_MAX {
        return Err(Error::SizeLimit(format!(
            "C({n},{k}) exceeds {BRUTE_FORCE_MEDOIDS_MAX} subsets"
        )));
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best = (medoids_objective(d, &comb)?, comb.clone());
    while next_combination(&mut comb, n) {
        let obj = medoids_objective(d, &comb)?;
        if obj < best.0 {
            best = (obj, comb.clone());
        }
    }
    finish("brute-force", d, k, 0, best.1)
}

/// Euclidean distance between mean feature rows. An empty graph's mean is zero.
pub fn feature_distance_matrix(ds: &Dataset) -> Result<DistanceMatrix> {
    let dim = ds.feature_dim();
    let means: Vec<Vec<f64>> = ds
        .graphs()
        .iter()
        .map(|g| {
            let mut m = vec![0.0; dim];
            for v in 0..g.node_count() {
                for (a, x) in m.iter_mut().zip(g.feature(v)) {
                    *a += x;
                }
            }
            if g.node_count() > 0 {
                for a in &mut m {
                    *a /= g.node_count() as f64;
                }
            }
            m
        })
        .collect();
    DistanceMatrix::from_fn(ds.len(), "feature", 0, "none", |i, j| {
        means[i]
            .iter()
            .zip(&means[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// Per-iteration WL label histograms for every graph, with structural
/// (constant) initial labels and one compression dictionary per iteration
/// shared across the dataset.
pub fn wl_histograms(ds: &Dataset, iters: usize) -> Vec<Vec<BTreeMap<u32, u64>>> {
    let graphs = ds.graphs();
    let mut labels: Vec<Vec<u32>> = graphs.iter().map(|g| vec![0; g.node_count()]).collect();
    let histogram = |ls: &[u32]| {
        let mut h = BTreeMap::new();
        for &l in ls {
            *h.entry(l).or_insert(0u64) += 1;
        }
        h
    };
    let mut out: Vec<Vec<BTreeMap<u32, u64>>> =
        labels.iter().map(|ls| vec![histogram(ls)]).collect();
    for _ in 0..iters {
        let mut dict: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next_labels = Vec::with_capacity(graphs.len());
        for (g, ls) in graphs.iter().zip(&labels) {
            let relabeled: Vec<u32> = (0..g.node_count())
                .map(|v| {
                    let mut multiset: Vec<u32> = g.neighbors(v).iter().map(|&u| ls[u]).collect();
                    multiset.sort_unstable();
                    let fresh = dict.len() as u32;
                    *dict.entry((ls[v], multiset)).or_insert(fresh)
                })
                .collect();
            next_labels.push(relabeled);
        }
        labels = next_labels;
        for (h, ls) in out.iter_mut().zip(&labels) {
            h.push(histogram(ls));
        }
    }
    out
}

fn dot(a: &BTreeMap<u32, u64>, b: &BTreeMap<u32, u64>) -> u64 {
    a.iter().filter_map(|(l, x)| b.get(l).map(|y| x * y)).sum()
}

/// Radicand tolerance for the WL distance.
pub const WL_NEGATIVE_TOLERANCE: f64 = 1e-9;

/// WL-kernel pseudometric over `iters` refinement rounds.
pub fn wl_pseudometric_matrix(ds: &Dataset, iters: usize) -> Result<DistanceMatrix> {
    let hists = wl_histograms(ds, iters);
    let kernel = |i: usize, j: usize| -> f64 {
        hists[i]
            .iter()
            .zip(&hists[j])
            .map(|(a, b)| dot(a, b))
            .sum::<u64>() as f64
    };
    let n = ds.len();
    let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let diag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            let r = diag[i] + diag[j] - 2.0 * kernel(i, j);
            if r < -WL_NEGATIVE_TOLERANCE {
                return Err(Error::Consistency(format!(
                    "negative WL radicand {r} for graphs {i} and {j}"
                )));
            }
            values.push(r.max(0.0).sqrt());
        }
    }
    DistanceMatrix::new(n, "wl", iters as u32, "none", values)
}

/// Uniform seeded selection of `k` graphs. Weights come from nearest-medoid
/// counts under `d` when given, otherwise `n / k` with the remainder going to
/// the first medoids.
pub fn random_selection(
    n: usize,
    k: usize,
    seed: u64,
    d: Option<&DistanceMatrix>,
) -> Result<Selection> {
    check_k(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    indices.sort_unstable();
    match d {
        Some(d) => {
            if d.size() != n {
                return Err(Error::Input(format!(
                    "distance matrix covers {} graphs, expected {n}",
                    d.size()
                )));
            }
            finish("random", d, k, seed, indices)
        }
        None => {
            let tau = (0..k).map(|p| n / k + usize::from(p < n % k)).collect();
            Ok(Selection {
                method: "random".into(),
                k,
                seed,
                indices,
                tau,
                objective: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn block_matrix() -> DistanceMatrix {
        // [K3, K3, P2, P2] with cross distance 5.
        DistanceMatrix::from_fn(4, "t", 2, "const:1", |i, j| {
            if (i < 2) == (j < 2) {
                0.0
            } else {
                5.0
            }
        })
        .unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = block_matrix();
        assert_eq!(medoids_objective(&d, &[0, 1, 2, 3]).unwrap(), 0.0);
        assert_eq!(medoids_objective(&d, &[0, 2]).unwrap(), 0.0);
        assert_eq!(medoids_objective(&d, &[0]).unwrap(), 2.5);
        assert!(medoids_objective(&d, &[]).is_err());
        assert!(medoids_objective(&d, &[7]).is_err());
    }

    #[test]
    fn cluster_size_examples() {
        let d = block_matrix();
        assert_eq!(cluster_sizes(&d, &[0, 1, 2, 3]).unwrap(), vec![1; 4]);
        assert_eq!(cluster_sizes(&d, &[0, 2]).unwrap(), vec![2, 2]);
        // 0 and 1 are both at distance 0 from 0 and 1; ties go to index 0.
        // Graphs 2 and 3 are tied between medoids 1 and 0 and go to 0.
        assert_eq!(cluster_sizes(&d, &[1, 0]).unwrap(), vec![1, 3]);
        let eq =
            DistanceMatrix::from_fn(
                3,
                "t",
                1,
                "x",
                |i, j| if i + j == 2 && i != j { 2.0 } else { 1.0 },
            )
            .unwrap();
        // Graph 1 is at distance 1 from medoids 0 and 2.
        assert_eq!(cluster_sizes(&eq, &[2, 0]).unwrap(), vec![1, 2]);
    }

    #[test]
    fn kmedoids_examples() {
        let d = block_matrix();
        let s = kmedoids(&d, 4, 0, 100).unwrap();
        assert_eq!((s.indices, s.objective), (vec![0, 1, 2, 3], Some(0.0)));
        let s = kmedoids(&d, 2, 0, 100).unwrap();
        assert_eq!(s.indices, vec![0, 2]);
        assert_eq!(s.objective, Some(0.0));
        assert_eq!(s.tau, vec![2, 2]);
        assert!(kmedoids(&d, 0, 0, 100).is_err());
        assert!(kmedoids(&d, 5, 0, 100).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let d = block_matrix();
        assert_eq!(
            brute_force_medoids(&d, 4).unwrap().indices,
            vec![0, 1, 2, 3]
        );
        assert_eq!(brute_force_medoids(&d, 2).unwrap().indices, vec![0, 2]);
        let zeros = DistanceMatrix::from_fn(5, "t", 1, "x", |_, _| 0.0).unwrap();
        assert_eq!(
            brute_force_medoids(&zeros, 3).unwrap().indices,
            vec![0, 1, 2]
        );
        let big = DistanceMatrix::from_fn(40, "t", 1, "x", |_, _| 1.0).unwrap();
        assert!(matches!(
            brute_force_medoids(&big, 10),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(binomial(9, 4), 126);
        assert_eq!(binomial(3, 5), 0);
    }

    fn graph(n: usize, edges: Vec<(usize, usize)>, f: f64) -> Graph {
        Graph::new(edges, vec![vec![f]; n], None).unwrap()
    }

    #[test]
    fn feature_distance_examples() {
        let ds = Dataset::new(
            "d",
            vec![
                graph(2, vec![(0, 1)], 1.0),
                graph(3, vec![], 3.0),
                graph(2, vec![(0, 1)], 1.0),
            ],
        )
        .unwrap();
        let m = feature_distance_matrix(&ds).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.metric, "feature");
    }

    #[test]
    fn wl_examples() {
        let tri = graph(3, vec![(0, 1), (1, 2), (0, 2)], 1.0);
        let path = graph(3, vec![(0, 1), (1, 2)], 1.0);
        let tri_other = Graph::new(
            vec![(0, 1), (1, 2), (0, 2)],
            vec![vec![1.0], vec![20.0], vec![30.0]],
            None,
        )
        .unwrap();
        let ds = Dataset::new("d", vec![tri.clone(), path, tri, tri_other]).unwrap();
        let m = wl_pseudometric_matrix(&ds, 1).unwrap();
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(0, 3), 0.0);
        // Iteration 0: all labels equal, 3·3 for every pair.
        // Iteration 1: triangle has three (0,{0,0}); path has two (0,{0}) and one (0,{0,0}).
        // k(T,T) = 9 + 9, k(P,P) = 9 + 5, k(T,P) = 9 + 3 → radicand 18 + 14 - 24 = 8.
        assert_eq!(m.get(0, 1), 8f64.sqrt());
        let m0 = wl_pseudometric_matrix(&ds, 0).unwrap();
        assert_eq!(m0.get(0, 1), 0.0);
    }

    #[test]
    fn random_examples() {
        let a = random_selection(100, 10, 7, None).unwrap();
        assert_eq!(a, random_selection(100, 10, 7, None).unwrap());
        assert_eq!(a.tau.iter().sum::<usize>(), 100);
        assert_eq!(
            random_selection(5, 5, 1, None).unwrap().indices,
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(random_selection(7, 3, 1, None).unwrap().tau, vec![3, 2, 2]);
        assert!(random_selection(3, 4, 1, None).is_err());
        let differ = (0..10u64).any(|s| {
            random_selection(100, 10, 2 * s, None).unwrap().indices
                != random_selection(100, 10, 2 * s + 1, None).unwrap().indices
        });
        assert!(differ);
        let d = block_matrix();
        let s = random_selection(4, 2, 3, Some(&d)).unwrap();
        assert_eq!(s.tau.iter().sum::<usize>(), 4);
        assert!(s.objective.is_some());
    }

    #[test]
    fn selection_json_shape() {
        let s = random_selection(4, 2, 3, None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["method", "k", "seed", "indices", "tau", "objective"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
