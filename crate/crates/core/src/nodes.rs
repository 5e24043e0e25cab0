//! Node-level subsampling: candidate subsets from BFS balls, a random walk
//! and k-core peeling, and selection of the candidate whose induced subgraph
//! has the largest tree norm.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, induced_subgraph, Dataset, Graph};
use crate::medoids::{binomial, next_combination};
use crate::tmd::TmdConfig;
use crate::treenorm::tree_norm;

/// Relative tolerance under which two objective values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Index of the winning item: the best value up to [`TIE_TOLERANCE`]
/// (relative to `scale`), ties resolved toward the lexicographically smallest
/// set. Sets are compared as given, so callers pass them sorted.
pub fn lex_best(values: &[f64], sets: &[Vec<usize>], maximize: bool, scale: f64) -> Option<usize> {
    let best = if maximize {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let tol = TIE_TOLERANCE * scale.abs().max(best.abs()).max(1.0);
    (0..values.len())
        .filter(|&i| (values[i] - best).abs() <= tol)
        .min_by(|&a, &b| sets[a].cmp(&sets[b]))
}

/// Candidate node subsets with the heuristic that produced each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub subsets: Vec<Vec<usize>>,
    pub provenance: Vec<String>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a subset in sorted canonical form; duplicates keep their first tag.
    pub fn push(&mut self, subset: impl IntoIterator<Item = usize>, tag: impl Into<String>) {
        let set: Vec<usize> = subset
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !self.subsets.contains(&set) {
            self.subsets.push(set);
            self.provenance.push(tag.into());
        }
    }

    pub fn extend(&mut self, other: CandidateSet) {
        for (s, t) in other.subsets.into_iter().zip(other.provenance) {
            self.push(s, t);
        }
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// One graph's kept nodes and the resulting tree norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSubsample {
    pub id: usize,
    pub kept: Vec<usize>,
    pub tree_norm_full: f64,
    pub tree_norm_sub: f64,
    /// TMD between the graph and its induced subgraph on `kept`.
    #[serde(rename = "tmd")]
    pub tmd_to_full: f64,
    pub provenance: String,
}

/// For every node, the largest BFS ball around it with at most `k` nodes.
pub fn k_bfs_candidates(g: &Graph, k: usize) -> CandidateSet {
    let mut out = CandidateSet::new();
    let k = k.max(1);
    for v in 0..g.node_count() {
        let dist = bfs_distances(g, v);
        let reach = dist
            .iter()
            .filter(|&&d| d != usize::MAX)
            .max()
            .copied()
            .unwrap_or(0);
        let dist = &dist;
        let ball = |r: usize| (0..g.node_count()).filter(move |&u| dist[u] <= r);
        let mut radius = 0;
        while radius < reach && ball(radius + 1).count() <= k {
            radius += 1;
        }
        out.push(ball(radius), format!("bfs:{v}"));
    }
    out
}

/// Restart probability of [`rw_candidate`].
pub const RW_RESTART: f64 = 0.15;
/// Step cap of [`rw_candidate`], per requested node.
pub const RW_STEPS_PER_NODE: usize = 50;

fn max_degree_node(g: &Graph) -> Option<usize> {
    (0..g.node_count()).min_by_key(|&v| (Reverse(g.degree(v)), v))
}

/// Nodes collected by a seeded random walk with restarts from the
/// highest-degree node, padded with unvisited nodes in ascending order.
pub fn rw_candidate(g: &Graph, k: usize, seed: u64) -> Vec<usize> {
    let n = g.node_count();
    let target = k.max(1).min(n);
    let Some(start) = max_degree_node(g) else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::from([start]);
    let mut cur = start;
    let mut steps = 0;
    while seen.len() < target && steps < RW_STEPS_PER_NODE * k.max(1) {
        steps += 1;
        let nbrs = g.neighbors(cur);
        cur = if nbrs.is_empty() || rng.random::<f64>() < RW_RESTART {
            start
        } else {
            nbrs[rng.random_range(0..nbrs.len())]
        };
        seen.insert(cur);
    }
    let mut pad = 0;
    while seen.len() < target {
        seen.insert(pad);
        pad += 1;
    }
    seen.into_iter().collect()
}

/// Core number of every node by min-degree peeling.
pub fn core_numbers(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut core = vec![0; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((deg[v], v))).collect();
    let mut level = 0;
    while let Some(Reverse((d, v))) = heap.pop() {
        if removed[v] || d != deg[v] {
            continue;
        }
        removed[v] = true;
        level = level.max(d);
        core[v] = level;
        for &u in g.neighbors(v) {
            if !removed[u] {
                deg[u] -= 1;
                heap.push(Reverse((deg[u], u)));
            }
        }
    }
    core
}

/// The `k` nodes ranked first by (core number desc, degree desc, index asc).
pub fn kcore_candidate(g: &Graph, k: usize) -> Vec<usize> {
    let core = core_numbers(g);
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by_key(|&v| (Reverse(core[v]), Reverse(g.degree(v)), v));
    order.truncate(k.max(1));
    order.sort_unstable();
    order
}

fn subsample_from(
    g: &Graph,
    kept: Vec<usize>,
    full: f64,
    cfg: &TmdConfig,
    provenance: String,
) -> Result<NodeSubsample> {
    let sub = tree_norm(&induced_subgraph(g, &kept)?, cfg)?.value;
    Ok(NodeSubsample {
        id: 0,
        kept,
        tree_norm_full: full,
        tree_norm_sub: sub,
        tmd_to_full: (full - sub).max(0.0),
        provenance,
    })
}

/// Candidate whose induced subgraph has the largest tree norm, i.e. the
/// smallest TMD to the full graph.
pub fn select_subset(g: &Graph, cands: &CandidateSet, cfg: &TmdConfig) -> Result<NodeSubsample> {
    if cands.is_empty() {
        return Err(Error::Input("candidate set is empty".into()));
    }
    let full = tree_norm(g, cfg)?.value;
    let values = cands
        .subsets
        .iter()
        .map(|s| Ok(tree_norm(&induced_subgraph(g, s)?, cfg)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let win = lex_best(&values, &cands.subsets, true, full).expect("non-empty");
    let sub = values[win];
    Ok(NodeSubsample {
        id: 0,
        kept: cands.subsets[win].clone(),
        tree_norm_full: full,
        tree_norm_sub: sub,
        tmd_to_full: (full - sub).max(0.0),
        provenance: cands.provenance[win].clone(),
    })
}

/// Limit on the number of subsets [`brute_force_select`] enumerates.
pub const BRUTE_FORCE_SELECT_MAX: u128 = 100_000;

/// Every `k`-subset of the nodes, in lexicographic order.
pub fn all_k_subsets(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k > n {
        return Err(Error::Input(format!("k = {k} exceeds {n} nodes")));
    }
    if binomial(n, k) > BRUTE_FORCE_SELECT_MAX {
        return Err(Error::SizeLimit(format!(
            "C({n},{k}) exceeds {BRUTE_FORCE_SELECT_MAX} subsets"
        )));
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut out = vec![comb.clone()];
    if k == 0 {
        return Ok(out);
    }
    while next_combination(&mut comb, n) {
        out.push(comb.clone());
    }
    Ok(out)
}

/// Exhaustive tree-norm maximization over all `k`-subsets.
pub fn brute_force_select(g: &Graph, k: usize, cfg: &TmdConfig) -> Result<NodeSubsample> {
    let mut cands = CandidateSet::new();
    for s in all_k_subsets(g.node_count(), k)? {
        cands.push(s, "exhaustive");
    }
    select_subset(g, &cands, cfg)
}

/// Decision form: does some `k`-subset reach tree norm at least `threshold`?
/// Returns the optimizer's answer together with the decision.
pub fn brute_force_decide(
    g: &Graph,
    k: usize,
    cfg: &TmdConfig,
    threshold: f64,
) -> Result<(NodeSubsample, bool)> {
    let best = brute_force_select(g, k, cfg)?;
    let yes = best.tree_norm_sub >= threshold;
    Ok((best, yes))
}

/// Which candidate heuristics to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heuristics {
    pub bfs: bool,
    pub rw: bool,
    pub kcore: bool,
}

impl Heuristics {
    pub const ALL: Heuristics = Heuristics {
        bfs: true,
        rw: true,
        kcore: true,
    };
}

impl Default for Heuristics {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for Heuristics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut h = Heuristics {
            bfs: false,
            rw: false,
            kcore: false,
        };
        let mut seen = HashSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "bfs" => h.bfs = true,
                "rw" => h.rw = true,
                "kcore" => h.kcore = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown heuristic {other:?}; expected bfs, rw or kcore"
                    )))
                }
            }
            seen.insert(part);
        }
        if seen.is_empty() {
            return Err(Error::Config("at least one heuristic is required".into()));
        }
        Ok(h)
    }
}

/// Node budget `max(1, round(frac * n))`, capped at `n`.
pub fn budget(n: usize, frac: f64) -> usize {
    ((frac * n as f64).round() as usize).max(1).min(n)
}

/// Union of the enabled heuristics' candidates for one graph.
pub fn candidates(g: &Graph, k: usize, heuristics: Heuristics, seed: u64) -> CandidateSet {
    let mut out = CandidateSet::new();
    if heuristics.bfs {
        out.extend(k_bfs_candidates(g, k));
    }
    if heuristics.rw {
        out.push(rw_candidate(g, k, seed), "rw");
    }
    if heuristics.kcore {
        out.push(kcore_candidate(g, k), "kcore");
    }
    out
}

/// Subsample every graph of a dataset to a `frac` node budget.
/// Graph `i` uses walk seed `seed + i`.
pub fn subsample_dataset(
    ds: &Dataset,
    frac: f64,
    cfg: &TmdConfig,
    heuristics: Heuristics,
    seed: u64,
) -> Result<Vec<NodeSubsample>> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Config(format!("fraction {frac} outside (0, 1]")));
    }
    ds.graphs()
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut out = if g.node_count() == 0 {
                subsample_from(g, Vec::new(), 0.0, cfg, "empty".into())?
            } else {
                let k = budget(g.node_count(), frac);
                let cands = candidates(g, k, heuristics, seed.wrapping_add(i as u64));
                select_subset(g, &cands, cfg)?
            };
            out.id = i;
            Ok(out)
        })
        .collect()
}
