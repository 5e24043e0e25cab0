//! Tree distance and Tree Mover's Distance between attributed graphs.
//!
//! Two evaluation routes share one set of conventions:
//!
//! * [`tmd`] runs a bottom-up dynamic program over node pairs and depths
//!   ([`TdTable`]) and never builds a tree.
//! * [`tmd_naive`] materializes every computation tree and evaluates
//!   [`tree_distance`] recursively. It is exponential and only meant as an
//!   oracle on small inputs.
//!
//! Conventions: an optimal-transport value is the minimum total cost of a
//! perfect matching (no multiplicity factor); when matching the child
//! multisets of depth-`d` trees the multiplier is `w(d - 1)`, so a depth-`L`
//! distance consumes `w(1) .. w(L - 1)`; multisets of unequal size are padded
//! with blank trees, i.e. single nodes with an all-zero feature vector.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{computation_tree, induced_subgraph, Dataset, Graph, RootedTree};
use crate::matching::min_cost_value;
use crate::treenorm::tree_norm;

/// Depth-indexed positive weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFn {
    /// `w(d) = λ` at every level.
    Const(f64),
    /// `w(d) = table[d - 1]`.
    Table(Vec<f64>),
}

impl WeightFn {
    /// Weight for level `d >= 1`, if defined.
    pub fn get(&self, d: usize) -> Option<f64> {
        match self {
            WeightFn::Const(l) => Some(*l),
            WeightFn::Table(t) => d.checked_sub(1).and_then(|i| t.get(i)).copied(),
        }
    }

    fn check_positive(&self) -> Result<()> {
        let ok = |x: &f64| x.is_finite() && *x > 0.0;
        let valid = match self {
            WeightFn::Const(l) => ok(l),
            WeightFn::Table(t) => t.iter().all(ok),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "weights must be finite and strictly positive: {self}"
            )))
        }
    }
}

impl fmt::Display for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Const(l) => write!(f, "const:{l}"),
            WeightFn::Table(t) => {
                let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

/// Message for the reserved `pascal` preset.
pub const PASCAL_RESERVED: &str = "weight preset \"pascal\" is reserved but not available: \
its per-depth weights are not defined in this implementation; \
use const:<lambda> or table:w1,...,w(L-1)";

impl FromStr for WeightFn {
    type Err = Error;

    /// Grammar: `const:<float>` or `table:<float>,<float>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("pascal") || s.to_ascii_lowercase().starts_with("pascal:") {
            return Err(Error::Config(PASCAL_RESERVED.into()));
        }
        let parse_num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad weight value {t:?} in {s:?}")))
        };
        let w = if let Some(rest) = s.strip_prefix("const:") {
            WeightFn::Const(parse_num(rest)?)
        } else if let Some(rest) = s.strip_prefix("table:") {
            if rest.trim().is_empty() {
                WeightFn::Table(Vec::new())
            } else {
                WeightFn::Table(rest.split(',').map(parse_num).collect::<Result<_>>()?)
            }
        } else {
            return Err(Error::Config(format!(
                "unknown weight preset {s:?}; expected const:<float> or table:w1,..."
            )));
        };
        w.check_positive()?;
        Ok(w)
    }
}

/// Norm used on node feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureNorm {
    L1,
    #[default]
    L2,
}

impl FeatureNorm {
    #[inline]
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            FeatureNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            FeatureNorm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Distance to the zero vector; bit-identical to `dist(a, 0)`.
    #[inline]
    pub fn norm(self, a: &[f64]) -> f64 {
        match self {
            FeatureNorm::L1 => a.iter().map(|x| (x - 0.0).abs()).sum(),
            FeatureNorm::L2 => a.iter().map(|x| (x - 0.0) * (x - 0.0)).sum::<f64>().sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureNorm::L1 => "l1",
            FeatureNorm::L2 => "l2",
        }
    }
}

impl FromStr for FeatureNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(FeatureNorm::L1),
            "l2" => Ok(FeatureNorm::L2),
            other => Err(Error::Config(format!(
                "unknown norm {other:?}; expected l1 or l2"
            ))),
        }
    }
}

/// Depth, weights and feature norm for TD/TMD and tree norms.
#[derive(Debug, Clone, PartialEq)]
pub struct TmdConfig {
    depth: usize,
    weights: WeightFn,
    norm: FeatureNorm,
}

impl TmdConfig {
    pub fn new(depth: usize, weights: WeightFn, norm: FeatureNorm) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        weights.check_positive()?;
        if let WeightFn::Table(t) = &weights {
            if t.len() < depth - 1 {
                return Err(Error::Config(format!(
                    "depth {depth} needs {} table weights, found {}",
                    depth - 1,
                    t.len()
                )));
            }
        }
        Ok(TmdConfig {
            depth,
            weights,
            norm,
        })
    }

    /// `w ≡ 1`, l2 features.
    pub fn unit(depth: usize) -> Self {
        Self::new(depth, WeightFn::Const(1.0), FeatureNorm::L2).expect("depth >= 1")
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn weights(&self) -> &WeightFn {
        &self.weights
    }

    pub fn norm(&self) -> FeatureNorm {
        self.norm
    }

    pub fn with_norm(mut self, norm: FeatureNorm) -> Self {
        self.norm = norm;
        self
    }

    /// `w(d)` for `1 <= d <= depth - 1`.
    pub fn weight(&self, d: usize) -> Result<f64> {
        if d == 0 || d >= self.depth {
            return Err(Error::Config(format!(
                "weight level {d} outside 1..={} for depth {}",
                self.depth.saturating_sub(1),
                self.depth
            )));
        }
        self.weights
            .get(d)
            .ok_or_else(|| Error::Config(format!("no weight defined for level {d}")))
    }

    /// Metric tag recorded with distance matrices, e.g. `tmd-l2`.
    pub fn metric_tag(&self) -> String {
        format!("tmd-{}", self.norm.as_str())
    }
}

/// Build a square cost matrix between `rows` and `cols`, padding the shorter
/// side with blanks. Returns the side length.
fn padded_costs(
    buf: &mut Vec<f64>,
    rows: &[usize],
    cols: &[usize],
    pair: impl Fn(usize, usize) -> f64,
    row_blank: impl Fn(usize) -> f64,
    col_blank: impl Fn(usize) -> f64,
) -> usize {
    let q = rows.len().max(cols.len());
    buf.clear();
    buf.reserve(q * q);
    for i in 0..q {
        for j in 0..q {
            let c = match (rows.get(i), cols.get(j)) {
                (Some(&r), Some(&c)) => pair(r, c),
                (Some(&r), None) => row_blank(r),
                (None, Some(&c)) => col_blank(c),
                (None, None) => 0.0,
            };
            buf.push(c);
        }
    }
    q
}

/// Optimal-transport value between two padded multisets.
fn padded_ot(
    buf: &mut Vec<f64>,
    rows: &[usize],
    cols: &[usize],
    pair: impl Fn(usize, usize) -> f64,
    row_blank: impl Fn(usize) -> f64,
    col_blank: impl Fn(usize) -> f64,
) -> f64 {
    if rows.is_empty() {
        return cols.iter().map(|&c| col_blank(c)).sum();
    }
    if cols.is_empty() {
        return rows.iter().map(|&r| row_blank(r)).sum();
    }
    let q = padded_costs(buf, rows, cols, pair, row_blank, col_blank);
    min_cost_value(q, buf)
}

fn check_dims(ga: &Graph, gb: &Graph) -> Result<()> {
    if ga.node_count() > 0 && gb.node_count() > 0 && ga.feature_dim() != gb.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: ga.feature_dim(),
            found: gb.feature_dim(),
        });
    }
    Ok(())
}

/// Tree distances between every node pair of two graphs at depths `1..=L`,
/// plus each node's distance to a blank tree.
#[derive(Debug, Clone)]
pub struct TdTable {
    depth: usize,
    na: usize,
    nb: usize,
    pair: Vec<Vec<f64>>,
    blank_a: Vec<Vec<f64>>,
    blank_b: Vec<Vec<f64>>,
}

impl TdTable {
    pub fn build(ga: &Graph, gb: &Graph, cfg: &TmdConfig) -> Result<Self> {
        check_dims(ga, gb)?;
        let (na, nb) = (ga.node_count(), gb.node_count());
        let norm = cfg.norm();
        let mut pair = Vec::with_capacity(cfg.depth());
        let mut blank_a = Vec::with_capacity(cfg.depth());
        let mut blank_b = Vec::with_capacity(cfg.depth());

        let mut base = Vec::with_capacity(na * nb);
        for u in 0..na {
            for v in 0..nb {
                base.push(norm.dist(ga.feature(u), gb.feature(v)));
            }
        }
        pair.push(base);
        blank_a.push(
            (0..na)
                .map(|u| norm.norm(ga.feature(u)))
                .collect::<Vec<_>>(),
        );
        blank_b.push(
            (0..nb)
                .map(|v| norm.norm(gb.feature(v)))
                .collect::<Vec<_>>(),
        );

        let mut buf = Vec::new();
        for d in 2..=cfg.depth() {
            let w = cfg.weight(d - 1)?;
            let prev = &pair[d - 2];
            let pa: &Vec<f64> = &blank_a[d - 2];
            let pb: &Vec<f64> = &blank_b[d - 2];
            let ba: Vec<f64> = (0..na)
                .map(|u| {
                    let sub: f64 = ga.neighbors(u).iter().map(|&x| pa[x]).sum();
                    blank_a[0][u] + w * sub
                })
                .collect();
            let bb: Vec<f64> = (0..nb)
                .map(|v| {
                    let sub: f64 = gb.neighbors(v).iter().map(|&y| pb[y]).sum();
                    blank_b[0][v] + w * sub
                })
                .collect();
            let mut cur = Vec::with_capacity(na * nb);
            for u in 0..na {
                for v in 0..nb {
                    let ot = padded_ot(
                        &mut buf,
                        ga.neighbors(u),
                        gb.neighbors(v),
                        |x, y| prev[x * nb + y],
                        |x| pa[x],
                        |y| pb[y],
                    );
                    cur.push(pair[0][u * nb + v] + w * ot);
                }
            }
            pair.push(cur);
            blank_a.push(ba);
            blank_b.push(bb);
        }
        Ok(TdTable {
            depth: cfg.depth(),
            na,
            nb,
            pair,
            blank_a,
            blank_b,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// TD between the depth-`d` computation trees of `u` (first graph) and `v`.
    pub fn pair(&self, d: usize, u: usize, v: usize) -> f64 {
        self.pair[d - 1][u * self.nb + v]
    }

    /// TD between the depth-`d` tree of `u` in the first graph and a blank tree.
    pub fn blank_a(&self, d: usize, u: usize) -> f64 {
        self.blank_a[d - 1][u]
    }

    pub fn blank_b(&self, d: usize, v: usize) -> f64 {
        self.blank_b[d - 1][v]
    }

    /// Padded matching over all depth-`L` trees of both graphs.
    pub fn top_level(&self) -> f64 {
        let rows: Vec<usize> = (0..self.na).collect();
        let cols: Vec<usize> = (0..self.nb).collect();
        let l = self.depth;
        padded_ot(
            &mut Vec::new(),
            &rows,
            &cols,
            |u, v| self.pair(l, u, v),
            |u| self.blank_a(l, u),
            |v| self.blank_b(l, v),
        )
    }
}

/// Tree Mover's Distance via the dynamic program.
///
/// The pair is evaluated in a canonical orientation, so `tmd(a, b)` and
/// `tmd(b, a)` are bit-identical, and content-equal graphs give exactly 0.
pub fn tmd(ga: &Graph, gb: &Graph, cfg: &TmdConfig) -> Result<f64> {
    check_dims(ga, gb)?;
    let (first, second) = match ga.content_cmp(gb) {
        std::cmp::Ordering::Equal => return Ok(0.0),
        std::cmp::Ordering::Less => (ga, gb),
        std::cmp::Ordering::Greater => (gb, ga),
    };
    Ok(TdTable::build(first, second, cfg)?.top_level())
}

struct TreeView<'a> {
    tree: &'a RootedTree,
    children: Vec<Vec<usize>>,
    heights: Vec<usize>,
}

impl<'a> TreeView<'a> {
    fn new(tree: &'a RootedTree) -> Self {
        TreeView {
            tree,
            children: tree.children(),
            heights: tree.heights(),
        }
    }

    fn feature(&self, x: usize) -> &[f64] {
        &self.tree.nodes[x].feature
    }
}

fn td_blank(t: &TreeView, x: usize, cfg: &TmdConfig) -> Result<f64> {
    let mut total = cfg.norm().norm(t.feature(x));
    let h = t.heights[x];
    if h > 1 {
        let w = cfg.weight(h - 1)?;
        let mut sub = 0.0;
        for &c in &t.children[x] {
            sub += td_blank(t, c, cfg)?;
        }
        total += w * sub;
    }
    Ok(total)
}

fn td_nodes(a: &TreeView, x: usize, b: &TreeView, y: usize, cfg: &TmdConfig) -> Result<f64> {
    let mut total = cfg.norm().dist(a.feature(x), b.feature(y));
    let depth = a.heights[x].max(b.heights[y]);
    if depth > 1 {
        let w = cfg.weight(depth - 1)?;
        let ca = &a.children[x];
        let cb = &b.children[y];
        let q = ca.len().max(cb.len());
        let mut costs = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                costs.push(match (ca.get(i), cb.get(j)) {
                    (Some(&u), Some(&v)) => td_nodes(a, u, b, v, cfg)?,
                    (Some(&u), None) => td_blank(a, u, cfg)?,
                    (None, Some(&v)) => td_blank(b, v, cfg)?,
                    (None, None) => 0.0,
                });
            }
        }
        total += w * min_cost_value(q, &costs);
    }
    Ok(total)
}

/// Recursive tree distance between two explicit rooted trees.
///
/// The child multisets of two trees whose deeper member has depth `d` are
/// matched with multiplier `w(d - 1)`.
pub fn tree_distance(ta: &RootedTree, tb: &RootedTree, cfg: &TmdConfig) -> Result<f64> {
    if ta.depth > cfg.depth() || tb.depth > cfg.depth() {
        return Err(Error::Config(format!(
            "tree depth {} exceeds configured depth {}",
            ta.depth.max(tb.depth),
            cfg.depth()
        )));
    }
    let (a, b) = (TreeView::new(ta), TreeView::new(tb));
    td_nodes(&a, 0, &b, 0, cfg)
}

/// Tree distance between a rooted tree and a blank tree.
pub fn tree_distance_to_blank(t: &RootedTree, cfg: &TmdConfig) -> Result<f64> {
    if t.depth > cfg.depth() {
        return Err(Error::Config(format!(
            "tree depth {} exceeds configured depth {}",
            t.depth,
            cfg.depth()
        )));
    }
    td_blank(&TreeView::new(t), 0, cfg)
}

/// Node limit for [`tmd_naive`].
pub const NAIVE_MAX_NODES: usize = 12;
/// Depth limit for [`tmd_naive`].
pub const NAIVE_MAX_DEPTH: usize = 4;

/// TMD by materializing all computation trees. Oracle scale only.
pub fn tmd_naive(ga: &Graph, gb: &Graph, cfg: &TmdConfig) -> Result<f64> {
    check_dims(ga, gb)?;
    if ga.node_count() > NAIVE_MAX_NODES || gb.node_count() > NAIVE_MAX_NODES {
        return Err(Error::SizeLimit(format!(
            "naive TMD supports at most {NAIVE_MAX_NODES} nodes per graph"
        )));
    }
    if cfg.depth() > NAIVE_MAX_DEPTH {
        return Err(Error::SizeLimit(format!(
            "naive TMD supports depth at most {NAIVE_MAX_DEPTH}"
        )));
    }
    let build = |g: &Graph| -> Result<Vec<RootedTree>> {
        (0..g.node_count())
            .map(|v| computation_tree(g, v, cfg.depth()))
            .collect()
    };
    let (ta, tb) = (build(ga)?, build(gb)?);
    let (va, vb): (Vec<TreeView>, Vec<TreeView>) = (
        ta.iter().map(TreeView::new).collect(),
        tb.iter().map(TreeView::new).collect(),
    );
    let q = va.len().max(vb.len());
    if q == 0 {
        return Ok(0.0);
    }
    let mut costs = Vec::with_capacity(q * q);
    for i in 0..q {
        for j in 0..q {
            costs.push(match (va.get(i), vb.get(j)) {
                (Some(a), Some(b)) => td_nodes(a, 0, b, 0, cfg)?,
                (Some(a), None) => td_blank(a, 0, cfg)?,
                (None, Some(b)) => td_blank(b, 0, cfg)?,
                (None, None) => 0.0,
            });
        }
    }
    Ok(min_cost_value(q, &costs))
}

/// Tree norm as the naive TMD to the empty graph. Oracle scale only.
pub fn tree_norm_naive(g: &Graph, cfg: &TmdConfig) -> Result<f64> {
    tmd_naive(g, &Graph::empty(g.feature_dim()), cfg)
}

/// TMD between `g` and its induced subgraph on `nodes`, as a tree-norm difference.
pub fn tmd_subgraph(g: &Graph, nodes: &[usize], cfg: &TmdConfig) -> Result<f64> {
    let sub = induced_subgraph(g, nodes)?;
    let full = tree_norm(g, cfg)?.value;
    let part = tree_norm(&sub, cfg)?.value;
    Ok((full - part).max(0.0))
}

fn sorted_subset(g: &Graph, nodes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut keep = nodes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.last().is_some_and(|&v| v >= g.node_count()) {
        return Err(Error::Input("subset node out of range".into()));
    }
    let mut position = vec![usize::MAX; g.node_count()];
    for (i, &v) in keep.iter().enumerate() {
        position[v] = i;
    }
    Ok((keep, position))
}

/// Cost of the identity plan between `g` and `g[nodes]`: every retained node's
/// tree goes to its own copy, every deleted node's tree to a blank.
pub fn identity_plan_cost(g: &Graph, nodes: &[usize], cfg: &TmdConfig) -> Result<f64> {
    let (keep, position) = sorted_subset(g, nodes)?;
    let sub = induced_subgraph(g, &keep)?;
    let table = TdTable::build(g, &sub, cfg)?;
    let l = cfg.depth();
    Ok((0..g.node_count())
        .map(|v| match position[v] {
            usize::MAX => table.blank_a(l, v),
            p => table.pair(l, v, p),
        })
        .sum())
}

/// Three-way split of `TMD(G, G[S])` under the identity plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgraphDecomposition {
    /// Σ over deleted nodes of their feature norms.
    pub deleted_features: f64,
    /// `w(L-1)` × Σ over deleted nodes of their child trees matched to blanks.
    pub removal: f64,
    /// `w(L-1)` × Σ over retained nodes of the matching between their child
    /// trees in `G` and in `G[S]`.
    pub retained: f64,
}

impl SubgraphDecomposition {
    pub fn total(&self) -> f64 {
        self.deleted_features + self.removal + self.retained
    }
}

pub fn subgraph_decomposition(
    g: &Graph,
    nodes: &[usize],
    cfg: &TmdConfig,
) -> Result<SubgraphDecomposition> {
    let (keep, position) = sorted_subset(g, nodes)?;
    let sub = induced_subgraph(g, &keep)?;
    let norm = cfg.norm();
    let deleted = (0..g.node_count()).filter(|&v| position[v] == usize::MAX);
    let deleted_features: f64 = deleted.clone().map(|v| norm.norm(g.feature(v))).sum();
    let l = cfg.depth();
    if l == 1 {
        return Ok(SubgraphDecomposition {
            deleted_features,
            removal: 0.0,
            retained: 0.0,
        });
    }
    let w = cfg.weight(l - 1)?;
    let table = TdTable::build(g, &sub, cfg)?;
    let removal: f64 = deleted
        .map(|v| {
            g.neighbors(v)
                .iter()
                .map(|&u| table.blank_a(l - 1, u))
                .sum::<f64>()
        })
        .sum();
    let mut buf = Vec::new();
    let retained: f64 = keep
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            padded_ot(
                &mut buf,
                g.neighbors(v),
                sub.neighbors(p),
                |x, y| table.pair(l - 1, x, y),
                |x| table.blank_a(l - 1, x),
                |y| table.blank_b(l - 1, y),
            )
        })
        .sum();
    Ok(SubgraphDecomposition {
        deleted_features,
        removal: w * removal,
        retained: w * retained,
    })
}

/// Symmetric pairwise distances stored as the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    pub metric: String,
    pub depth: u32,
    pub weight_preset: String,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(
        n: usize,
        metric: impl Into<String>,
        depth: u32,
        weight_preset: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = n.checked_mul(n.saturating_sub(1)).map(|x| x / 2);
        if expected != Some(values.len()) {
            return Err(Error::Input(format!(
                "{} values do not fill the upper triangle of a {n}x{n} matrix",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Input(format!(
                "distance values must be >= 0, found {bad}"
            )));
        }
        Ok(DistanceMatrix {
            n,
            metric: metric.into(),
            depth,
            weight_preset: weight_preset.into(),
            values,
        })
    }

    /// Fill from a function evaluated on every `i < j`.
    pub fn from_fn(
        n: usize,
        metric: impl Into<String>,
        depth: u32,
        weight_preset: impl Into<String>,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(f(i, j));
            }
        }
        Self::new(n, metric, depth, weight_preset, values)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.values[i * self.n - i * (i + 1) / 2 + (j - i - 1)]
    }
}

/// TMD between every pair of dataset graphs, evaluated in parallel.
pub fn pairwise_matrix(ds: &Dataset, cfg: &TmdConfig) -> Result<DistanceMatrix> {
    if ds.is_empty() {
        return Err(Error::Input(
            "pairwise matrix needs a non-empty dataset".into(),
        ));
    }
    let n = ds.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let graphs = ds.graphs();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| tmd(&graphs[i], &graphs[j], cfg))
        .collect::<Result<Vec<f64>>>()?;
    DistanceMatrix::new(
        n,
        cfg.metric_tag(),
        cfg.depth() as u32,
        cfg.weights().to_string(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TreeNode;

    fn unit_path(n: usize) -> Graph {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(edges, vec![vec![1.0]; n], None).unwrap()
    }

    fn k3(f: [f64; 3]) -> Graph {
        Graph::new(
            vec![(0, 1), (1, 2), (0, 2)],
            f.iter().map(|&x| vec![x]).collect(),
            None,
        )
        .unwrap()
    }

    fn leaf(x: f64) -> RootedTree {
        RootedTree {
            nodes: vec![TreeNode {
                feature: vec![x],
                parent: None,
                origin: 0,
            }],
            depth: 1,
        }
    }

    #[test]
    fn weight_spec_grammar() {
        assert_eq!("const:1".parse::<WeightFn>().unwrap(), WeightFn::Const(1.0));
        assert_eq!(
            "table:1,0.5".parse::<WeightFn>().unwrap(),
            WeightFn::Table(vec![1.0, 0.5])
        );
        assert_eq!(WeightFn::Table(vec![1.0, 0.5]).to_string(), "table:1,0.5");
        assert_eq!(WeightFn::Const(2.5).to_string(), "const:2.5");
        let err = "pascal".parse::<WeightFn>().unwrap_err();
        assert!(err.to_string().contains("reserved"));
        assert!("const:0".parse::<WeightFn>().is_err());
        assert!("const:-1".parse::<WeightFn>().is_err());
        assert!("const:nan".parse::<WeightFn>().is_err());
        assert!("table:1,x".parse::<WeightFn>().is_err());
        assert!("linear:1".parse::<WeightFn>().is_err());
    }

    #[test]
    fn config_rejects_short_tables() {
        assert!(TmdConfig::new(3, WeightFn::Table(vec![1.0]), FeatureNorm::L2).is_err());
        assert!(TmdConfig::new(3, WeightFn::Table(vec![1.0, 2.0]), FeatureNorm::L2).is_ok());
        assert!(TmdConfig::new(0, WeightFn::Const(1.0), FeatureNorm::L2).is_err());
    }

    #[test]
    fn tree_distance_examples() {
        let cfg = TmdConfig::unit(2);
        let p = unit_path(2);
        let t = computation_tree(&p, 0, 2).unwrap();
        assert_eq!(tree_distance(&t, &t, &cfg).unwrap(), 0.0);
        assert_eq!(tree_distance_to_blank(&leaf(3.0), &cfg).unwrap(), 3.0);
        assert_eq!(tree_distance(&leaf(3.0), &leaf(0.0), &cfg).unwrap(), 3.0);
        // Root [1] with one child [1] vs bare root [1].
        assert_eq!(tree_distance(&t, &leaf(1.0), &cfg).unwrap(), 1.0);
        let deep = computation_tree(&p, 0, 3).unwrap();
        assert!(matches!(
            tree_distance(&deep, &t, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tmd_examples() {
        let cfg = TmdConfig::unit(2);
        let p2 = unit_path(2);
        let tri = k3([1.0; 3]);
        assert_eq!(tmd(&p2, &p2, &cfg).unwrap(), 0.0);
        assert_eq!(tmd(&p2, &Graph::empty(1), &cfg).unwrap(), 4.0);
        assert_eq!(tmd(&tri, &p2, &cfg).unwrap(), 5.0);
        assert_eq!(tmd(&p2, &tri, &cfg).unwrap(), 5.0);
        for (a, b) in [(&p2, &Graph::empty(1)), (&tri, &p2)] {
            assert_eq!(tmd_naive(a, b, &cfg).unwrap(), tmd(a, b, &cfg).unwrap());
        }
        assert_eq!(tmd_naive(&p2, &p2, &cfg).unwrap(), 0.0);
        let one = Graph::new(vec![], vec![vec![1.0]], None).unwrap();
        let four = Graph::new(vec![], vec![vec![4.0]], None).unwrap();
        assert_eq!(tmd_naive(&one, &four, &TmdConfig::unit(1)).unwrap(), 3.0);
        assert_eq!(tmd(&one, &four, &TmdConfig::unit(1)).unwrap(), 3.0);
    }

    #[test]
    fn tmd_dimension_mismatch() {
        let a = Graph::new(vec![], vec![vec![1.0]], None).unwrap();
        let b = Graph::new(vec![], vec![vec![1.0, 2.0]], None).unwrap();
        assert!(matches!(
            tmd(&a, &b, &TmdConfig::unit(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn naive_scale_limits() {
        let big = unit_path(13);
        assert!(matches!(
            tmd_naive(&big, &big, &TmdConfig::unit(2)),
            Err(Error::SizeLimit(_))
        ));
        let p = unit_path(3);
        assert!(matches!(
            tmd_naive(&p, &p, &TmdConfig::unit(5)),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn tree_norm_naive_examples() {
        let cfg = TmdConfig::unit(2);
        assert_eq!(tree_norm_naive(&Graph::empty(1), &cfg).unwrap(), 0.0);
        let five = Graph::new(vec![], vec![vec![5.0]], None).unwrap();
        for l in 1..=4 {
            assert_eq!(tree_norm_naive(&five, &TmdConfig::unit(l)).unwrap(), 5.0);
        }
        assert_eq!(tree_norm_naive(&unit_path(2), &cfg).unwrap(), 4.0);
        assert_eq!(tree_norm_naive(&k3([3.0, 1.0, 1.0]), &cfg).unwrap(), 15.0);
    }

    #[test]
    fn subgraph_examples() {
        let cfg = TmdConfig::unit(2);
        let p2 = unit_path(2);
        assert_eq!(tmd_subgraph(&p2, &[0, 1], &cfg).unwrap(), 0.0);
        assert_eq!(tmd_subgraph(&p2, &[0], &cfg).unwrap(), 3.0);
        let sub = induced_subgraph(&p2, &[0]).unwrap();
        assert_eq!(tmd(&p2, &sub, &cfg).unwrap(), 3.0);
        let d = subgraph_decomposition(&p2, &[0], &cfg).unwrap();
        assert_eq!((d.deleted_features, d.removal, d.retained), (1.0, 1.0, 1.0));
        assert_eq!(identity_plan_cost(&p2, &[0], &cfg).unwrap(), 3.0);

        let tri = k3([3.0, 1.0, 1.0]);
        assert_eq!(tmd_subgraph(&tri, &[0, 1], &cfg).unwrap(), 7.0);
        let sub = induced_subgraph(&tri, &[0, 1]).unwrap();
        assert_eq!(tmd(&tri, &sub, &cfg).unwrap(), 7.0);
        assert!(tmd_subgraph(&tri, &[5], &cfg).is_err());
    }

    #[test]
    fn depth_one_decomposition_is_feature_mass() {
        let cfg = TmdConfig::unit(1);
        let tri = k3([3.0, 1.0, 2.0]);
        let d = subgraph_decomposition(&tri, &[1], &cfg).unwrap();
        assert_eq!(d.total(), 5.0);
        assert_eq!(d.removal + d.retained, 0.0);
    }

    #[test]
    fn distance_matrix_indexing() {
        let m = DistanceMatrix::from_fn(4, "t", 1, "none", |i, j| (10 * i + j) as f64).unwrap();
        for i in 0..4 {
            assert_eq!(m.get(i, i), 0.0);
            for j in i + 1..4 {
                assert_eq!(m.get(i, j), (10 * i + j) as f64);
                assert_eq!(m.get(j, i), (10 * i + j) as f64);
            }
        }
        assert!(DistanceMatrix::new(3, "t", 1, "x", vec![1.0]).is_err());
        assert!(DistanceMatrix::new(2, "t", 1, "x", vec![-1.0]).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let cfg = TmdConfig::unit(2);
        let p2 = unit_path(2);
        let ds = Dataset::new("d", vec![p2.clone(), p2.clone()]).unwrap();
        assert_eq!(pairwise_matrix(&ds, &cfg).unwrap().values(), &[0.0]);
        let ds = Dataset::new("d", vec![k3([1.0; 3]), p2.clone()]).unwrap();
        let m = pairwise_matrix(&ds, &cfg).unwrap();
        assert_eq!(m.values(), &[5.0]);
        assert_eq!(m.metric, "tmd-l2");
        assert_eq!(m.weight_preset, "const:1");
        let ds = Dataset::new("d", vec![p2]).unwrap();
        assert!(pairwise_matrix(&ds, &cfg).unwrap().values().is_empty());
        assert!(pairwise_matrix(&Dataset::new("d", vec![]).unwrap(), &cfg).is_err());
    }
}
