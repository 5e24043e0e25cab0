//! Attributed undirected graphs, datasets and explicit computation trees.
//!
//! A [`Graph`] stores its edges as a sorted list of unordered pairs `(u, v)`
//! with `u < v` and its node features as a dense row-major matrix. The
//! neighbor index used by every traversal is built lazily and cached.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Compressed neighbor lists; neighbors of each node are in ascending order.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    fn build(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        for &(u, v) in edges {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Adjacency { offsets, targets }
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Undirected attributed graph.
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    dim: usize,
    features: Vec<f64>,
    label: Option<i64>,
    adjacency: OnceLock<Adjacency>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            n: self.n,
            edges: self.edges.clone(),
            dim: self.dim,
            features: self.features.clone(),
            label: self.label,
            adjacency: OnceLock::new(),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.edges == other.edges
            && self.label == other.label
            && self.features_match(other)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges)
            .field("dim", &self.dim)
            .field("features", &self.features)
            .field("label", &self.label)
            .finish()
    }
}

/// A broken [`Graph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { node: usize },
    EndpointOutOfRange { edge: (usize, usize) },
    DuplicateEdge { edge: (usize, usize) },
    FeatureRowCount { expected: usize, found: usize },
    RaggedFeatures { row: usize },
    ZeroFeatureDim,
    NonFiniteFeature { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::EndpointOutOfRange { edge } => {
                write!(f, "endpoint out of range in edge ({}, {})", edge.0, edge.1)
            }
            Violation::DuplicateEdge { edge } => {
                write!(f, "duplicate edge ({}, {})", edge.0, edge.1)
            }
            Violation::FeatureRowCount { expected, found } => {
                write!(
                    f,
                    "feature row count {found} does not match node count {expected}"
                )
            }
            Violation::RaggedFeatures { row } => write!(f, "feature row {row} has wrong length"),
            Violation::ZeroFeatureDim => write!(f, "feature dimension is zero"),
            Violation::NonFiniteFeature { node } => write!(f, "non-finite feature at node {node}"),
        }
    }
}

/// Check every [`Graph`] invariant; an empty list means the graph is valid.
pub fn validate(g: &Graph) -> Vec<Violation> {
    let mut out = Vec::new();
    if g.n > 0 && g.dim == 0 {
        out.push(Violation::ZeroFeatureDim);
    }
    if g.features.len() != g.n * g.dim {
        let found = g.features.len().checked_div(g.dim).unwrap_or(0);
        out.push(Violation::FeatureRowCount {
            expected: g.n,
            found,
        });
    } else {
        for v in 0..g.n {
            if g.feature(v).iter().any(|x| !x.is_finite()) {
                out.push(Violation::NonFiniteFeature { node: v });
            }
        }
    }
    let mut seen = BTreeSet::new();
    for &(u, v) in &g.edges {
        if u >= g.n || v >= g.n {
            out.push(Violation::EndpointOutOfRange { edge: (u, v) });
        } else if u == v {
            out.push(Violation::SelfLoop { node: u });
        } else if !seen.insert((u.min(v), u.max(v))) {
            out.push(Violation::DuplicateEdge { edge: (u, v) });
        }
    }
    out
}

impl Graph {
    /// Build a graph from feature rows, validating every invariant.
    ///
    /// Edges may be given in any orientation and order; they are stored as
    /// sorted `(min, max)` pairs.
    pub fn new(
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
        label: Option<i64>,
    ) -> Result<Self> {
        let n = features.len();
        let dim = features.first().map_or(0, Vec::len);
        if let Some(row) = features.iter().position(|r| r.len() != dim) {
            return Err(Error::Validation(
                Violation::RaggedFeatures { row }.to_string(),
            ));
        }
        let flat = features.into_iter().flatten().collect();
        Self::from_flat(n, dim, edges, flat, label)
    }

    /// Build from a flat row-major feature buffer, validating every invariant.
    pub fn from_flat(
        n: usize,
        dim: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<f64>,
        label: Option<i64>,
    ) -> Result<Self> {
        let g = Self::new_unchecked(n, dim, edges, features, label);
        let violations = validate(&g);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Validation(msg.join("; ")));
        }
        Ok(g.normalized())
    }

    /// Assemble a graph without checking invariants. Use [`validate`] to
    /// inspect the result.
    pub fn new_unchecked(
        n: usize,
        dim: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<f64>,
        label: Option<i64>,
    ) -> Self {
        Graph {
            n,
            edges,
            dim,
            features,
            label,
            adjacency: OnceLock::new(),
        }
    }

    fn normalized(mut self) -> Self {
        for e in &mut self.edges {
            *e = (e.0.min(e.1), e.0.max(e.1));
        }
        self.edges.sort_unstable();
        self
    }

    /// Graph with no nodes, carrying feature dimension `dim`.
    pub fn empty(dim: usize) -> Self {
        Self::new_unchecked(0, dim, Vec::new(), Vec::new(), None)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn with_label(mut self, label: Option<i64>) -> Self {
        self.label = label;
        self
    }

    #[inline]
    pub fn feature(&self, v: usize) -> &[f64] {
        &self.features[v * self.dim..(v + 1) * self.dim]
    }

    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|v| self.feature(v).to_vec()).collect()
    }

    pub fn adjacency(&self) -> &Adjacency {
        self.adjacency
            .get_or_init(|| Adjacency::build(self.n, &self.edges))
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adjacency().neighbors(v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency().degree(v)
    }

    /// Same structure with every feature entry multiplied by `c`.
    pub fn scaled_features(&self, c: f64) -> Graph {
        let features = self.features.iter().map(|x| x * c).collect();
        Graph::new_unchecked(self.n, self.dim, self.edges.clone(), features, self.label)
    }

    /// Bitwise comparison of feature buffers; empty graphs match regardless of dimension.
    fn features_match(&self, other: &Graph) -> bool {
        if self.n == 0 && other.n == 0 {
            return true;
        }
        self.dim == other.dim
            && self.features.len() == other.features.len()
            && self
                .features
                .iter()
                .zip(&other.features)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Total order over graph contents, used to orient symmetric computations.
    pub(crate) fn content_cmp(&self, other: &Graph) -> std::cmp::Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.edges.cmp(&other.edges))
            .then_with(|| {
                if self.n == 0 {
                    return std::cmp::Ordering::Equal;
                }
                self.dim.cmp(&other.dim).then_with(|| {
                    let a = self.features.iter().map(|x| x.to_bits());
                    let b = other.features.iter().map(|x| x.to_bits());
                    a.cmp(b)
                })
            })
    }
}

/// Subgraph induced by `nodes`, relabeled in ascending original order.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Graph> {
    let mut keep: Vec<usize> = nodes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&v| v >= g.n) {
        return Err(Error::Input(format!(
            "node {bad} out of range for graph with {} nodes",
            g.n
        )));
    }
    let mut remap = vec![usize::MAX; g.n];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let edges: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|&&(u, v)| remap[u] != usize::MAX && remap[v] != usize::MAX)
        .map(|&(u, v)| (remap[u], remap[v]))
        .collect();
    let mut features = Vec::with_capacity(keep.len() * g.dim);
    for &v in &keep {
        features.extend_from_slice(g.feature(v));
    }
    // Ascending relabeling keeps (u < v) and the sorted order intact.
    Ok(Graph::new_unchecked(
        keep.len(),
        g.dim,
        edges,
        features,
        g.label,
    ))
}

/// Node of a [`RootedTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub feature: Vec<f64>,
    pub parent: Option<usize>,
    /// Graph node this tree node was unrolled from.
    pub origin: usize,
}

/// Explicit rooted tree; node 0 is the root and parents precede children.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    pub nodes: Vec<TreeNode>,
    pub depth: usize,
}

impl RootedTree {
    pub fn root(&self) -> usize {
        0
    }

    /// Child lists, each in insertion order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                children[p].push(i);
            }
        }
        children
    }

    /// Height of every subtree, counting nodes (a leaf has height 1).
    pub fn heights(&self) -> Vec<usize> {
        let mut height = vec![1usize; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            if let Some(p) = self.nodes[i].parent {
                height[p] = height[p].max(height[i] + 1);
            }
        }
        height
    }
}

/// Depth-`depth` computation tree of node `v`: each leaf above the last level
/// gets one child per graph neighbor, revisits allowed.
pub fn computation_tree(g: &Graph, v: usize, depth: usize) -> Result<RootedTree> {
    if v >= g.n {
        return Err(Error::Input(format!("node {v} out of range")));
    }
    if depth == 0 {
        return Err(Error::Input(
            "computation tree depth must be at least 1".into(),
        ));
    }
    let mut nodes = vec![TreeNode {
        feature: g.feature(v).to_vec(),
        parent: None,
        origin: v,
    }];
    let mut frontier = vec![0usize];
    for _ in 1..depth {
        let mut next = Vec::new();
        for &t in &frontier {
            let origin = nodes[t].origin;
            for &u in g.neighbors(origin) {
                nodes.push(TreeNode {
                    feature: g.feature(u).to_vec(),
                    parent: Some(t),
                    origin: u,
                });
                next.push(nodes.len() - 1);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let mut tree = RootedTree { nodes, depth: 0 };
    tree.depth = tree.heights()[0];
    Ok(tree)
}

/// Hop distances from `src` within its component; `usize::MAX` when unreachable.
pub fn bfs_distances(g: &Graph, src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n];
    let mut queue = VecDeque::new();
    dist[src] = 0;
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Ordered collection of graphs sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    feature_dim: usize,
    graphs: Vec<Graph>,
}

impl Dataset {
    /// Build a dataset; every non-empty graph must share `feature_dim`.
    /// Empty graphs adopt the dataset dimension.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        let feature_dim = graphs.iter().find(|g| g.n > 0).map_or(0, |g| g.dim);
        let mut out = Vec::with_capacity(graphs.len());
        for mut g in graphs {
            if g.n == 0 {
                g.dim = feature_dim;
            } else if g.dim != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    found: g.dim,
                });
            }
            out.push(g);
        }
        Ok(Dataset {
            name: name.into(),
            feature_dim,
            graphs: out,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn get(&self, i: usize) -> Option<&Graph> {
        self.graphs.get(i)
    }

    pub fn labels(&self) -> Vec<Option<i64>> {
        self.graphs.iter().map(Graph::label).collect()
    }
}
