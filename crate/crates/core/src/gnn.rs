//! Forward-only GIN models, Lipschitz estimates, the TMD stability report and
//! finite-hypothesis empirical risk minimization checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, Dataset, Graph};
use crate::medoids::{cluster_sizes, medoids_objective, nearest_medoid, Selection};
use crate::nodes::NodeSubsample;
use crate::tmd::{tmd, DistanceMatrix, TmdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// Affine map followed by an activation. `weights` is `d_out` rows of `d_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub d_in: usize,
    pub d_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(
        d_in: usize,
        d_out: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        if weights.len() != d_in * d_out || bias.len() != d_out {
            return Err(Error::Config(format!(
                "layer {d_in}->{d_out} needs {} weights and {d_out} biases",
                d_in * d_out
            )));
        }
        Ok(Layer {
            d_in,
            d_out,
            weights,
            bias,
            activation,
        })
    }

    /// Identity weights, zero bias, identity activation.
    pub fn identity(dim: usize) -> Self {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        Layer::new(dim, dim, w, vec![0.0; dim], Activation::Identity).expect("valid")
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d_out)
            .map(|r| {
                let row = &self.weights[r * self.d_in..(r + 1) * self.d_in];
                let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                self.activation.apply(s + self.bias[r])
            })
            .collect()
    }
}

/// Message-passing layers followed by one readout layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinModel {
    layers: Vec<Layer>,
    eta: f64,
}

impl GinModel {
    /// `layers` ends with the readout layer.
    pub fn new(layers: Vec<Layer>, eta: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config(
                "a model needs at least a readout layer".into(),
            ));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, found {eta}")));
        }
        for pair in layers.windows(2) {
            if pair[0].d_out != pair[1].d_in {
                return Err(Error::Config(format!(
                    "layer output {} does not feed input {}",
                    pair[0].d_out, pair[1].d_in
                )));
            }
        }
        Ok(GinModel { layers, eta })
    }

    /// Identity message passing and readout on `dim`-dimensional features.
    pub fn identity(dim: usize, depth: usize, eta: f64) -> Result<Self> {
        Self::new(
            (0..depth.max(1)).map(|_| Layer::identity(dim)).collect(),
            eta,
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Total number of layers, i.e. the TMD depth it pairs with.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn message_passing_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].d_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out
    }
}

/// Readout `h(G)`. An empty graph reads out the zero vector.
pub fn gin_forward(m: &GinModel, g: &Graph) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n > 0 && g.feature_dim() != m.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.input_dim(),
            found: g.feature_dim(),
        });
    }
    let mut z: Vec<Vec<f64>> = (0..n).map(|v| g.feature(v).to_vec()).collect();
    let mut dim = m.input_dim();
    for layer in &m.layers[..m.layers.len() - 1] {
        z = (0..n)
            .map(|v| {
                let mut agg = vec![0.0; dim];
                for &u in g.neighbors(v) {
                    for (a, x) in agg.iter_mut().zip(&z[u]) {
                        *a += x;
                    }
                }
                let input: Vec<f64> = z[v].iter().zip(&agg).map(|(s, a)| s + m.eta * a).collect();
                layer.apply(&input)
            })
            .collect();
        dim = layer.d_out;
    }
    let mut pooled = vec![0.0; dim];
    for row in &z {
        for (p, x) in pooled.iter_mut().zip(row) {
            *p += x;
        }
    }
    Ok(m.layers[m.layers.len() - 1].apply(&pooled))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub per_layer: Vec<f64>,
    pub product: f64,
    /// False when some layer's power iteration hit the iteration cap.
    pub converged: bool,
}

/// Power-iteration cap for [`spectral_norm`].
pub const POWER_ITERATIONS: usize = 200;
/// Relative-change stopping threshold for [`spectral_norm`].
pub const POWER_TOLERANCE: f64 = 1e-10;

/// Largest singular value of a `rows × cols` row-major matrix by power
/// iteration on `WᵀW`, with a fixed seeded start vector.
pub fn spectral_norm(w: &[f64], rows: usize, cols: usize) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..cols).map(|_| 0.5 + rng.random::<f64>()).collect();
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        n
    };
    normalize(&mut v);
    let mut sigma2 = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let wv: Vec<f64> = (0..rows)
            .map(|r| (0..cols).map(|c| w[r * cols + c] * v[c]).sum())
            .collect();
        let mut wtwv: Vec<f64> = (0..cols)
            .map(|c| (0..rows).map(|r| w[r * cols + c] * wv[r]).sum())
            .collect();
        // Rayleigh quotient vᵀWᵀWv with ‖v‖ = 1.
        let next = wv.iter().map(|x| x * x).sum::<f64>();
        if normalize(&mut wtwv) == 0.0 {
            return (0.0, true);
        }
        v = wtwv;
        let done = (next - sigma2).abs() <= POWER_TOLERANCE * next.abs();
        sigma2 = next;
        if done {
            return (sigma2.sqrt(), true);
        }
    }
    (sigma2.sqrt(), false)
}

/// Per-layer Lipschitz constants: weight spectral norms (activations are 1-Lipschitz).
pub fn layer_lipschitz(m: &GinModel) -> LipschitzProfile {
    let mut per_layer = Vec::with_capacity(m.layers.len());
    let mut converged = true;
    for l in &m.layers {
        let (s, ok) = spectral_norm(&l.weights, l.d_out, l.d_in);
        per_layer.push(s);
        converged &= ok;
    }
    LipschitzProfile {
        product: per_layer.iter().product(),
        per_layer,
        converged,
    }
}

/// Seeded Gaussian GIN with every layer rescaled to unit spectral norm, zero
/// biases and ReLU activations. `depth` counts the readout layer.
pub fn random_gin(
    seed: u64,
    feature_dim: usize,
    hidden: usize,
    out_dim: usize,
    depth: usize,
    eta: f64,
) -> Result<GinModel> {
    if feature_dim == 0 || hidden == 0 || out_dim == 0 || depth == 0 {
        return Err(Error::Config(
            "model dimensions and depth must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth);
    let mut d_in = feature_dim;
    for l in 0..depth {
        let d_out = if l + 1 == depth { out_dim } else { hidden };
        let mut w: Vec<f64> = (0..d_in * d_out)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let (s, _) = spectral_norm(&w, d_out, d_in);
        if s > 0.0 {
            w.iter_mut().for_each(|x| *x /= s);
        }
        layers.push(Layer::new(
            d_in,
            d_out,
            w,
            vec![0.0; d_out],
            Activation::Relu,
        )?);
        d_in = d_out;
    }
    GinModel::new(layers, eta)
}

fn l2_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Ratio tolerance above 1 before a pair counts as violating the bound.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_ratio: f64,
    pub violations: usize,
    pub pairs: usize,
    pub preset: String,
    /// Pairs with a positive readout gap but zero TMD.
    pub infinite: usize,
    pub lipschitz_product: f64,
    pub ratios: Vec<f64>,
}

/// `‖h(a) − h(b)‖₂ / (TMD(a, b) · ΠΦ)` for every pair.
pub fn stability_report(
    m: &GinModel,
    pairs: &[(Graph, Graph)],
    cfg: &TmdConfig,
) -> Result<StabilityReport> {
    if cfg.depth() != m.depth() {
        return Err(Error::Config(format!(
            "TMD depth {} must equal the model's layer count {} (message passing + readout)",
            cfg.depth(),
            m.depth()
        )));
    }
    let product = layer_lipschitz(m).product;
    let ratios = pairs
        .par_iter()
        .map(|(a, b)| {
            let num = l2_gap(&gin_forward(m, a)?, &gin_forward(m, b)?);
            let den = tmd(a, b, cfg)? * product;
            Ok(if den > 0.0 {
                num / den
            } else if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(StabilityReport {
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        violations: ratios
            .iter()
            .filter(|&&r| r > 1.0 + STABILITY_TOLERANCE)
            .count(),
        pairs: ratios.len(),
        preset: cfg.weights().to_string(),
        infinite: ratios.iter().filter(|r| r.is_infinite()).count(),
        lipschitz_product: product,
        ratios,
    })
}

/// Clip level of [`clipped_abs_loss`].
pub const LOSS_CLIP: f64 = 10.0;
/// Lipschitz constant of [`clipped_abs_loss`] in the first readout coordinate.
pub const LOSS_LIPSCHITZ: f64 = 1.0;

/// `min(|out[0] − y|, 10)`.
pub fn clipped_abs_loss(out: &[f64], y: f64) -> f64 {
    (out[0] - y).abs().min(LOSS_CLIP)
}

/// The subsample an ERM check trains on.
#[derive(Debug, Clone, Copy)]
pub enum Subsample<'a> {
    /// Medoid graphs weighted by cluster size, with the TMD matrix defining
    /// the nearest-medoid map.
    Graphs {
        selection: &'a Selection,
        distances: &'a DistanceMatrix,
    },
    /// One induced subgraph per dataset graph.
    Nodes(&'a [NodeSubsample]),
}

/// Tolerance added to every ERM comparison.
pub const ERM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmReport {
    pub mode: String,
    /// Index of the hypothesis minimizing the subsample loss.
    pub erm_index: usize,
    pub loss_full_of_erm: f64,
    pub min_loss_full: f64,
    /// `2cε + 2·label_term`.
    pub bound_rhs: f64,
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `M · max over hypotheses of ΠΦ`.
    pub c: f64,
    /// `(M/n) Σ |y_κ(i) − y_i|`: zero when every graph shares its medoid's
    /// label, and always zero in node mode.
    pub label_term: f64,
    pub satisfied: bool,
    /// Every hypothesis obeys the Lipschitz chain
    /// `gap ≤ (M/n) Σ ‖h(G_κ(i)) − h(G_i)‖ + label_term`.
    pub chain_holds: bool,
    /// Largest `gap − chain_rhs` over hypotheses (≤ tolerance when the chain holds).
    pub chain_max_excess: f64,
    /// Every hypothesis obeys `(M/n) Σ ‖h(G_κ(i)) − h(G_i)‖ ≤ M · ΠΦ · ε`.
    pub tmd_chain_holds: bool,
    pub per_hypothesis: Vec<HypothesisLosses>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLosses {
    pub loss_sub: f64,
    pub loss_full: f64,
    /// `|loss_sub − loss_full|`.
    pub gap: f64,
    /// `(M/n) Σ ‖h(G_κ(i)) − h(G_i)‖`.
    pub readout_term: f64,
    pub lipschitz_product: f64,
}

/// Train by exhaustive ERM over `hypotheses` on the subsample and compare
/// the result on the full dataset with the coreset bound.
pub fn finite_erm_check(
    ds: &Dataset,
    labels: &[f64],
    hypotheses: &[GinModel],
    sub: Subsample,
) -> Result<ErmReport> {
    let n = ds.len();
    if hypotheses.is_empty() {
        return Err(Error::Input("hypothesis set is empty".into()));
    }
    if labels.len() != n {
        return Err(Error::Input(format!(
            "{} labels for {n} graphs",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(Error::Input("ERM check needs a non-empty dataset".into()));
    }
    let m = LOSS_LIPSCHITZ;
    let nf = n as f64;

    // Proxy graph for every i (its medoid, or its induced subgraph) and
    // the weight each proxy evaluation carries.
    let (mode, epsilon, label_term, proxies): (&str, f64, f64, Proxies) = match sub {
        Subsample::Graphs {
            selection,
            distances,
        } => {
            if distances.size() != n {
                return Err(Error::Input(format!(
                    "distance matrix covers {} graphs, dataset has {n}",
                    distances.size()
                )));
            }
            let idx = &selection.indices;
            let kappa: Vec<usize> = (0..n).map(|i| nearest_medoid(distances, idx, i)).collect();
            let label_term = m / nf
                * (0..n)
                    .map(|i| (labels[kappa[i]] - labels[i]).abs())
                    .sum::<f64>();
            (
                "graphs",
                medoids_objective(distances, idx)?,
                label_term,
                Proxies::Medoids {
                    indices: idx.clone(),
                    tau: cluster_sizes(distances, idx)?,
                    kappa,
                },
            )
        }
        Subsample::Nodes(subs) => {
            if subs.len() != n {
                return Err(Error::Input(format!(
                    "{} node subsamples for {n} graphs",
                    subs.len()
                )));
            }
            let graphs = ds
                .graphs()
                .iter()
                .zip(subs)
                .map(|(g, s)| induced_subgraph(g, &s.kept))
                .collect::<Result<Vec<_>>>()?;
            let eps = subs.iter().map(|s| s.tmd_to_full).sum::<f64>() / nf;
            ("nodes", eps, 0.0, Proxies::Induced(graphs))
        }
    };

    let per_hypothesis = hypotheses
        .par_iter()
        .map(|h| evaluate(h, ds, labels, &proxies, m))
        .collect::<Result<Vec<HypothesisLosses>>>()?;

    let mut erm_index = 0;
    for (i, hl) in per_hypothesis.iter().enumerate() {
        if hl.loss_sub < per_hypothesis[erm_index].loss_sub {
            erm_index = i;
        }
    }
    let min_loss_full = per_hypothesis
        .iter()
        .map(|h| h.loss_full)
        .fold(f64::INFINITY, f64::min);
    let c = m * per_hypothesis
        .iter()
        .map(|h| h.lipschitz_product)
        .fold(0.0, f64::max);
    let bound_rhs = 2.0 * c * epsilon + 2.0 * label_term;
    let loss_full_of_erm = per_hypothesis[erm_index].loss_full;
    let chain_max_excess = per_hypothesis
        .iter()
        .map(|h| h.gap - (h.readout_term + label_term))
        .fold(f64::NEG_INFINITY, f64::max);
    let tmd_chain_holds = per_hypothesis
        .iter()
        .all(|h| h.readout_term <= m * h.lipschitz_product * epsilon + ERM_TOLERANCE);
    Ok(ErmReport {
        mode: mode.into(),
        erm_index,
        loss_full_of_erm,
        min_loss_full,
        bound_rhs,
        epsilon,
        m,
        c,
        label_term,
        satisfied: loss_full_of_erm <= min_loss_full + bound_rhs + ERM_TOLERANCE,
        chain_holds: chain_max_excess <= ERM_TOLERANCE,
        chain_max_excess,
        tmd_chain_holds,
        per_hypothesis,
    })
}

enum Proxies {
    Medoids {
        indices: Vec<usize>,
        tau: Vec<usize>,
        kappa: Vec<usize>,
    },
    Induced(Vec<Graph>),
}

fn evaluate(
    h: &GinModel,
    ds: &Dataset,
    labels: &[f64],
    proxies: &Proxies,
    m: f64,
) -> Result<HypothesisLosses> {
    let n = ds.len() as f64;
    let outs = ds
        .graphs()
        .iter()
        .map(|g| gin_forward(h, g))
        .collect::<Result<Vec<_>>>()?;
    let loss_full = outs
        .iter()
        .zip(labels)
        .map(|(o, &y)| clipped_abs_loss(o, y))
        .sum::<f64>()
        / n;
    let (loss_sub, readout_term) = match proxies {
        Proxies::Medoids {
            indices,
            tau,
            kappa,
        } => {
            let weighted: f64 = indices
                .iter()
                .zip(tau)
                .map(|(&j, &t)| t as f64 * clipped_abs_loss(&outs[j], labels[j]))
                .sum();
            let spread: f64 = (0..outs.len())
                .map(|i| l2_gap(&outs[kappa[i]], &outs[i]))
                .sum();
            (weighted / n, m / n * spread)
        }
        Proxies::Induced(graphs) => {
            let sub_outs = graphs
                .iter()
                .map(|g| gin_forward(h, g))
                .collect::<Result<Vec<_>>>()?;
            let loss: f64 = sub_outs
                .iter()
                .zip(labels)
                .map(|(o, &y)| clipped_abs_loss(o, y))
                .sum();
            let spread: f64 = sub_outs.iter().zip(&outs).map(|(a, b)| l2_gap(a, b)).sum();
            (loss / n, m / n * spread)
        }
    };
    Ok(HypothesisLosses {
        loss_sub,
        loss_full,
        gap: (loss_sub - loss_full).abs(),
        readout_term,
        lipschitz_product: layer_lipschitz(h).product,
    })
}
