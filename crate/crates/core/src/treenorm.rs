//! Linear-time tree norm: the TMD between a graph and the empty graph,
//! computed from walk-weighted feature norms without building any tree.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};
use crate::tmd::TmdConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNormReport {
    pub value: f64,
    /// `‖z^(ℓ)‖₁` for `ℓ = 0 .. L-1`.
    pub level_vectors_l1: Vec<f64>,
}

/// Tree norm of `g` under `cfg` in `O(|E| L)` time.
pub fn tree_norm(g: &Graph, cfg: &TmdConfig) -> Result<TreeNormReport> {
    let n = g.node_count();
    let l = cfg.depth();
    let norm = cfg.norm();
    let mut z: Vec<f64> = (0..n).map(|v| norm.norm(g.feature(v))).collect();
    let mut b = z.clone();
    let mut levels = Vec::with_capacity(l);
    levels.push(z.iter().sum::<f64>());
    let mut coef = 1.0;
    let mut next = vec![0.0; n];
    for level in 1..l {
        for (v, out) in next.iter_mut().enumerate() {
            *out = g.neighbors(v).iter().map(|&u| z[u]).sum();
        }
        std::mem::swap(&mut z, &mut next);
        coef *= cfg.weight(l - level)?;
        for (bv, zv) in b.iter_mut().zip(&z) {
            *bv += coef * zv;
        }
        levels.push(z.iter().sum::<f64>());
    }
    let value: f64 = b.iter().sum();
    if !value.is_finite() {
        return Err(Error::Overflow(format!(
            "tree norm overflowed at depth {l} on a graph with {n} nodes"
        )));
    }
    Ok(TreeNormReport {
        value,
        level_vectors_l1: levels,
    })
}

/// Tree norms of every dataset graph, in dataset order.
pub fn tree_norm_batch(ds: &Dataset, cfg: &TmdConfig) -> Result<Vec<f64>> {
    ds.graphs()
        .par_iter()
        .map(|g| tree_norm(g, cfg).map(|r| r.value))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tmd::{FeatureNorm, WeightFn};

    fn unit(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        Graph::new(edges, vec![vec![1.0]; n], None).unwrap()
    }

    #[test]
    fn examples() {
        let single = Graph::new(vec![], vec![vec![5.0]], None).unwrap();
        for l in 1..=5 {
            assert_eq!(tree_norm(&single, &TmdConfig::unit(l)).unwrap().value, 5.0);
        }
        let cfg = TmdConfig::unit(2);
        assert_eq!(tree_norm(&unit(2, vec![(0, 1)]), &cfg).unwrap().value, 4.0);
        let k3 = Graph::new(
            vec![(0, 1), (1, 2), (0, 2)],
            vec![vec![3.0], vec![1.0], vec![1.0]],
            None,
        )
        .unwrap();
        let r = tree_norm(&k3, &cfg).unwrap();
        assert_eq!(r.value, 15.0);
        assert_eq!(r.level_vectors_l1, vec![5.0, 10.0]);
    }

    #[test]
    fn weights_are_applied_from_the_top() {
        // Path 0-1-2, unit features, L=3, w(1)=2, w(2)=3.
        // b = z0 + w(2) z1 + w(2) w(1) z2.
        let g = unit(3, vec![(0, 1), (1, 2)]);
        let cfg = TmdConfig::new(3, WeightFn::Table(vec![2.0, 3.0]), FeatureNorm::L2).unwrap();
        // z0 = [1,1,1], z1 = [1,2,1], z2 = [2,2,2]
        assert_eq!(
            tree_norm(&g, &cfg).unwrap().value,
            3.0 + 3.0 * 4.0 + 6.0 * 6.0
        );
    }

    #[test]
    fn overflow_is_reported() {
        let g = Graph::new(vec![(0, 1)], vec![vec![1e300], vec![1e300]], None).unwrap();
        let cfg = TmdConfig::new(3, WeightFn::Const(1e10), FeatureNorm::L1).unwrap();
        assert!(matches!(tree_norm(&g, &cfg), Err(Error::Overflow(_))));
    }

    #[test]
    fn batch_examples() {
        let cfg = TmdConfig::unit(2);
        assert!(tree_norm_batch(&Dataset::new("e", vec![]).unwrap(), &cfg)
            .unwrap()
            .is_empty());
        let ds = Dataset::new(
            "d",
            vec![unit(2, vec![(0, 1)]), unit(3, vec![(0, 1), (1, 2), (0, 2)])],
        )
        .unwrap();
        assert_eq!(tree_norm_batch(&ds, &cfg).unwrap(), vec![4.0, 9.0]);
    }
}
