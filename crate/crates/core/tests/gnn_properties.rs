mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use tmd_coreset::gnn::{
    finite_erm_check, gin_forward, layer_lipschitz, random_gin, spectral_norm, stability_report,
    GinModel, Subsample,
};
use tmd_coreset::medoids::kmedoids;
use tmd_coreset::synthetic::random_dataset;
use tmd_coreset::tmd::{pairwise_matrix, TmdConfig};
use tmd_coreset::Graph;

use common::{graph, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_iteration_matches_svd(w in prop::collection::vec(-3.0f64..3.0, 16)) {
        let (s, _) = spectral_norm(&w, 4, 4);
        let svd = DMatrix::from_row_slice(4, 4, &w).singular_values();
        let top = svd.iter().cloned().fold(0.0, f64::max);
        prop_assert!((s - top).abs() <= 1e-6 * top.max(1.0), "power {s} svd {top}");
    }

    #[test]
    fn rectangular_norms_match_svd(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let w: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
        let (s, _) = spectral_norm(&w, rows, cols);
        let top = DMatrix::from_row_slice(rows, cols, &w).singular_values().iter().cloned().fold(0.0, f64::max);
        prop_assert!((s - top).abs() <= 1e-6 * top.max(1.0));
    }

    #[test]
    fn readout_ignores_node_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = graph(&mut r, 1, 9, 3);
        let n = g.node_count();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let edges = g.edges().iter().map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v]))).collect();
        let mut feats = vec![Vec::new(); n];
        for v in 0..n {
            feats[perm[v]] = g.feature(v).to_vec();
        }
        let h = Graph::new(edges, feats, None).unwrap();
        let m = random_gin(seed, 3, 5, 2, 3, 0.7).unwrap();
        let (a, b) = (gin_forward(&m, &g).unwrap(), gin_forward(&m, &h).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn random_models_have_unit_layers() {
    let m = random_gin(3, 2, 6, 1, 4, 1.0).unwrap();
    assert_eq!(m.depth(), 4);
    let p = layer_lipschitz(&m);
    assert!(p.converged);
    assert!(p.per_layer.iter().all(|&x| (x - 1.0).abs() < 1e-6));
}

#[test]
fn stability_depth_must_match_model() {
    let m = random_gin(0, 1, 4, 1, 3, 1.0).unwrap();
    let pairs = vec![(Graph::empty(1), Graph::empty(1))];
    assert!(stability_report(&m, &pairs, &TmdConfig::unit(2)).is_err());
    assert!(stability_report(&m, &pairs, &TmdConfig::unit(3)).is_ok());
}

#[test]
fn identity_models_pass_features_through() {
    let g = Graph::new(vec![], vec![vec![2.0], vec![3.0]], None).unwrap();
    let m = GinModel::identity(1, 2, 1.0).unwrap();
    assert_eq!(gin_forward(&m, &g).unwrap(), vec![5.0]);
}

#[test]
fn more_hypotheses_never_raise_the_best_full_loss() {
    let ds = random_dataset(21, 20, 3, 7, 0.4, 2).unwrap();
    let d = pairwise_matrix(&ds, &TmdConfig::unit(3)).unwrap();
    let sel = kmedoids(&d, 4, 0, 50).unwrap();
    let labels: Vec<f64> = ds.labels().iter().map(|l| l.unwrap() as f64).collect();
    let hs: Vec<GinModel> = (0..12)
        .map(|s| random_gin(s, 2, 6, 1, 3, 1.0).unwrap())
        .collect();
    let mut prev = f64::INFINITY;
    for m in 1..=hs.len() {
        let sub = Subsample::Graphs {
            selection: &sel,
            distances: &d,
        };
        let rep = finite_erm_check(&ds, &labels, &hs[..m], sub).unwrap();
        assert!(rep.chain_holds);
        assert!(rep.min_loss_full <= prev);
        prev = rep.min_loss_full;
    }
}
