mod common;

use proptest::prelude::*;

use tmd_coreset::cache::{decode, encode, load_or_compute, CacheKey};
use tmd_coreset::graph::Dataset;
use tmd_coreset::io::{parse_jsonl, parse_tu, to_jsonl_string};
use tmd_coreset::tmd::{DistanceMatrix, WeightFn};
use tmd_coreset::Error;

use common::{graph, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsonl_round_trips(seed in any::<u64>(), count in 0usize..6) {
        let mut r = rng(seed);
        let graphs = (0..count)
            .map(|i| graph(&mut r, 0, 6, 2).with_label(if i % 2 == 0 { Some(i as i64) } else { None }))
            .collect();
        let ds = Dataset::new("rt", graphs).unwrap();
        let text = to_jsonl_string(&ds);
        let back = parse_jsonl(&text, "rt", "mem").unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(to_jsonl_string(&back), text);
    }

    #[test]
    fn cache_round_trip_is_bit_exact(n in 0usize..12, seed in any::<u64>(), depth in 0u32..6) {
        let vals: Vec<f64> = (0..n * n.saturating_sub(1) / 2)
            .map(|i| f64::from_bits(seed.rotate_left(i as u32) >> 12 | 0x3ff0_0000_0000_0000) - 1.0)
            .collect();
        let m = DistanceMatrix::new(n, "tmd-l2", depth, "table:1,0.5", vals).unwrap();
        let bytes = encode(&m);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..96)) {
        let _ = decode(&bytes);
        let mut framed = b"TMDC\x01\0\0\0".to_vec();
        framed.extend(&bytes);
        let _ = decode(&framed);
    }

    #[test]
    fn parsers_never_panic(text in ".{0,200}") {
        let _ = parse_jsonl(&text, "x", "mem");
        let _ = parse_tu("x", &text, "1\n1\n", None, None);
        let _ = text.parse::<WeightFn>();
    }

    #[test]
    fn weight_specs_round_trip(c in 0.01f64..100.0, t in prop::collection::vec(0.01f64..10.0, 1..5)) {
        for w in [WeightFn::Const(c), WeightFn::Table(t.clone())] {
            prop_assert_eq!(w.to_string().parse::<WeightFn>().unwrap(), w);
        }
    }
}

#[test]
fn tu_layout_parses() {
    let ds = parse_tu(
        "toy",
        "1, 2\n2, 1\n3, 4\n4, 3\n",
        "1\n1\n2\n2\n",
        Some("0.5\n1\n2\n3\n"),
        Some("1\n-1\n"),
    )
    .unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.graphs()[0].edge_count(), 1);
    assert_eq!(ds.graphs()[1].feature(1), &[3.0]);
    assert_eq!(ds.labels(), vec![Some(1), Some(-1)]);
}

#[test]
fn malformed_jsonl_reports_the_line() {
    let text = "{\"id\":0,\"n\":1,\"edges\":[],\"features\":[[1.0]],\"label\":null}\n{oops\n";
    match parse_jsonl(text, "bad", "file.jsonl") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn cached_matrices_are_reused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tmdc");
    let key = CacheKey {
        metric: "tmd-l2".into(),
        depth: 2,
        preset: "const:1".into(),
        norm: "l2".into(),
        dataset_sha256: "00".into(),
    };
    let m = DistanceMatrix::new(2, "tmd-l2", 2, "const:1", vec![0.25]).unwrap();
    assert!(load_or_compute(&path, &key, 2, || Ok(m.clone())).unwrap().1);
    let (again, fresh) = load_or_compute(&path, &key, 2, || unreachable!()).unwrap();
    assert!(!fresh);
    assert_eq!(again, m);
}

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| std::fs::read(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    out
}

#[test]
fn fuzz_seeds_are_valid_inputs() {
    for s in seeds("parse_jsonl") {
        parse_jsonl(std::str::from_utf8(&s).unwrap(), "seed", "seed").unwrap();
    }
    for s in seeds("parse_tu") {
        let parts: Vec<&str> = s
            .split(|&b| b == 0xff)
            .map(|p| std::str::from_utf8(p).unwrap())
            .collect();
        parse_tu(
            "seed",
            parts[0],
            parts[1],
            parts.get(2).copied(),
            parts.get(3).copied(),
        )
        .unwrap();
    }
    for s in seeds("decode_cache") {
        assert_eq!(encode(&decode(&s).unwrap()), s);
    }
    for s in seeds("parse_weights") {
        let t = std::str::from_utf8(&s).unwrap();
        assert!(t.parse::<WeightFn>().is_ok() || t.parse::<tmd_coreset::FeatureNorm>().is_ok());
    }
}
