//! Dataset ingestion: JSON Lines and the TU flat-file layout.
//!
//! JSONL holds one graph per line:
//! `{"id": 0, "n": 2, "edges": [[0, 1]], "features": [[1.0], [1.0]], "label": 1}`.
//! Blank lines are skipped. Record ids are informational; graphs keep file order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    id: i64,
    n: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    label: Option<i64>,
}

/// Parse a JSONL document; `origin` names the source in error messages.
pub fn parse_jsonl(text: &str, name: &str, origin: &str) -> Result<Dataset> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut graphs = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord =
            serde_json::from_str(raw).map_err(|e| parse_err(line_no, e.to_string()))?;
        if rec.features.len() != rec.n {
            return Err(parse_err(
                line_no,
                format!(
                    "graph declares n = {} but has {} feature rows",
                    rec.n,
                    rec.features.len()
                ),
            ));
        }
        if let Some(first) = rec.features.first() {
            match dim {
                None => dim = Some(first.len()),
                Some(d) if d != first.len() => {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "feature dimension mismatch: expected {d}, found {}",
                            first.len()
                        ),
                    ))
                }
                _ => {}
            }
        }
        let edges = rec.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Graph::new(edges, rec.features, rec.label)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        graphs.push(g);
    }
    Dataset::new(name, graphs)
}

/// Load a JSONL dataset; the dataset name is the file stem.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_jsonl(&text, &name, &path.display().to_string())
}

/// Serialize a dataset as JSONL; record ids are dataset positions.
pub fn write_jsonl<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for (i, g) in ds.graphs().iter().enumerate() {
        let rec = GraphRecord {
            id: i as i64,
            n: g.node_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            features: g.feature_rows(),
            label: g.label(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl_string(ds: &Dataset) -> String {
    let mut buf = Vec::new();
    write_jsonl(ds, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn tu_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn nonblank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parse the TU flat-file layout from in-memory file contents.
///
/// `adjacency` holds comma-separated 1-based node pairs, `indicator` one
/// 1-based graph id per node. Missing node attributes default to `[1.0]`.
pub fn parse_tu(
    name: &str,
    adjacency: &str,
    indicator: &str,
    node_attributes: Option<&str>,
    graph_labels: Option<&str>,
) -> Result<Dataset> {
    let ind_file = format!("{name}_graph_indicator.txt");
    let mut owner = Vec::new();
    for (line, text) in nonblank_lines(indicator) {
        let id: usize = text
            .parse()
            .map_err(|_| tu_err(&ind_file, line, format!("bad graph id {text:?}")))?;
        if id == 0 {
            return Err(tu_err(&ind_file, line, "graph ids are 1-based"));
        }
        owner.push(id - 1);
    }
    let node_total = owner.len();
    let graph_total = owner.iter().max().map_or(0, |m| m + 1);
    // Every graph owns at least one node, so ids cannot exceed the node count.
    if graph_total > node_total {
        return Err(tu_err(&ind_file, 0, "graph ids are not contiguous"));
    }
    let mut local = vec![0usize; node_total];
    let mut sizes = vec![0usize; graph_total];
    for (v, &g) in owner.iter().enumerate() {
        local[v] = sizes[g];
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(tu_err(
            &ind_file,
            0,
            format!("graph id {} has no nodes", g + 1),
        ));
    }

    let attr_file = format!("{name}_node_attributes.txt");
    let (dim, attrs) = match node_attributes {
        Some(text) => {
            let mut rows = Vec::with_capacity(node_total);
            let mut dim = None;
            for (line, raw) in nonblank_lines(text) {
                let row: Vec<f64> = raw
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| tu_err(&attr_file, line, format!("bad attribute row {raw:?}")))?;
                match dim {
                    None => dim = Some(row.len()),
                    Some(d) if d != row.len() => {
                        return Err(tu_err(
                            &attr_file,
                            line,
                            format!(
                                "ragged attribute row: expected {d} values, found {}",
                                row.len()
                            ),
                        ))
                    }
                    _ => {}
                }
                rows.push(row);
            }
            if rows.len() != node_total {
                return Err(tu_err(
                    &attr_file,
                    0,
                    format!("{} attribute rows for {node_total} nodes", rows.len()),
                ));
            }
            (
                dim.unwrap_or(1),
                rows.into_iter().flatten().collect::<Vec<f64>>(),
            )
        }
        None => (1, vec![1.0; node_total]),
    };

    let a_file = format!("{name}_A.txt");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_total];
    for (line, raw) in nonblank_lines(adjacency) {
        let mut parts = raw.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(tu_err(
                &a_file,
                line,
                format!("expected `i, j`, found {raw:?}"),
            ));
        };
        let parse = |t: &str| -> Result<usize> {
            let v: usize = t
                .parse()
                .map_err(|_| tu_err(&a_file, line, format!("bad node id {t:?}")))?;
            if v == 0 || v > node_total {
                return Err(tu_err(&a_file, line, format!("node id {v} out of range")));
            }
            Ok(v - 1)
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if owner[u] != owner[v] {
            return Err(tu_err(
                &a_file,
                line,
                format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    u + 1,
                    v + 1,
                    owner[u] + 1,
                    owner[v] + 1
                ),
            ));
        }
        let (lu, lv) = (local[u], local[v]);
        edges[owner[u]].push((lu.min(lv), lu.max(lv)));
    }

    let labels: Vec<Option<i64>> = match graph_labels {
        Some(text) => {
            let label_file = format!("{name}_graph_labels.txt");
            let mut out = Vec::with_capacity(graph_total);
            for (line, raw) in nonblank_lines(text) {
                let y: i64 = raw
                    .parse()
                    .map_err(|_| tu_err(&label_file, line, format!("bad label {raw:?}")))?;
                out.push(Some(y));
            }
            if out.len() != graph_total {
                return Err(tu_err(
                    &label_file,
                    0,
                    format!("{} labels for {graph_total} graphs", out.len()),
                ));
            }
            out
        }
        None => vec![None; graph_total],
    };

    let mut feats: Vec<Vec<f64>> = sizes.iter().map(|&s| Vec::with_capacity(s * dim)).collect();
    for (v, &g) in owner.iter().enumerate() {
        feats[g].extend_from_slice(&attrs[v * dim..(v + 1) * dim]);
    }
    let mut graphs = Vec::with_capacity(graph_total);
    for (g, ((mut e, f), y)) in edges.into_iter().zip(feats).zip(labels).enumerate() {
        // The adjacency file lists both orientations of every edge.
        e.sort_unstable();
        e.dedup();
        let graph = Graph::from_flat(sizes[g], dim, e, f, y)
            .map_err(|err| tu_err(&a_file, 0, format!("graph {}: {err}", g + 1)))?;
        graphs.push(graph);
    }
    Dataset::new(name, graphs)
}

/// Load `<dir>/<name>_A.txt` and companions.
pub fn load_tu(dir: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let read_required = |suffix: &str| -> Result<String> {
        let p = dir.join(format!("{name}_{suffix}.txt"));
        if !p.exists() {
            return Err(Error::MissingFile(p));
        }
        Ok(fs::read_to_string(p)?)
    };
    let read_optional = |suffix: &str| -> Result<Option<String>> {
        let p = dir.join(format!("{name}_{suffix}.txt"));
        if p.exists() {
            Ok(Some(fs::read_to_string(p)?))
        } else {
            Ok(None)
        }
    };
    let a = read_required("A")?;
    let ind = read_required("graph_indicator")?;
    let attrs = read_optional("node_attributes")?;
    let labels = read_optional("graph_labels")?;
    parse_tu(name, &a, &ind, attrs.as_deref(), labels.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_graph_line() {
        let ds = parse_jsonl(
            r#"{"id": 0, "n": 2, "edges": [[0, 1]], "features": [[1.0], [2.0]], "label": 1}"#,
            "t",
            "t.jsonl",
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.graphs()[0].label(), Some(1));
        assert_eq!(ds.feature_dim(), 1);
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let text = concat!(
            r#"{"id": 0, "n": 1, "edges": [], "features": [[1, 2, 3]], "label": null}"#,
            "\n",
            r#"{"id": 1, "n": 1, "edges": [], "features": [[1, 2]], "label": null}"#,
        );
        match parse_jsonl(text, "t", "t.jsonl") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("dimension mismatch"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_document_is_empty_dataset() {
        assert!(parse_jsonl("", "t", "t.jsonl").unwrap().is_empty());
        assert!(parse_jsonl("\n\n", "t", "t.jsonl").unwrap().is_empty());
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_jsonl("\n{not json", "t", "t.jsonl").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn invalid_graph_in_jsonl() {
        let text = r#"{"id": 0, "n": 2, "edges": [[0, 0]], "features": [[1], [1]], "label": null}"#;
        assert!(parse_jsonl(text, "t", "t").is_err());
    }

    #[test]
    fn tu_partitions_by_indicator() {
        let ds = parse_tu(
            "X",
            "1,2\n2,1\n2,3\n3,2\n4,5\n5,4\n",
            "1\n1\n1\n2\n2\n",
            None,
            None,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.graphs()[0].node_count(), 3);
        assert_eq!(ds.graphs()[1].node_count(), 2);
        assert_eq!(ds.graphs()[0].edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ds.graphs()[1].edges(), &[(0, 1)]);
        for g in ds.graphs() {
            assert!(g.features_flat().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn tu_attributes_and_labels() {
        let ds = parse_tu(
            "X",
            "1, 2\n",
            "1\n1\n2\n",
            Some("0.5,1\n2,3\n4,5\n"),
            Some("1\n-1\n"),
        )
        .unwrap();
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.graphs()[1].feature(0), &[4.0, 5.0]);
        assert_eq!(ds.labels(), vec![Some(1), Some(-1)]);
    }

    #[test]
    fn tu_errors() {
        let err = parse_tu("X", "1,4\n", "1\n1\n1\n2\n2\n", None, None).unwrap_err();
        assert!(err.to_string().contains("crosses graphs"));
        let err = parse_tu("X", "", "1\n1\n", Some("1,2\n3\n"), None).unwrap_err();
        assert!(err.to_string().contains("ragged"));
        assert!(parse_tu("X", "", "1\n3\n", None, None).is_err());
        assert!(parse_tu("X", "1,9\n", "1\n", None, None).is_err());
        assert!(parse_tu("X", "", "0\n", None, None).is_err());
        assert!(parse_tu("X", "", "4000000000\n", None, None).is_err());
    }

    #[test]
    fn tu_missing_mandatory_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("X_A.txt"), "1,2\n").unwrap();
        assert!(matches!(
            load_tu(dir.path(), "X"),
            Err(Error::MissingFile(_))
        ));
    }
}
