//! Loader for the public TU plain-text graph-classification layout:
//! `<name>_A.txt` (1-indexed "row, col" edge list), `<name>_graph_indicator.txt`
//! (node -> graph id), `<name>_graph_labels.txt`, and optionally
//! `<name>_node_labels.txt` (one-hot encoded into node features).

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{features::make_node_features, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn parse_int(s: &str, what: &str, path: &Path) -> Result<i64> {
    s.trim().parse().map_err(|_| {
        Error::Ingestion(format!(
            "bad {what} value '{s}' in {}",
            path.display()
        ))
    })
}

/// Find the file prefix: a file `<prefix>_A.txt` must exist in `dir`.
fn find_prefix(dir: &Path) -> Result<String> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Ingestion(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut prefixes: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.strip_suffix("_A.txt").map(str::to_string)
        })
        .collect();
    prefixes.sort();
    prefixes.into_iter().next().ok_or_else(|| {
        Error::Ingestion(format!(
            "no <name>_A.txt edge file found in {}",
            dir.display()
        ))
    })
}

/// Load a TU-format dataset from a directory. Edges are merged into an
/// undirected simple graph; graph labels are remapped to 0..k-1 in sorted
/// order; node labels (when present) become one-hot features over the
/// dataset-wide label alphabet, otherwise constructed features are used.
pub fn load_tu_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let prefix = find_prefix(dir)?;
    let file = |suffix: &str| dir.join(format!("{prefix}_{suffix}"));

    let indicator_path = file("graph_indicator.txt");
    let labels_path = file("graph_labels.txt");
    let edges_path = file("A.txt");
    for required in [&edges_path, &indicator_path, &labels_path] {
        if !required.exists() {
            return Err(Error::Ingestion(format!(
                "missing required file {}",
                required.display()
            )));
        }
    }

    // Node -> graph assignment (1-indexed on both sides).
    let indicator: Vec<i64> = read_lines(&indicator_path)?
        .iter()
        .map(|l| parse_int(l, "graph indicator", &indicator_path))
        .collect::<Result<_>>()?;
    let n_nodes_total = indicator.len();
    let n_graphs = *indicator
        .iter()
        .max()
        .ok_or_else(|| Error::Ingestion("empty graph indicator".to_string()))? as usize;
    {
        let mut seen = vec![false; n_graphs + 1];
        for &g in &indicator {
            if g < 1 || g as usize > n_graphs {
                return Err(Error::Ingestion(format!(
                    "graph id {g} out of range 1..={n_graphs}"
                )));
            }
            seen[g as usize] = true;
        }
        if seen.iter().skip(1).any(|&s| !s) {
            return Err(Error::Ingestion(
                "graph ids are not contiguous".to_string(),
            ));
        }
    }

    // Per-graph local node numbering, in file order.
    let mut local_index = vec![0usize; n_nodes_total];
    let mut graph_sizes = vec![0usize; n_graphs];
    for (node, &g) in indicator.iter().enumerate() {
        let g = g as usize - 1;
        local_index[node] = graph_sizes[g];
        graph_sizes[g] += 1;
    }

    // Graph labels, remapped to 0..k-1 by sorted raw value.
    let raw_labels: Vec<i64> = read_lines(&labels_path)?
        .iter()
        .map(|l| parse_int(l, "graph label", &labels_path))
        .collect::<Result<_>>()?;
    if raw_labels.len() != n_graphs {
        return Err(Error::Ingestion(format!(
            "{} graph labels for {} graphs",
            raw_labels.len(),
            n_graphs
        )));
    }
    let mut alphabet: Vec<i64> = raw_labels.clone();
    alphabet.sort_unstable();
    alphabet.dedup();
    let label_of: BTreeMap<i64, usize> = alphabet
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    // Adjacency matrices from the (1-indexed) edge list.
    let mut adjacency: Vec<Matrix> = graph_sizes
        .iter()
        .map(|&n| Matrix::zeros(n, n))
        .collect();
    for line in read_lines(&edges_path)? {
        let (a, b) = line.split_once(',').ok_or_else(|| {
            Error::Ingestion(format!("edge line '{line}' is not 'row, col'"))
        })?;
        let u = parse_int(a, "edge endpoint", &edges_path)? as usize;
        let v = parse_int(b, "edge endpoint", &edges_path)? as usize;
        if u < 1 || u > n_nodes_total || v < 1 || v > n_nodes_total {
            return Err(Error::Ingestion(format!(
                "edge ({u}, {v}) references an unknown node"
            )));
        }
        let (u, v) = (u - 1, v - 1);
        if indicator[u] != indicator[v] {
            return Err(Error::Ingestion(format!(
                "edge ({}, {}) crosses graph boundaries",
                u + 1,
                v + 1
            )));
        }
        let g = indicator[u] as usize - 1;
        let (lu, lv) = (local_index[u], local_index[v]);
        adjacency[g][(lu, lv)] = 1.0;
        adjacency[g][(lv, lu)] = 1.0;
    }

    // Node features: one-hot node labels when available.
    let node_labels_path = file("node_labels.txt");
    let features: Vec<Matrix> = if node_labels_path.exists() {
        let node_labels: Vec<i64> = read_lines(&node_labels_path)?
            .iter()
            .map(|l| parse_int(l, "node label", &node_labels_path))
            .collect::<Result<_>>()?;
        if node_labels.len() != n_nodes_total {
            return Err(Error::Ingestion(format!(
                "{} node labels for {} nodes",
                node_labels.len(),
                n_nodes_total
            )));
        }
        let mut node_alphabet: Vec<i64> = node_labels.clone();
        node_alphabet.sort_unstable();
        node_alphabet.dedup();
        let slot: BTreeMap<i64, usize> = node_alphabet
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let dim = node_alphabet.len();
        let mut feats: Vec<Matrix> = graph_sizes
            .iter()
            .map(|&n| Matrix::zeros(n, dim))
            .collect();
        for (node, &nl) in node_labels.iter().enumerate() {
            let g = indicator[node] as usize - 1;
            feats[g][(local_index[node], slot[&nl])] = 1.0;
        }
        feats
    } else {
        adjacency
            .iter()
            .map(|a| {
                let g = Graph::new(a.clone(), Matrix::zeros(a.rows(), 1))?;
                make_node_features(&g, 8)
            })
            .collect::<Result<_>>()?
    };

    let graphs: Vec<Graph> = adjacency
        .into_iter()
        .zip(features)
        .zip(&raw_labels)
        .map(|((a, x), raw)| Ok(Graph::new(a, x)?.with_label(label_of[raw])))
        .collect::<Result<_>>()?;

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| prefix.clone());
    Dataset::classification(name, graphs, alphabet.len())
}

/// Serialize a classification dataset back to the TU file layout (both
/// edge directions listed). Node labels are emitted when every feature
/// row is one-hot.
pub fn write_tu_dataset(dataset: &Dataset, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut edges = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut node_labels = String::new();
    let mut all_one_hot = true;

    let mut base = 1usize; // global 1-indexed node counter
    for (gi, g) in dataset.graphs.iter().enumerate() {
        let n = g.node_count();
        for u in 0..n {
            indicator.push_str(&format!("{}\n", gi + 1));
            for v in 0..n {
                if g.adjacency[(u, v)] != 0.0 {
                    edges.push_str(&format!("{}, {}\n", base + u, base + v));
                }
            }
            let row = g.features.row(u);
            let ones = row.iter().filter(|&&x| x == 1.0).count();
            let zeros = row.iter().filter(|&&x| x == 0.0).count();
            if ones == 1 && ones + zeros == row.len() {
                let slot = row.iter().position(|&x| x == 1.0).unwrap();
                node_labels.push_str(&format!("{slot}\n"));
            } else {
                all_one_hot = false;
            }
        }
        labels.push_str(&format!("{}\n", g.label.unwrap_or(0)));
        base += n;
    }

    let write = |suffix: &str, body: &str| -> Result<()> {
        std::fs::write(dir.join(format!("{name}_{suffix}")), body)?;
        Ok(())
    };
    write("A.txt", &edges)?;
    write("graph_indicator.txt", &indicator)?;
    write("graph_labels.txt", &labels)?;
    if all_one_hot {
        write("node_labels.txt", &node_labels)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path) {
        // Graph 1: a triangle on nodes 1-3; graph 2: a single edge 4-5.
        std::fs::write(
            dir.join("FIX_A.txt"),
            "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n",
        )
        .unwrap();
        std::fs::write(dir.join("FIX_graph_indicator.txt"), "1\n1\n1\n2\n2\n").unwrap();
        std::fs::write(dir.join("FIX_graph_labels.txt"), "1\n-1\n").unwrap();
        std::fs::write(dir.join("FIX_node_labels.txt"), "0\n1\n0\n2\n0\n").unwrap();
    }

    #[test]
    fn hand_fixture_parses_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture(tmp.path());
        let ds = load_tu_dataset(tmp.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_classes(), Some(2));

        let tri = &ds.graphs[0];
        assert_eq!(tri.node_count(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 1.0 };
                assert_eq!(tri.adjacency[(i, j)], want);
            }
        }
        // Raw labels {-1, 1} remap to {0, 1} in sorted order: graph 1 had
        // label 1 -> class 1, graph 2 had -1 -> class 0.
        assert_eq!(tri.label, Some(1));
        assert_eq!(ds.graphs[1].label, Some(0));

        let edge = &ds.graphs[1];
        assert_eq!(edge.node_count(), 2);
        assert_eq!(edge.adjacency[(0, 1)], 1.0);
        assert_eq!(edge.adjacency[(1, 0)], 1.0);
        assert_eq!(edge.adjacency[(0, 0)], 0.0);

        // One-hot node features over a 3-symbol alphabet.
        assert_eq!(tri.feature_dim(), 3);
        assert_eq!(tri.features[(0, 0)], 1.0);
        assert_eq!(tri.features[(1, 1)], 1.0);
        assert_eq!(edge.features[(0, 2)], 1.0);
    }

    #[test]
    fn missing_file_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture(tmp.path());
        std::fs::remove_file(tmp.path().join("FIX_graph_labels.txt")).unwrap();
        let err = load_tu_dataset(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("graph_labels"), "{err}");
    }

    #[test]
    fn non_contiguous_graph_ids_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture(tmp.path());
        std::fs::write(tmp.path().join("FIX_graph_indicator.txt"), "1\n1\n1\n3\n3\n").unwrap();
        std::fs::write(tmp.path().join("FIX_graph_labels.txt"), "1\n-1\n-1\n").unwrap();
        let err = load_tu_dataset(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("contiguous"), "{err}");
    }

    #[test]
    fn roundtrip_preserves_edge_multiset() {
        let tmp = tempfile::tempdir().unwrap();
        write_fixture(tmp.path());
        let ds = load_tu_dataset(tmp.path()).unwrap();

        let out = tempfile::tempdir().unwrap();
        write_tu_dataset(&ds, out.path(), "FIX").unwrap();
        let reloaded = load_tu_dataset(out.path()).unwrap();
        assert_eq!(reloaded.len(), ds.len());
        for (a, b) in ds.graphs.iter().zip(&reloaded.graphs) {
            assert_eq!(a.adjacency, b.adjacency);
            assert_eq!(a.features, b.features);
            assert_eq!(a.label, b.label);
        }

        // Edge multiset of the rewritten file matches the original.
        let mut orig: Vec<String> = std::fs::read_to_string(tmp.path().join("FIX_A.txt"))
            .unwrap()
            .lines()
            .map(|l| l.replace(' ', ""))
            .collect();
        let mut again: Vec<String> = std::fs::read_to_string(out.path().join("FIX_A.txt"))
            .unwrap()
            .lines()
            .map(|l| l.replace(' ', ""))
            .collect();
        orig.sort();
        again.sort();
        assert_eq!(orig, again);
    }
}
