//! Loader for per-subject, per-timepoint square connectivity matrices:
//! `subject_{s}_t{t}.csv`, each n x n comma-separated reals, no header.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{features::make_node_features, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

/// Parse `subject_{s}_t{t}.csv` into (s, t).
fn parse_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("subject_")?.strip_suffix(".csv")?;
    let (s, t) = rest.rsplit_once("_t")?;
    Some((s.parse().ok()?, t.parse().ok()?))
}

/// Read one square CSV matrix; NaN entries are preserved for the caller
/// to act on.
pub(crate) fn read_square_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                if tok.eq_ignore_ascii_case("nan") {
                    Ok(f64::NAN)
                } else {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Ingestion(format!("bad value '{tok}' in {}", path.display()))
                    })
                }
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Ingestion(format!(
            "{} is not a square matrix",
            path.display()
        )));
    }
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(row);
    }
    Ok(m)
}

/// Load a longitudinal connectome dataset from a directory of
/// `subject_{s}_t{t}.csv` files. Matrices are symmetrized as
/// (A + A^T) / 2; subjects containing any NaN are excluded with a
/// warning; node features are constructed (8 descriptors per node).
pub fn load_connectome_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut by_subject: BTreeMap<usize, BTreeMap<usize, Matrix>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Ingestion(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut n_nodes: Option<usize> = None;
    for entry in entries {
        let entry = entry.map_err(Error::Io)?;
        let name = entry.file_name().to_string_lossy().to_string();
        let Some((s, t)) = parse_name(&name) else {
            continue;
        };
        let m = read_square_csv(&entry.path())?;
        match n_nodes {
            None => n_nodes = Some(m.rows()),
            Some(n) if n != m.rows() => {
                return Err(Error::Ingestion(format!(
                    "{name} has {} nodes, other files have {n}",
                    m.rows()
                )));
            }
            _ => {}
        }
        by_subject.entry(s).or_default().insert(t, m);
    }
    if by_subject.is_empty() {
        return Err(Error::Ingestion(format!(
            "no subject_{{s}}_t{{t}}.csv files in {}",
            dir.display()
        )));
    }

    // Timepoint set must be uniform across retained subjects.
    let timepoints: Vec<usize> = by_subject
        .values()
        .next()
        .unwrap()
        .keys()
        .copied()
        .collect();
    let mut graphs = Vec::new();
    for (s, frames) in &by_subject {
        let this: Vec<usize> = frames.keys().copied().collect();
        if this != timepoints {
            return Err(Error::Ingestion(format!(
                "subject {s} has timepoints {this:?}, expected {timepoints:?}"
            )));
        }
        if frames.values().any(|m| !m.all_finite()) {
            log::warn!("subject {s} has NaN connectivity; excluding subject");
            continue;
        }
        for (t_index, m) in frames.values().enumerate() {
            let symmetric = m.add(&m.transpose())?.scale(0.5);
            let mut g = Graph::new(symmetric, Matrix::zeros(m.rows(), 1))?;
            g.features = make_node_features(&g, 8)?;
            g.subject = Some(*s);
            g.timepoint = Some(t_index);
            graphs.push(g);
        }
    }
    if graphs.is_empty() {
        return Err(Error::Ingestion(
            "every subject was excluded (NaN connectivity)".to_string(),
        ));
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "connectome".to_string());
    Dataset::longitudinal(name, graphs, timepoints.len())
}

/// Write one adjacency matrix in the connectome CSV convention.
pub fn write_connectome_csv(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let mut body = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        body.push_str(&line.join(","));
        body.push('\n');
    }
    std::fs::write(path.as_ref(), body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_matrix(dir: &Path, s: usize, t: usize, m: &Matrix) {
        write_connectome_csv(m, dir.join(format!("subject_{s}_t{t}.csv"))).unwrap();
    }

    fn sample(n: usize, fill: f64) -> Matrix {
        let mut m = Matrix::filled(n, n, fill);
        for i in 0..n {
            m[(i, i)] = 0.0;
        }
        m
    }

    #[test]
    fn two_subjects_two_timepoints_group_correctly() {
        let tmp = tempfile::tempdir().unwrap();
        for s in 0..2 {
            for t in 0..2 {
                write_matrix(tmp.path(), s, t, &sample(4, 0.5 + t as f64));
            }
        }
        let ds = load_connectome_dataset(tmp.path()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.n_timepoints(), Some(2));
        assert_eq!(ds.subjects(), vec![0, 1]);
        let idx = ds.subject_graph_indices(1);
        assert_eq!(idx.len(), 2);
        assert_eq!(ds.graphs[idx[0]].timepoint, Some(0));
        assert_eq!(ds.graphs[idx[1]].timepoint, Some(1));
        assert_eq!(ds.graphs[idx[1]].adjacency[(0, 1)], 1.5);
        assert_eq!(ds.transition_pairs().len(), 2);
    }

    #[test]
    fn nan_subject_is_excluded_with_warning() {
        let tmp = tempfile::tempdir().unwrap();
        write_matrix(tmp.path(), 0, 0, &sample(3, 0.5));
        write_matrix(tmp.path(), 0, 1, &sample(3, 0.6));
        let mut bad = sample(3, 0.5);
        bad[(0, 1)] = f64::NAN;
        write_matrix(tmp.path(), 1, 0, &bad);
        write_matrix(tmp.path(), 1, 1, &sample(3, 0.6));
        let ds = load_connectome_dataset(tmp.path()).unwrap();
        assert_eq!(ds.subjects(), vec![0]);
    }

    #[test]
    fn asymmetric_input_loads_as_symmetric_part() {
        let tmp = tempfile::tempdir().unwrap();
        let mut m = Matrix::zeros(3, 3);
        m[(0, 1)] = 1.0; // only one direction listed
        write_matrix(tmp.path(), 0, 0, &m);
        write_matrix(tmp.path(), 0, 1, &m);
        let ds = load_connectome_dataset(tmp.path()).unwrap();
        let a = &ds.graphs[0].adjacency;
        assert_eq!(a[(0, 1)], 0.5);
        assert_eq!(a[(1, 0)], 0.5);
    }

    #[test]
    fn inconsistent_node_counts_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_matrix(tmp.path(), 0, 0, &sample(3, 0.5));
        write_matrix(tmp.path(), 1, 0, &sample(4, 0.5));
        assert!(load_connectome_dataset(tmp.path()).is_err());
    }
}
