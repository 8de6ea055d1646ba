//! Constructed node features for graphs without intrinsic ones
//! (connectomes). Eight per-node descriptors, z-normalized across nodes.

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, binarized_neighbors, clustering_coefficients, Graph};
use crate::linalg::Matrix;
use crate::metrics::{betweenness_centrality, eigenvector_centrality_detailed, node_strengths};

/// Per-node features, in column order: weighted strength, binary degree,
/// clustering coefficient, betweenness centrality, eigenvector centrality,
/// closeness, mean neighbor strength, constant 1. Each non-constant column
/// is z-normalized across nodes (constant-valued columns become zero).
/// `dim` keeps the first `dim` columns (at most 8).
pub fn make_node_features(g: &Graph, dim: usize) -> Result<Matrix> {
    if dim == 0 || dim > 8 {
        return Err(Error::Parameter(format!(
            "feature dim must be in 1..=8, got {dim}"
        )));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Domain("empty graph".to_string()));
    }
    let a = &g.adjacency;
    let strength = node_strengths(a);
    let adj = binarized_neighbors(a, 0.0);
    let degree: Vec<f64> = adj.iter().map(|nb| nb.len() as f64).collect();
    let clustering = clustering_coefficients(a, 0.0);
    let betweenness = betweenness_centrality(a, 0.0, true);
    // Features are a heuristic stand-in; accept the partial estimate if the
    // centrality iteration stalls rather than failing ingestion.
    let (eigenvector, converged) = eigenvector_centrality_detailed(a, 1e-10, 10_000);
    if !converged {
        log::warn!("eigenvector centrality did not converge while building node features");
    }
    let closeness: Vec<f64> = (0..n)
        .map(|i| {
            let dist = bfs_distances(&adj, i);
            let mut sum = 0usize;
            let mut reachable = 0usize;
            for (j, &d) in dist.iter().enumerate() {
                if j != i && d != usize::MAX {
                    sum += d;
                    reachable += 1;
                }
            }
            if reachable == 0 || sum == 0 {
                0.0
            } else {
                reachable as f64 / sum as f64
            }
        })
        .collect();
    let mean_neighbor_strength: Vec<f64> = (0..n)
        .map(|i| {
            if adj[i].is_empty() {
                0.0
            } else {
                adj[i].iter().map(|&j| strength[j]).sum::<f64>() / adj[i].len() as f64
            }
        })
        .collect();

    let columns: [&[f64]; 7] = [
        &strength,
        &degree,
        &clustering,
        &betweenness,
        &eigenvector,
        &closeness,
        &mean_neighbor_strength,
    ];
    let mut out = Matrix::zeros(n, dim);
    for (c, col) in columns.iter().enumerate().take(dim.min(7)) {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        for r in 0..n {
            out[(r, c)] = if std > 1e-12 { (col[r] - mean) / std } else { 0.0 };
        }
    }
    if dim == 8 {
        for r in 0..n {
            out[(r, 7)] = 1.0;
        }
    }
    Ok(out)
}
