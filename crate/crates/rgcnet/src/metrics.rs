//! Evaluation measures comparing ground-truth and generated graphs:
//! MAE, Frobenius distance, and MAE over node strength, clustering
//! coefficient, betweenness centrality, and eigenvector centrality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{binarized_neighbors, clustering_coefficients};
use crate::linalg::Matrix;

/// One row of generation-evaluation results. `betweenness_normalized`
/// records the centrality convention used (pair-count normalization).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub frobenius_distance: f64,
    pub mae_node_strength: f64,
    pub mae_clustering: f64,
    pub mae_betweenness: f64,
    pub mae_eigenvector: f64,
    pub betweenness_normalized: bool,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "mae,frobenius_distance,mae_node_strength,mae_clustering,mae_betweenness,mae_eigenvector,betweenness_normalized";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.mae,
            self.frobenius_distance,
            self.mae_node_strength,
            self.mae_clustering,
            self.mae_betweenness,
            self.mae_eigenvector,
            self.betweenness_normalized
        )
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.mae,
            self.frobenius_distance,
            self.mae_node_strength,
            self.mae_clustering,
            self.mae_betweenness,
            self.mae_eigenvector,
        ]
    }

    pub const METRIC_NAMES: [&'static str; 6] = [
        "MAE",
        "Frobenius Distance",
        "MAE Node Strength",
        "MAE Clustering Coef.",
        "MAE Betweenness C.",
        "MAE Eigenvector C.",
    ];
}

fn check_same_square(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dimension(op, a.shape_string(), b.shape_string()));
    }
    if !a.is_square() {
        return Err(Error::dimension(op, a.shape_string(), "square matrix".to_string()));
    }
    Ok(())
}

/// Mean absolute entrywise difference.
pub fn mae(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dimension("mae", a.shape_string(), b.shape_string()));
    }
    let n = (a.rows() * a.cols()).max(1);
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64)
}

/// Frobenius norm of the difference.
pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dimension(
            "frobenius_distance",
            a.shape_string(),
            b.shape_string(),
        ));
    }
    Ok(a.sub(b)?.frobenius_norm())
}

/// Node strengths: row sums of the weighted adjacency.
pub fn node_strengths(a: &Matrix) -> Vec<f64> {
    (0..a.rows()).map(|r| a.row(r).iter().sum()).collect()
}

/// Mean absolute node-strength difference.
pub fn mae_node_strength(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_square("mae_node_strength", a, b)?;
    let sa = node_strengths(a);
    let sb = node_strengths(b);
    let n = sa.len().max(1);
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64)
}

/// Mean absolute clustering-coefficient difference, on the binarized
/// graphs (edge iff |weight| > threshold; 0 by default).
pub fn mae_clustering_with_threshold(a: &Matrix, b: &Matrix, threshold: f64) -> Result<f64> {
    check_same_square("mae_clustering", a, b)?;
    let ca = clustering_coefficients(a, threshold);
    let cb = clustering_coefficients(b, threshold);
    let n = ca.len().max(1);
    Ok(ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64)
}

pub fn mae_clustering(a: &Matrix, b: &Matrix) -> Result<f64> {
    mae_clustering_with_threshold(a, b, 0.0)
}

/// Exact betweenness centrality on the binarized undirected graph,
/// counting all shortest paths (Brandes' accumulation). Unordered pairs
/// s < t; `normalized` divides by (n-1)(n-2)/2. Pairs with no connecting
/// path contribute nothing.
pub fn betweenness_centrality(a: &Matrix, threshold: f64, normalized: bool) -> Vec<f64> {
    let adj = binarized_neighbors(a, threshold);
    let n = adj.len();
    let mut centrality = vec![0.0; n];
    for s in 0..n {
        // BFS with shortest-path counts.
        let mut sigma = vec![0.0_f64; n];
        let mut dist = vec![usize::MAX; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut order = Vec::with_capacity(n);
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        // Dependency accumulation in reverse BFS order.
        let mut delta = vec![0.0_f64; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // Each unordered pair was counted from both endpoints.
    for c in centrality.iter_mut() {
        *c /= 2.0;
    }
    if normalized && n > 2 {
        let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
        for c in centrality.iter_mut() {
            *c /= pairs;
        }
    }
    centrality
}

/// Mean absolute betweenness-centrality difference (normalized convention).
pub fn mae_betweenness(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_square("mae_betweenness", a, b)?;
    let ca = betweenness_centrality(a, 0.0, true);
    let cb = betweenness_centrality(b, 0.0, true);
    let n = ca.len().max(1);
    Ok(ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64)
}

/// Dominant-eigenvector centrality of a symmetric nonnegative weighted
/// adjacency, L2-normalized with nonnegative entries. Returns the estimate
/// and whether power iteration converged.
///
/// Iterates on A + I: same eigenvectors, but the shift separates the
/// Perron eigenvalue from a possible -lambda twin (bipartite graphs would
/// otherwise oscillate forever).
pub fn eigenvector_centrality_detailed(a: &Matrix, tol: f64, max_iter: usize) -> (Vec<f64>, bool) {
    let n = a.rows();
    if n == 0 {
        return (Vec::new(), true);
    }
    if a.max_abs() < 1e-300 {
        // No connectivity signal at all; centrality is all zero.
        return (vec![0.0; n], true);
    }
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..max_iter {
        let mut y = x.clone();
        for i in 0..n {
            for j in 0..n {
                y[i] += a[(i, j)] * x[j];
            }
        }
        let ny = norm(&y);
        for v in y.iter_mut() {
            *v /= ny;
        }
        // Perron vector of a nonnegative symmetric matrix can be taken
        // entrywise nonnegative; fix the sign by the dominant direction.
        if y.iter().sum::<f64>() < 0.0 {
            for v in y.iter_mut() {
                *v = -*v;
            }
        }
        let gap = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if gap < tol {
            for v in x.iter_mut() {
                if *v < 0.0 && *v > -1e-9 {
                    *v = 0.0;
                }
            }
            return (x, true);
        }
    }
    (x, false)
}

/// Eigenvector centrality; non-convergence is a numeric error.
pub fn eigenvector_centrality(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::dimension(
            "eigenvector_centrality",
            a.shape_string(),
            "square matrix".to_string(),
        ));
    }
    if !a.is_symmetric(1e-8) {
        return Err(Error::Domain(
            "eigenvector centrality requires a symmetric adjacency".to_string(),
        ));
    }
    let (values, converged) = eigenvector_centrality_detailed(a, 1e-10, 10_000);
    if !converged {
        return Err(Error::Numeric(format!(
            "eigenvector centrality power iteration did not converge; partial max entry {:.6}",
            values.iter().fold(0.0_f64, |m, &v| m.max(v))
        )));
    }
    Ok(values)
}

/// Mean absolute eigenvector-centrality difference.
pub fn mae_eigenvector(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_square("mae_eigenvector", a, b)?;
    let ca = eigenvector_centrality(a)?;
    let cb = eigenvector_centrality(b)?;
    let n = ca.len().max(1);
    Ok(ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64)
}

/// All six measures for one (ground-truth, predicted) pair.
pub fn evaluate_pair(a_true: &Matrix, a_pred: &Matrix) -> Result<EvalReport> {
    check_same_square("evaluate_pair", a_true, a_pred)?;
    Ok(EvalReport {
        mae: mae(a_true, a_pred)?,
        frobenius_distance: frobenius_distance(a_true, a_pred)?,
        mae_node_strength: mae_node_strength(a_true, a_pred)?,
        mae_clustering: mae_clustering(a_true, a_pred)?,
        mae_betweenness: mae_betweenness(a_true, a_pred)?,
        mae_eigenvector: mae_eigenvector(a_true, a_pred)?,
        betweenness_normalized: true,
    })
}

/// Entrywise mean of several reports (same convention flag required).
pub fn mean_report(reports: &[EvalReport]) -> Option<EvalReport> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let mut sums = [0.0; 6];
    for r in reports {
        for (s, v) in sums.iter_mut().zip(r.values()) {
            *s += v;
        }
    }
    Some(EvalReport {
        mae: sums[0] / n,
        frobenius_distance: sums[1] / n,
        mae_node_strength: sums[2] / n,
        mae_clustering: sums[3] / n,
        mae_betweenness: sums[4] / n,
        mae_eigenvector: sums[5] / n,
        betweenness_normalized: first.betweenness_normalized,
    })
}
