//! Graph samples, symmetric adjacency normalization, permutation
//! machinery, and basic topological statistics.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One graph sample: adjacency, node features, and optional labels.
#[derive(Clone, Debug)]
pub struct Graph {
    pub adjacency: Matrix,
    pub features: Matrix,
    /// Class id for classification datasets.
    pub label: Option<usize>,
    /// Timepoint index for longitudinal datasets.
    pub timepoint: Option<usize>,
    /// Subject id for longitudinal datasets.
    pub subject: Option<usize>,
}

impl Graph {
    pub fn new(adjacency: Matrix, features: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::dimension(
                "graph",
                adjacency.shape_string(),
                "square adjacency".to_string(),
            ));
        }
        if features.rows() != adjacency.rows() {
            return Err(Error::dimension(
                "graph",
                adjacency.shape_string(),
                features.shape_string(),
            ));
        }
        Ok(Graph {
            adjacency,
            features,
            label: None,
            timepoint: None,
            subject: None,
        })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Bijection on node indices: node `i` of the original becomes node
/// `mapping[i]` of the permuted graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || seen[m] {
                return Err(Error::Parameter(format!(
                    "mapping is not a bijection on 0..{n}"
                )));
            }
            seen[m] = true;
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn random(n: usize, rng: &mut crate::linalg::Rng) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut mapping);
        Permutation { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Dense permutation-matrix form P, with P[mapping[i], i] = 1.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.mapping.len();
        let mut p = Matrix::zeros(n, n);
        for (i, &m) in self.mapping.iter().enumerate() {
            p[(m, i)] = 1.0;
        }
        p
    }

    /// Apply to the rows of a matrix: returns P * M.
    pub fn apply_rows(&self, m: &Matrix) -> Result<Matrix> {
        if m.rows() != self.mapping.len() {
            return Err(Error::dimension(
                "permute",
                format!("permutation of length {}", self.mapping.len()),
                m.shape_string(),
            ));
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for (i, &mi) in self.mapping.iter().enumerate() {
            out.row_mut(mi).copy_from_slice(m.row(i));
        }
        Ok(out)
    }
}

/// Symmetric normalization: D^{-1/2} A D^{-1/2} with D the diagonal of
/// row sums. Rows and columns of isolated (degree-0) nodes stay zero.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::dimension(
            "normalize_adjacency",
            a.shape_string(),
            "square matrix".to_string(),
        ));
    }
    if a.data().iter().any(|&x| x < 0.0) {
        return Err(Error::Domain(
            "adjacency entries must be nonnegative".to_string(),
        ));
    }
    let n = a.rows();
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|r| {
            let d: f64 = a.row(r).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(r, c)] = inv_sqrt_deg[r] * a[(r, c)] * inv_sqrt_deg[c];
        }
    }
    Ok(out)
}

/// `normalize_adjacency` with an optional A + I step first.
pub fn normalize_adjacency_opts(a: &Matrix, add_self_loops: bool) -> Result<Matrix> {
    if add_self_loops {
        let with_loops = a.add(&Matrix::identity(a.rows()))?;
        normalize_adjacency(&with_loops)
    } else {
        normalize_adjacency(a)
    }
}

/// Relabel the nodes of a graph: adjacency becomes P A P^T, features P X.
pub fn permute(g: &Graph, p: &Permutation) -> Result<Graph> {
    if p.len() != g.node_count() {
        return Err(Error::dimension(
            "permute",
            format!("permutation of length {}", p.len()),
            g.adjacency.shape_string(),
        ));
    }
    let n = g.node_count();
    let mut adjacency = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            adjacency[(p.mapping[i], p.mapping[j])] = g.adjacency[(i, j)];
        }
    }
    let features = p.apply_rows(&g.features)?;
    Ok(Graph {
        adjacency,
        features,
        label: g.label,
        timepoint: g.timepoint,
        subject: g.subject,
    })
}

/// Basic topological statistics of one graph, computed on the binarized
/// graph (edge present iff weight != 0).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TopologyStats {
    pub avg_degree: f64,
    pub avg_clustering: f64,
    /// Mean shortest-path length over the largest connected component.
    pub avg_path_length: f64,
    /// Longest shortest path in the largest connected component.
    pub diameter: f64,
    pub density: f64,
}

/// Adjacency lists of the binarized graph (off-diagonal nonzero entries,
/// treated as undirected).
pub(crate) fn binarized_neighbors(a: &Matrix, threshold: f64) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && (a[(i, j)].abs() > threshold || a[(j, i)].abs() > threshold) {
                adj[i].push(j);
            }
        }
    }
    adj
}

/// BFS distances from `src`; unreachable nodes get `usize::MAX`.
pub(crate) fn bfs_distances(adj: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Per-node clustering coefficients on the binarized graph; degree < 2
/// defines C_i = 0.
pub(crate) fn clustering_coefficients(a: &Matrix, threshold: f64) -> Vec<f64> {
    let adj = binarized_neighbors(a, threshold);
    let n = adj.len();
    let mut edge = vec![vec![false; n]; n];
    for (i, nbrs) in adj.iter().enumerate() {
        for &j in nbrs {
            edge[i][j] = true;
        }
    }
    adj.iter()
        .map(|nbrs| {
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (x, &u) in nbrs.iter().enumerate() {
                for &v in nbrs.iter().skip(x + 1) {
                    if edge[u][v] {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Compute degree, clustering, path length, diameter, and density.
pub fn topology_stats(g: &Graph) -> Result<TopologyStats> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Domain("empty graph".to_string()));
    }
    let adj = binarized_neighbors(&g.adjacency, 0.0);
    let degrees: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let avg_degree = degrees.iter().sum::<usize>() as f64 / n as f64;
    // Sum per-node coefficients in sorted order so the statistic is
    // exactly invariant under node relabeling.
    let mut clustering = clustering_coefficients(&g.adjacency, 0.0);
    clustering.sort_by(f64::total_cmp);
    let avg_clustering = clustering.iter().sum::<f64>() / n as f64;
    let edge_count = degrees.iter().sum::<usize>() / 2;
    let density = if n > 1 {
        2.0 * edge_count as f64 / (n * (n - 1)) as f64
    } else {
        0.0
    };

    // Path statistics over the largest connected component; when several
    // components tie for largest, pairs from all of them are aggregated
    // (a labeling-independent definition of "the largest").
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        let dist = bfs_distances(&adj, s);
        for (v, &d) in dist.iter().enumerate() {
            if d != usize::MAX {
                component[v] = n_components;
            }
        }
        n_components += 1;
    }
    let mut sizes = vec![0usize; n_components];
    for &c in &component {
        sizes[c] += 1;
    }
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    let members: Vec<usize> = (0..n)
        .filter(|&v| sizes[component[v]] == max_size)
        .collect();

    let (mut sum_path, mut pairs, mut diameter) = (0usize, 0usize, 0usize);
    for &s in &members {
        let dist = bfs_distances(&adj, s);
        for &t in &members {
            if t > s && component[t] == component[s] {
                let d = dist[t];
                sum_path += d;
                pairs += 1;
                diameter = diameter.max(d);
            }
        }
    }
    let avg_path_length = if pairs > 0 {
        sum_path as f64 / pairs as f64
    } else {
        0.0
    };

    Ok(TopologyStats {
        avg_degree,
        avg_clustering,
        avg_path_length,
        diameter: diameter as f64,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn triangle() -> Graph {
        let a = Matrix::from_rows(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        Graph::new(a, Matrix::zeros(3, 1)).unwrap()
    }

    fn path3() -> Graph {
        let a = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        Graph::new(a, Matrix::zeros(3, 1)).unwrap()
    }

    #[test]
    fn normalize_two_node_unit_edge() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let norm = normalize_adjacency(&a).unwrap();
        assert_eq!(norm, a);
    }

    #[test]
    fn normalize_complete_k3() {
        let norm = normalize_adjacency(&triangle().adjacency).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((norm[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalize_matches_scalar_loop_oracle() {
        let mut rng = Rng::new(5);
        let raw = rng.uniform_matrix(6, 6, 0.0, 2.0).unwrap();
        let a = raw.add(&raw.transpose()).unwrap();
        let norm = normalize_adjacency(&a).unwrap();
        let deg: Vec<f64> = (0..6).map(|r| a.row(r).iter().sum()).collect();
        for i in 0..6 {
            for j in 0..6 {
                let want = a[(i, j)] / (deg[i].sqrt() * deg[j].sqrt());
                assert!((norm[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_rejects_negative_entries() {
        let a = Matrix::from_rows(&[&[0.0, -1.0], &[-1.0, 0.0]]);
        assert!(matches!(normalize_adjacency(&a), Err(Error::Domain(_))));
    }

    #[test]
    fn isolated_node_row_stays_zero() {
        let a = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let norm = normalize_adjacency(&a).unwrap();
        assert_eq!(norm.row(2), &[0.0, 0.0, 0.0]);
        assert!(norm.all_finite());
    }

    #[test]
    fn identity_permutation_is_noop() {
        let g = triangle();
        let p = Permutation::identity(3);
        let out = permute(&g, &p).unwrap();
        assert_eq!(out.adjacency, g.adjacency);
        assert_eq!(out.features, g.features);
    }

    #[test]
    fn swap_twice_restores_graph() {
        let mut g = path3();
        g.features = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let p = Permutation::new(vec![1, 0, 2]).unwrap();
        let once = permute(&g, &p).unwrap();
        let twice = permute(&once, &p).unwrap();
        assert_eq!(twice.adjacency, g.adjacency);
        assert_eq!(twice.features, g.features);
    }

    #[test]
    fn permutation_preserves_degree_multiset() {
        let mut rng = Rng::new(11);
        let raw = rng.uniform_matrix(7, 7, 0.0, 1.0).unwrap();
        let a = raw.map(|x| if x > 0.6 { 1.0 } else { 0.0 });
        let sym = a.add(&a.transpose()).unwrap().map(|x| if x > 0.0 { 1.0 } else { 0.0 });
        let mut g = Graph::new(sym, Matrix::zeros(7, 1)).unwrap();
        for i in 0..7 {
            g.adjacency[(i, i)] = 0.0;
        }
        let p = Permutation::random(7, &mut rng);
        let pg = permute(&g, &p).unwrap();
        let degs = |gr: &Graph| {
            let mut d: Vec<usize> = binarized_neighbors(&gr.adjacency, 0.0)
                .iter()
                .map(|n| n.len())
                .collect();
            d.sort_unstable();
            d
        };
        assert_eq!(degs(&g), degs(&pg));
    }

    #[test]
    fn permute_matches_matrix_form() {
        let mut rng = Rng::new(21);
        let raw = rng.uniform_matrix(5, 5, 0.0, 1.0).unwrap();
        let a = raw.add(&raw.transpose()).unwrap();
        let g = Graph::new(a.clone(), rng.uniform_matrix(5, 2, -1.0, 1.0).unwrap()).unwrap();
        let p = Permutation::random(5, &mut rng);
        let pm = p.to_matrix();
        let by_index = permute(&g, &p).unwrap();
        let by_matmul = pm.matmul(&a).unwrap().matmul(&pm.transpose()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((by_index.adjacency[(i, j)] - by_matmul[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn triangle_stats() {
        let s = topology_stats(&triangle()).unwrap();
        assert_eq!(s.avg_degree, 2.0);
        assert_eq!(s.avg_clustering, 1.0);
        assert_eq!(s.diameter, 1.0);
        assert_eq!(s.density, 1.0);
    }

    #[test]
    fn path3_stats() {
        let s = topology_stats(&path3()).unwrap();
        assert_eq!(s.avg_clustering, 0.0);
        assert_eq!(s.diameter, 2.0);
    }

    #[test]
    fn stats_match_all_pairs_bfs_oracle() {
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let n = 3 + rng.index(6);
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.next_f64() < 0.4 {
                        a[(i, j)] = 1.0;
                        a[(j, i)] = 1.0;
                    }
                }
            }
            let g = Graph::new(a.clone(), Matrix::zeros(n, 1)).unwrap();
            let s = topology_stats(&g).unwrap();

            // Exhaustive oracle: Floyd-Warshall on the binarized graph.
            let inf = usize::MAX / 4;
            let mut d = vec![vec![inf; n]; n];
            for i in 0..n {
                d[i][i] = 0;
                for j in 0..n {
                    if i != j && a[(i, j)] != 0.0 {
                        d[i][j] = 1;
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if d[i][k] + d[k][j] < d[i][j] {
                            d[i][j] = d[i][k] + d[k][j];
                        }
                    }
                }
            }
            // All components of maximal size, by reachability.
            let mut components: Vec<Vec<usize>> = Vec::new();
            let mut assigned = vec![false; n];
            for s0 in 0..n {
                if assigned[s0] {
                    continue;
                }
                let comp: Vec<usize> = (0..n).filter(|&v| d[s0][v] < inf).collect();
                for &v in &comp {
                    assigned[v] = true;
                }
                components.push(comp);
            }
            let max_size = components.iter().map(|c| c.len()).max().unwrap();
            let mut sum = 0;
            let mut cnt = 0;
            let mut dia = 0;
            for comp in components.iter().filter(|c| c.len() == max_size) {
                for (x, &u) in comp.iter().enumerate() {
                    for &v in comp.iter().skip(x + 1) {
                        sum += d[u][v];
                        cnt += 1;
                        dia = dia.max(d[u][v]);
                    }
                }
            }
            let want_apl = if cnt > 0 { sum as f64 / cnt as f64 } else { 0.0 };
            assert_eq!(s.avg_path_length, want_apl);
            assert_eq!(s.diameter, dia as f64);
        }
    }

    #[test]
    fn empty_graph_is_domain_error() {
        let g = Graph {
            adjacency: Matrix::zeros(0, 0),
            features: Matrix::zeros(0, 0),
            label: None,
            timepoint: None,
            subject: None,
        };
        assert!(matches!(topology_stats(&g), Err(Error::Domain(_))));
    }
}
