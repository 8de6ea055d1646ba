//! Shared test oracles, independent of the implementation paths they
//! check: central finite differences, characteristic-polynomial root
//! finding, Jacobi eigendecomposition, and exhaustive shortest-path
//! enumeration.

#![allow(dead_code)]

use num_complex::Complex64;
use rgcnet::linalg::{Matrix, Rng};

// ---------------------------------------------------------------------------
// Finite differences

/// Central finite-difference gradient of `loss` with respect to every
/// entry of every matrix in `params`.
pub fn numeric_gradients(params: &[Matrix], loss: &mut dyn FnMut(&[Matrix]) -> f64, h: f64) -> Vec<Matrix> {
    let mut work: Vec<Matrix> = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let (rows, cols) = params[p].shape();
        let mut g = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let orig = work[p][(r, c)];
                work[p][(r, c)] = orig + h;
                let up = loss(&work);
                work[p][(r, c)] = orig - h;
                let down = loss(&work);
                work[p][(r, c)] = orig;
                g[(r, c)] = (up - down) / (2.0 * h);
            }
        }
        grads.push(g);
    }
    grads
}

/// Assert analytic and numeric gradients agree within
/// `rel` relative error with an `abs` absolute floor.
pub fn assert_gradients_close(label: &str, analytic: &[Matrix], numeric: &[Matrix], rel: f64, abs: f64) {
    assert_eq!(analytic.len(), numeric.len(), "{label}: gradient count");
    for (p, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        assert_eq!(a.shape(), n.shape(), "{label}: param {p} shape");
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                let (av, nv) = (a[(r, c)], n[(r, c)]);
                let tol = abs + rel * av.abs().max(nv.abs());
                assert!(
                    (av - nv).abs() <= tol,
                    "{label}: param {p} entry ({r},{c}): analytic {av} vs numeric {nv}"
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Characteristic polynomial oracle (n <= 6)

/// Coefficients of the characteristic polynomial via Faddeev-LeVerrier:
/// p(x) = x^n - c[0] x^{n-1} - c[1] x^{n-2} - ... - c[n-1].
pub fn char_poly_coeffs(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    assert!(m.is_square());
    let mut coeffs = Vec::with_capacity(n);
    let mut mk = m.clone();
    for k in 1..=n {
        let trace: f64 = (0..n).map(|i| mk[(i, i)]).sum();
        let ck = trace / k as f64;
        coeffs.push(ck);
        if k < n {
            let mut shifted = mk.clone();
            for i in 0..n {
                shifted[(i, i)] -= ck;
            }
            mk = m.matmul(&shifted).unwrap();
        }
    }
    coeffs
}

/// All roots of the monic polynomial by Durand-Kerner iteration.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let p = |z: Complex64| -> Complex64 {
        // x^n - c0 x^{n-1} - ... - c_{n-1}
        let mut acc = Complex64::new(1.0, 0.0);
        for &c in coeffs {
            acc = acc * z - c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..2000 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = p(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-13 {
            break;
        }
    }
    roots
}

/// Spectral radius through the characteristic polynomial (independent of
/// power iteration). Intended for n <= 6.
pub fn spectral_radius_oracle(m: &Matrix) -> f64 {
    poly_roots(&char_poly_coeffs(m))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Jacobi eigendecomposition (symmetric matrices)

/// Cyclic Jacobi rotations; returns (eigenvalues, eigenvector columns).
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(a.is_symmetric(1e-9), "jacobi needs a symmetric matrix");
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    (eigenvalues, v)
}

/// Eigenvector-centrality oracle: eigenvector of the largest eigenvalue
/// from a dense Jacobi decomposition, L2-normalized, sign-fixed
/// nonnegative.
pub fn eigenvector_centrality_oracle(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    if n == 0 || a.max_abs() < 1e-300 {
        return vec![0.0; n];
    }
    let (eigenvalues, vectors) = jacobi_eigen(a);
    let top = (0..n)
        .max_by(|&i, &j| eigenvalues[i].partial_cmp(&eigenvalues[j]).unwrap())
        .unwrap();
    let mut x: Vec<f64> = (0..n).map(|i| vectors[(i, top)]).collect();
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x.iter_mut() {
        *v /= norm;
    }
    if x.iter().sum::<f64>() < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        }
    }
    x
}

// ---------------------------------------------------------------------------
// Exhaustive path oracles (n <= 8)

fn neighbors(a: &Matrix) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                adj[i].push(j);
            }
        }
    }
    adj
}

/// Count shortest paths between s and t passing through each node, by
/// explicit depth-first enumeration of all shortest paths.
fn enumerate_shortest_paths(adj: &[Vec<usize>], s: usize, t: usize) -> (u64, Vec<u64>) {
    let n = adj.len();
    // BFS distances from s.
    let mut dist = vec![usize::MAX; n];
    dist[s] = 0;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist[t] == usize::MAX {
        return (0, vec![0; n]);
    }
    // DFS over edges that step one unit closer to t's distance.
    let mut through = vec![0u64; n];
    let mut total = 0u64;
    let mut stack_path = vec![s];
    fn dfs(
        adj: &[Vec<usize>],
        dist: &[usize],
        t: usize,
        path: &mut Vec<usize>,
        total: &mut u64,
        through: &mut [u64],
    ) {
        let u = *path.last().unwrap();
        if u == t {
            *total += 1;
            for &v in path.iter().skip(1) {
                if v != t {
                    through[v] += 1;
                }
            }
            return;
        }
        for &v in &adj[u] {
            if dist[v] == dist[u] + 1 {
                path.push(v);
                dfs(adj, dist, t, path, total, through);
                path.pop();
            }
        }
    }
    dfs(adj, &dist, t, &mut stack_path, &mut total, &mut through);
    (total, through)
}

/// Betweenness centrality by brute-force shortest-path enumeration over
/// unordered pairs, normalized by (n-1)(n-2)/2 when requested.
pub fn betweenness_oracle(a: &Matrix, normalized: bool) -> Vec<f64> {
    let adj = neighbors(a);
    let n = adj.len();
    let mut centrality = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            let (total, through) = enumerate_shortest_paths(&adj, s, t);
            if total == 0 {
                continue;
            }
            for (i, &cnt) in through.iter().enumerate() {
                if i != s && i != t {
                    centrality[i] += cnt as f64 / total as f64;
                }
            }
        }
    }
    if normalized && n > 2 {
        let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
        for c in centrality.iter_mut() {
            *c /= pairs;
        }
    }
    centrality
}

/// Per-node clustering coefficients by exhaustive triple enumeration.
pub fn clustering_oracle(a: &Matrix) -> Vec<f64> {
    let adj = neighbors(a);
    let n = adj.len();
    let connected = |i: usize, j: usize| adj[i].contains(&j);
    (0..n)
        .map(|i| {
            let k = adj[i].len();
            if k < 2 {
                return 0.0;
            }
            let mut triangles = 0u64;
            for j in 0..n {
                for l in (j + 1)..n {
                    if j != i && l != i && connected(i, j) && connected(i, l) && connected(j, l) {
                        triangles += 1;
                    }
                }
            }
            2.0 * triangles as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random inputs

/// Random symmetric nonnegative adjacency with zero diagonal.
pub fn random_symmetric_graph(rng: &mut Rng, n: usize, density: f64) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.next_f64() < density {
                let w = rng.uniform(0.1, 1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    a
}

/// Matrix with a known spectral radius: S D S^{-1} with D block-diagonal
/// (one dominant block of modulus `rho`, remaining moduli <= 0.6 rho).
/// Returns None when the sampled similarity is too ill-conditioned.
pub fn known_radius_matrix(rng: &mut Rng, n: usize, rho: f64, complex_dominant: bool) -> Option<Matrix> {
    let mut d = Matrix::zeros(n, n);
    let mut i;
    if complex_dominant && n >= 2 {
        let theta = rng.uniform(0.3, 2.8);
        d[(0, 0)] = rho * theta.cos();
        d[(0, 1)] = -rho * theta.sin();
        d[(1, 0)] = rho * theta.sin();
        d[(1, 1)] = rho * theta.cos();
        i = 2;
    } else {
        d[(0, 0)] = if rng.next_f64() < 0.5 { rho } else { -rho };
        i = 1;
    }
    while i < n {
        d[(i, i)] = rng.uniform(-0.6, 0.6) * rho;
        i += 1;
    }
    let s = rng.uniform_matrix(n, n, -1.0, 1.0).ok()?;
    let s_inv = invert(&s)?;
    // Reject ill-conditioned similarities.
    let check = s.matmul(&s_inv).ok()?;
    let mut err = 0.0_f64;
    for r in 0..n {
        for c in 0..n {
            let want = if r == c { 1.0 } else { 0.0 };
            err = err.max((check[(r, c)] - want).abs());
        }
    }
    if err > 1e-9 {
        return None;
    }
    Some(s.matmul(&d).ok()?.matmul(&s_inv).ok()?)
}

/// Gauss-Jordan inverse with partial pivoting (test-only helper).
pub fn invert(m: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| {
            a[(r1, col)]
                .abs()
                .partial_cmp(&a[(r2, col)].abs())
                .unwrap()
        })?;
        if a[(pivot, col)].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                let tmp = a[(pivot, c)];
                a[(pivot, c)] = a[(col, c)];
                a[(col, c)] = tmp;
                let tmp = inv[(pivot, c)];
                inv[(pivot, c)] = inv[(col, c)];
                inv[(col, c)] = tmp;
            }
        }
        let p = a[(col, col)];
        for c in 0..n {
            a[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[(r, col)];
                if f != 0.0 {
                    for c in 0..n {
                        a[(r, c)] -= f * a[(col, c)];
                        inv[(r, c)] -= f * inv[(col, c)];
                    }
                }
            }
        }
    }
    Some(inv)
}
