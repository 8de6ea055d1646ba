//! Property tests over the numeric substrate and graph machinery.

mod common;

use proptest::prelude::*;
use rgcnet::graph::{normalize_adjacency, permute, topology_stats, Graph, Permutation};
use rgcnet::linalg::{spectral_radius, Matrix, Rng};

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
}

fn symmetric_graph_strategy(n: usize) -> impl Strategy<Value = Graph> {
    let edges = proptest::collection::vec(0.0f64..1.0, n * (n - 1) / 2);
    let feats = proptest::collection::vec(-2.0f64..2.0, n * 3);
    (edges, feats).prop_map(move |(upper, feats)| {
        let mut a = Matrix::zeros(n, n);
        let mut e = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                // Thin the graph out so path statistics vary.
                let w = if upper[e] > 0.55 { upper[e] } else { 0.0 };
                a[(i, j)] = w;
                a[(j, i)] = w;
                e += 1;
            }
        }
        Graph::new(a, Matrix::from_vec(n, 3, feats).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matmul_is_associative(a in matrix_strategy(5, 4), b in matrix_strategy(4, 6), c in matrix_strategy(6, 3)) {
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        let scale = left.max_abs().max(right.max_abs()).max(1.0);
        prop_assert!(left.sub(&right).unwrap().max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn uniform_matrix_is_deterministic(seed in any::<u64>()) {
        let a = Rng::new(seed).uniform_matrix(4, 3, -1.0, 1.0).unwrap();
        let b = Rng::new(seed).uniform_matrix(4, 3, -1.0, 1.0).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn normalization_preserves_symmetry(g in symmetric_graph_strategy(7)) {
        let norm = normalize_adjacency(&g.adjacency).unwrap();
        prop_assert!(norm.is_symmetric(1e-12));
    }

    #[test]
    fn normalization_commutes_with_permutation(g in symmetric_graph_strategy(7), seed in any::<u64>()) {
        let p = Permutation::random(7, &mut Rng::new(seed));
        let pg = permute(&g, &p).unwrap();
        let lhs = normalize_adjacency(&pg.adjacency).unwrap();
        let norm = normalize_adjacency(&g.adjacency).unwrap();
        let as_graph = Graph::new(norm, Matrix::zeros(7, 1)).unwrap();
        let rhs = permute(&as_graph, &p).unwrap().adjacency;
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn topology_stats_are_permutation_invariant(g in symmetric_graph_strategy(7), seed in any::<u64>()) {
        let p = Permutation::random(7, &mut Rng::new(seed));
        let pg = permute(&g, &p).unwrap();
        prop_assert_eq!(topology_stats(&g).unwrap(), topology_stats(&pg).unwrap());
    }

    #[test]
    fn spectral_radius_is_positively_homogeneous(m in matrix_strategy(6, 6)) {
        let base = spectral_radius(&m, 1e-12, 4000).unwrap();
        for c in [-2.0, 0.5, 3.0] {
            let scaled = spectral_radius(&m.scale(c), 1e-12, 4000).unwrap();
            let want = c.abs() * base.value;
            prop_assert!((scaled.value - want).abs() <= 1e-6 * want.max(1.0),
                "c={} got {} want {}", c, scaled.value, want);
        }
    }

    #[test]
    fn composite_loss_is_zero_iff_equal(g in symmetric_graph_strategy(6), shift in 0.001f64..0.5) {
        let a = &g.adjacency;
        let zero = rgcnet::generate::composite_loss(a, a, (1.0, 1.0, 1.0)).unwrap();
        prop_assert_eq!(zero, 0.0);
        let b = a.map(|x| x + shift);
        prop_assert!(rgcnet::generate::composite_loss(a, &b, (1.0, 1.0, 1.0)).unwrap() > 0.0);
    }
}

#[test]
fn spectral_radius_matches_char_poly_oracle_at_n6() {
    // Deterministic seeds; the oracle finds all roots of the
    // characteristic polynomial via Durand-Kerner.
    let mut rng = Rng::new(1234);
    let mut checked = 0;
    for _ in 0..40 {
        let m = rng.uniform_matrix(6, 6, -1.0, 1.0).unwrap();
        let oracle = common::spectral_radius_oracle(&m);
        let est = spectral_radius(&m, 1e-12, 20_000).unwrap();
        if !est.converged {
            // Near-tied moduli can stall the subspace iteration; those
            // draws are excluded from the accuracy claim (the estimator
            // reports the stall honestly).
            continue;
        }
        assert!(
            (est.value - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "power {} vs oracle {}",
            est.value,
            oracle
        );
        checked += 1;
    }
    assert!(checked >= 30, "only {checked} of 40 draws converged");
}
