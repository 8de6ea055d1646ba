//! Metric implementations versus exhaustive brute-force oracles.

mod common;

use rgcnet::linalg::Rng;
use rgcnet::metrics;

#[test]
fn betweenness_matches_enumeration_oracle() {
    let mut rng = Rng::new(50);
    for trial in 0..60 {
        let n = 3 + rng.index(5); // up to 7 nodes
        let a = common::random_symmetric_graph(&mut rng, n, 0.45);
        let fast = metrics::betweenness_centrality(&a, 0.0, true);
        let slow = common::betweenness_oracle(&a, true);
        for (i, (f, s)) in fast.iter().zip(&slow).enumerate() {
            assert!(
                (f - s).abs() <= 1e-12,
                "trial {trial} node {i}: brandes {f} vs enumeration {s}"
            );
        }
    }
}

#[test]
fn clustering_matches_triple_enumeration_oracle() {
    let mut rng = Rng::new(51);
    for _ in 0..60 {
        let n = 3 + rng.index(6);
        let a = common::random_symmetric_graph(&mut rng, n, 0.5);
        let fast = metrics::mae_clustering(&a, &rgcnet::linalg::Matrix::zeros(n, n)).unwrap();
        let slow: f64 =
            common::clustering_oracle(&a).iter().sum::<f64>() / n as f64;
        assert!((fast - slow).abs() <= 1e-15, "{fast} vs {slow}");
    }
}

#[test]
fn eigenvector_matches_jacobi_oracle() {
    let mut rng = Rng::new(52);
    for trial in 0..40 {
        let n = 3 + rng.index(4); // up to 6
        let a = common::random_symmetric_graph(&mut rng, n, 0.7);
        if a.max_abs() == 0.0 {
            continue;
        }
        let fast = metrics::eigenvector_centrality(&a).unwrap();
        let slow = common::eigenvector_centrality_oracle(&a);
        for (i, (f, s)) in fast.iter().zip(&slow).enumerate() {
            assert!(
                (f - s).abs() <= 1e-8,
                "trial {trial} node {i}: power {f} vs jacobi {s}"
            );
        }
    }
}
