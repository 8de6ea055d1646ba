//! Dominant-eigenvalue magnitude estimation by power iteration.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Outcome of a spectral-radius estimate.
#[derive(Clone, Copy, Debug)]
pub struct SpectralRadius {
    /// Best estimate of max |lambda_i|.
    pub value: f64,
    /// False when successive estimates never settled within tolerance.
    pub converged: bool,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Block size of the subspace iteration. Random real matrices frequently
/// carry their top moduli as complex-conjugate pairs; a four-dimensional
/// block resolves up to two tied pairs, where a single power vector (or a
/// two-column block) would oscillate forever.
const BLOCK: usize = 4;

/// Estimate the spectral radius of a square matrix.
///
/// Orthogonal (block power) iteration over a small subspace seeded with a
/// deterministic all-ones vector plus seeded-noise companions. The
/// per-step estimate is the largest eigenvalue modulus of the projected
/// block; convergence is declared when successive estimates differ by
/// less than `tol` (scaled by the magnitude of the estimate).
pub fn spectral_radius(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralRadius> {
    if !m.is_square() {
        return Err(Error::dimension(
            "spectral_radius",
            m.shape_string(),
            "square matrix".to_string(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be > 0, got {tol}")));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(SpectralRadius {
            value: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    if n == 1 {
        return Ok(SpectralRadius {
            value: m[(0, 0)].abs(),
            converged: true,
            iterations: 0,
        });
    }

    let b = BLOCK.min(n);
    // Deterministic start: ones in the first column, seeded noise after.
    let mut rng = Rng::new(0x5EED_CAFE);
    let mut q = Matrix::zeros(n, b);
    for r in 0..n {
        q[(r, 0)] = 1.0;
        for c in 1..b {
            q[(r, c)] = rng.uniform(-1.0, 1.0);
        }
    }
    orthonormalize_columns(&mut q);

    let mut prev = f64::INFINITY;
    let mut best = 0.0;
    for it in 1..=max_iter {
        let z = m.matmul(&q)?;
        if z.frobenius_norm() < 1e-300 {
            // The start space maps to zero (e.g. nilpotent matrices).
            return Ok(SpectralRadius {
                value: 0.0,
                converged: true,
                iterations: it,
            });
        }
        // Projected block T = Q^T M Q, exact for n <= BLOCK.
        let t = q.transpose().matmul(&z)?;
        let est = dominant_modulus_small(&t);

        best = est;
        if (est - prev).abs() < tol * est.max(1.0) {
            return Ok(SpectralRadius {
                value: est,
                converged: true,
                iterations: it,
            });
        }
        prev = est;

        q = z;
        orthonormalize_columns(&mut q);
    }

    Ok(SpectralRadius {
        value: best,
        converged: false,
        iterations: max_iter,
    })
}

/// Largest eigenvalue modulus of a small (<= 4x4) matrix.
///
/// Gelfand's formula through repeated squaring with normalization:
/// rho(T) = lim ||T^(2^j)||^(1/2^j). Fifty squarings push the
/// subdominant and Jordan-growth factors below machine precision, and
/// the scheme is indifferent to eigenvalue multiplicities.
fn dominant_modulus_small(t: &Matrix) -> f64 {
    let n = t.rows();
    if n == 1 {
        return t[(0, 0)].abs();
    }
    if n == 2 {
        let (a, b, c, d) = (t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)]);
        let trace = a + d;
        let det = a * d - b * c;
        let disc = trace * trace - 4.0 * det;
        return if disc >= 0.0 {
            let s = disc.sqrt();
            (((trace + s) / 2.0).abs()).max(((trace - s) / 2.0).abs())
        } else {
            det.sqrt()
        };
    }
    let mut cur = t.clone();
    let mut log_scale = 0.0_f64;
    let steps = 50u32;
    for _ in 0..steps {
        let norm = cur.frobenius_norm();
        if norm < 1e-300 {
            return 0.0;
        }
        log_scale = 2.0 * (log_scale + norm.ln());
        let scaled = cur.scale(1.0 / norm);
        cur = scaled.matmul(&scaled).expect("square");
    }
    let final_norm = cur.frobenius_norm();
    if final_norm < 1e-300 {
        return 0.0;
    }
    ((log_scale + final_norm.ln()) / 2f64.powi(steps as i32)).exp()
}

/// Modified Gram-Schmidt on all columns, in place. Degenerate columns are
/// replaced by canonical directions so the block keeps full rank.
fn orthonormalize_columns(q: &mut Matrix) {
    let n = q.rows();
    let b = q.cols();
    for c in 0..b {
        for prev in 0..c {
            let mut dot = 0.0;
            for r in 0..n {
                dot += q[(r, prev)] * q[(r, c)];
            }
            for r in 0..n {
                q[(r, c)] -= dot * q[(r, prev)];
            }
        }
        let mut norm = 0.0;
        for r in 0..n {
            norm += q[(r, c)] * q[(r, c)];
        }
        norm = norm.sqrt();
        if norm < 1e-300 {
            // Re-seed with the canonical vector least represented so far.
            let pivot = c % n;
            for r in 0..n {
                q[(r, c)] = if r == pivot { 1.0 } else { 0.0 };
            }
            for prev in 0..c {
                let mut dot = 0.0;
                for r in 0..n {
                    dot += q[(r, prev)] * q[(r, c)];
                }
                for r in 0..n {
                    q[(r, c)] -= dot * q[(r, prev)];
                }
            }
            norm = 0.0;
            for r in 0..n {
                norm += q[(r, c)] * q[(r, c)];
            }
            norm = norm.sqrt().max(1e-300);
        }
        for r in 0..n {
            q[(r, c)] /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_radius_one() {
        let est = spectral_radius(&Matrix::identity(4), 1e-10, 100).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);
        assert!(est.converged);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = Matrix::from_rows(&[&[0.3, 0.0], &[0.0, -2.5]]);
        let est = spectral_radius(&m, 1e-12, 100).unwrap();
        assert!((est.value - 2.5).abs() < 1e-10, "got {}", est.value);
    }

    #[test]
    fn rotation_scaling_complex_pair() {
        // Eigenvalues 1.5 * exp(+-i*0.7): modulus exactly 1.5.
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let m = Matrix::from_rows(&[&[1.5 * c, -1.5 * s], &[1.5 * s, 1.5 * c]]);
        let est = spectral_radius(&m, 1e-12, 200).unwrap();
        assert!((est.value - 1.5).abs() < 1e-9, "got {}", est.value);
        assert!(est.converged);
    }

    #[test]
    fn two_tied_complex_pairs_converge() {
        // Block-diagonal with two rotation-scaling blocks of equal
        // modulus 2 at different angles: four tied dominant eigenvalues.
        let mut m = Matrix::zeros(4, 4);
        for (offset, theta) in [(0, 0.6), (2, 1.9_f64)] {
            m[(offset, offset)] = 2.0 * theta.cos();
            m[(offset, offset + 1)] = -2.0 * theta.sin();
            m[(offset + 1, offset)] = 2.0 * theta.sin();
            m[(offset + 1, offset + 1)] = 2.0 * theta.cos();
        }
        let est = spectral_radius(&m, 1e-12, 500).unwrap();
        assert!(est.converged);
        assert!((est.value - 2.0).abs() < 1e-9, "got {}", est.value);
    }

    #[test]
    fn nilpotent_reports_zero() {
        let m = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        let est = spectral_radius(&m, 1e-10, 100).unwrap();
        assert!(est.value.abs() < 1e-9, "got {}", est.value);
    }

    #[test]
    fn scaling_homogeneity() {
        let mut rng = Rng::new(3);
        let m = rng.uniform_matrix(8, 8, -1.0, 1.0).unwrap();
        let base = spectral_radius(&m, 1e-12, 5000).unwrap().value;
        for c in [-2.0, 0.5, 3.0] {
            let scaled = spectral_radius(&m.scale(c), 1e-12, 5000).unwrap().value;
            assert!(
                (scaled - c.abs() * base).abs() <= 1e-6 * (c.abs() * base).max(1.0),
                "c={c}: {scaled} vs {}",
                c.abs() * base
            );
        }
    }

    #[test]
    fn large_uniform_random_matrices_converge() {
        // The reservoir-construction workload: dense uniform(-1,1) blocks.
        for seed in 0..6 {
            let mut rng = Rng::new(seed);
            let n = 24 + 8 * (seed as usize % 3);
            let m = rng.uniform_matrix(n, n, -1.0, 1.0).unwrap();
            let est = spectral_radius(&m, 1e-10, 10_000).unwrap();
            assert!(est.converged, "seed {seed} did not converge");
            // Circular-law scale check: rho ~ sqrt(n/3) within 25%.
            let expect = (n as f64 / 3.0).sqrt();
            assert!(
                (est.value - expect).abs() < 0.25 * expect,
                "seed {seed}: rho {} vs circular-law {expect}",
                est.value
            );
        }
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(spectral_radius(&Matrix::zeros(2, 3), 1e-8, 10).is_err());
    }

    #[test]
    fn small_block_modulus_handles_multiplicity_and_spread() {
        // Quadruple eigenvalue 1 (identity) and a spread spectrum.
        assert!((dominant_modulus_small(&Matrix::identity(4)) - 1.0).abs() < 1e-10);
        let mut d = Matrix::zeros(4, 4);
        for (i, v) in [2.0, -1.0, 0.5, -0.25].iter().enumerate() {
            d[(i, i)] = *v;
        }
        assert!((dominant_modulus_small(&d) - 2.0).abs() < 1e-10);
    }
}
