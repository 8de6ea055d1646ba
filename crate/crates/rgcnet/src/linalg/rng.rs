//! Seeded pseudo-random number generation.
//!
//! xoshiro256++ with SplitMix64 seeding: the draw sequence for a given
//! seed is identical on every platform, which is what makes reservoir
//! initialization, fold assignment, and the simulator reproducible.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Deterministic generator; one owner per concurrent task.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
    spare_normal: Option<f64>,
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let state = [
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
        ];
        Rng {
            state,
            spare_normal: None,
        }
    }

    /// Derive an independent stream seed; used to fan one master seed out
    /// to per-trial generators.
    pub fn derive_seed(master: u64, stream: u64) -> u64 {
        let mut s = master ^ stream.wrapping_mul(0xA076_1D64_78BD_642F);
        let a = splitmix64(&mut s);
        let b = splitmix64(&mut s);
        a ^ b.rotate_left(17)
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    /// Standard normal draw (Box-Muller, one spare cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // Reject u1 == 0 so ln stays finite.
        let mut u1 = self.next_f64();
        while u1 <= f64::MIN_POSITIVE {
            u1 = self.next_f64();
        }
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.index(i + 1);
            slice.swap(i, j);
        }
    }

    /// Matrix of i.i.d. uniform entries in [lo, hi); requires `lo < hi`.
    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Result<Matrix> {
        if !(lo < hi) {
            return Err(Error::Parameter(format!(
                "uniform range is empty: lo={lo} must be < hi={hi}"
            )));
        }
        let data = (0..rows * cols).map(|_| self.uniform(lo, hi)).collect();
        Matrix::from_vec(rows, cols, data)
    }
}
