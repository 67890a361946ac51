//! Seeded, stream-split random number generation.
//!
//! Every consumer draws from a ChaCha20 stream keyed by `(seed, stream)`:
//! the key is expanded from the 64-bit seed with `seed_from_u64`, and the
//! stream id selects one of ChaCha's 2^64 independent counter streams.
//! Stream ids used by the crate are fixed constants in [`streams`], so a
//! given seed always yields the same numbers regardless of which other
//! streams were consumed first.
//!
//! Gaussian variates use the inverse-CDF transform of a 53-bit uniform
//! (`u = (k + 0.5) / 2^53`), so values depend only on the integer stream.
//! Integer ranges are drawn as `u64` on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::function::erf::erfc_inv;

use crate::Scalar;

/// Stream ids reserved by the library.
pub mod streams {
    /// Measurement operator (sensing matrices, rows `a_i`, `c_i`).
    pub const OPERATOR: u64 = 1;
    /// Ground-truth signal / factor.
    pub const GROUND_TRUTH: u64 = 2;
    /// Outlier support selection.
    pub const OUTLIER_SUPPORT: u64 = 3;
    /// Outlier magnitudes.
    pub const OUTLIER_VALUES: u64 = 4;
    /// Initial iterate shared by all solvers of a comparison.
    pub const INIT: u64 = 16;
    /// Component ordering (shuffles and i.i.d. draws).
    pub const ORDER: u64 = 32;
    /// Lipschitz sampling.
    pub const LIPSCHITZ: u64 = 64;
    /// Sharpness probes.
    pub const SHARPNESS: u64 = 65;
    /// Test-time sampling (weak-convexity checks and the like).
    pub const CHECKS: u64 = 96;
}

/// A ChaCha20 counter stream with convenience samplers.
#[derive(Debug, Clone)]
pub struct SeedStream {
    rng: ChaCha20Rng,
}

impl SeedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform in the open interval (0, 1) on a 2^-53 lattice.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        let k = self.rng.next_u64() >> 11;
        (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the inverse CDF.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        let u = self.uniform_open();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    pub fn gaussian_vec<T: Scalar>(&mut self, len: usize) -> Vec<T> {
        (0..len).map(|_| T::lit(self.gaussian())).collect()
    }

    /// Uniform integer in `[0, bound)`.
    #[inline]
    pub fn index(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound as u64) as usize
    }

    /// Uniformly random permutation of `0..len` (Fisher-Yates).
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..len).collect();
        self.shuffle(&mut p);
        p
    }

    pub fn shuffle(&mut self, p: &mut [usize]) {
        for i in (1..p.len()).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
    }

    /// `count` distinct indices from `0..len`, in selection order.
    pub fn sample_distinct(&mut self, len: usize, count: usize) -> Vec<usize> {
        assert!(count <= len);
        let mut p: Vec<usize> = (0..len).collect();
        for i in 0..count {
            let j = i + self.index(len - i);
            p.swap(i, j);
        }
        p.truncate(count);
        p
    }

    /// Point drawn uniformly from the Euclidean ball of `radius` around `center`.
    pub fn ball_point<T: Scalar>(&mut self, center: &[T], radius: T) -> Vec<T> {
        let n = center.len();
        let dir: Vec<f64> = (0..n).map(|_| self.gaussian()).collect();
        let nrm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let rad = radius.to_f64_lossy() * self.uniform_open().powf(1.0 / n as f64);
        center
            .iter()
            .zip(&dir)
            .map(|(c, d)| *c + T::lit(rad * d / nrm))
            .collect()
    }
}
