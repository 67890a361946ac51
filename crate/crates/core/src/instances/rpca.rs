use serde::{Deserialize, Serialize};

use super::{check_dim, check_ratio, dist_rotation_orbit, outliers, SolutionSet};
use crate::error::{invalid, Result};
use crate::problem::AbsComposite;
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Robust PCA with a PSD low-rank part: `f_{ij}(U) = |(U Uᵀ)_{ij} - Y_{ij}|`.
///
/// `U` is `n × r` column-major; component `k = i·n + j` addresses entry
/// `(i, j)`. `Y` and the sparse part are stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RpcaInstance<T: Scalar> {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub seed: u64,
    pub ground_truth: Vec<T>,
    pub observed: Vec<T>,
    pub outliers: Vec<T>,
}

impl<T: Scalar> RpcaInstance<T> {
    pub fn generate(n: usize, r: usize, p: f64, seed: u64) -> Result<Self> {
        if n == 0 || r == 0 || r > n {
            return Err(invalid(format!("invalid RPCA sizes n={n}, r={r}")));
        }
        check_ratio(p)?;
        let ground_truth: Vec<T> = SeedStream::new(seed, streams::GROUND_TRUTH).gaussian_vec(n * r);
        let outliers: Vec<T> = outliers(n * n, p, seed);
        let mut inst = Self {
            n,
            r,
            p,
            seed,
            ground_truth,
            observed: Vec::new(),
            outliers,
        };
        inst.observed = (0..n * n)
            .map(|k| inst.entry(&inst.ground_truth, k / n, k % n) + inst.outliers[k])
            .collect();
        Ok(inst)
    }

    /// `(U Uᵀ)_{ij} = <u_i, u_j>` for rows `u_i` of `U`.
    pub fn entry(&self, u: &[T], i: usize, j: usize) -> T {
        let n = self.n;
        (0..self.r).fold(T::zero(), |acc, l| acc + u[i + l * n] * u[j + l * n])
    }

    pub fn dist(&self, u: &[T]) -> Result<T> {
        check_dim(u, self.n * self.r)?;
        Ok(dist_rotation_orbit(u, &self.ground_truth, self.n, self.r))
    }
}

impl<T: Scalar> AbsComposite<T> for RpcaInstance<T> {
    fn num_components(&self) -> usize {
        self.n * self.n
    }

    fn dim(&self) -> usize {
        self.n * self.r
    }

    fn inner(&self, k: usize, u: &[T]) -> T {
        self.entry(u, k / self.n, k % self.n) - self.observed[k]
    }

    fn inner_grad(&self, k: usize, u: &[T], grad: &mut [T]) -> T {
        let n = self.n;
        let (i, j) = (k / n, k % n);
        grad.iter_mut().for_each(|g| *g = T::zero());
        for l in 0..self.r {
            grad[i + l * n] = grad[i + l * n] + u[j + l * n];
            grad[j + l * n] = grad[j + l * n] + u[i + l * n];
        }
        self.entry(u, i, j) - self.observed[k]
    }

    fn inner_tau(&self, _k: usize) -> T {
        T::lit(2.0)
    }

    fn tau(&self) -> T {
        T::lit(2.0)
    }

    fn growth_bound(&self) -> Option<(T, T)> {
        Some((T::zero(), T::lit(2.0)))
    }

    fn mean_subgradient(&self, u: &[T], out: &mut [T]) -> bool {
        // (1/n²)(G + Gᵀ)U with G_{ij} = sign(c_{ij})
        let n = self.n;
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                g[k] = (self.entry(u, i, j) - self.observed[k]).sign0();
            }
        }
        let inv = T::one() / T::from_usize_lossy(n * n);
        for l in 0..self.r {
            let ul = &u[l * n..(l + 1) * n];
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..n {
                    acc = acc + (g[i * n + j] + g[j * n + i]) * ul[j];
                }
                out[i + l * n] = acc * inv;
            }
        }
        true
    }
}

crate::impl_abs_composite!(RpcaInstance);

impl<T: Scalar> SolutionSet<T> for RpcaInstance<T> {
    fn dist_to_solutions(&self, x: &[T]) -> Result<T> {
        self.dist(x)
    }

    fn ground_truth_point(&self) -> Vec<T> {
        self.ground_truth.clone()
    }
}
