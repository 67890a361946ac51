use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{check_dim, check_ratio, dist_rotation_orbit, outliers, SolutionSet};
use crate::error::{invalid, Result};
use crate::linalg::spectral_norm;
use crate::problem::AbsComposite;
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Robust matrix sensing with a factored PSD variable:
/// `f_i(U) = |y_i - <A_i, U Uᵀ>|`, `U ∈ R^{n×r}` flattened column-major.
///
/// Sensing matrices are stored row-major, one `n × n` block per component,
/// and are used as drawn (not symmetrized).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RmsInstance<T: Scalar> {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub p: f64,
    pub seed: u64,
    pub sensing: Vec<T>,
    pub ground_truth: Vec<T>,
    pub measurements: Vec<T>,
    pub outliers: Vec<T>,
    /// `2 ||A_i||_F`, a cheap bound on `||A_i + A_iᵀ||_2`.
    frobenius_bound: T,
    #[serde(skip)]
    spectral: OnceLock<Vec<T>>,
}

impl<T: Scalar> RmsInstance<T> {
    pub fn generate(n: usize, r: usize, m: usize, p: f64, seed: u64) -> Result<Self> {
        if n == 0 || r == 0 || m == 0 || r > n {
            return Err(invalid(format!("invalid RMS sizes n={n}, r={r}, m={m}")));
        }
        check_ratio(p)?;
        let sensing: Vec<T> = SeedStream::new(seed, streams::OPERATOR).gaussian_vec(m * n * n);
        let ground_truth: Vec<T> = SeedStream::new(seed, streams::GROUND_TRUTH).gaussian_vec(n * r);
        let outliers: Vec<T> = outliers(m, p, seed);
        let mut inst = Self {
            n,
            r,
            m,
            p,
            seed,
            sensing,
            ground_truth,
            measurements: Vec::new(),
            outliers,
            frobenius_bound: T::zero(),
            spectral: OnceLock::new(),
        };
        inst.measurements = (0..m)
            .map(|i| inst.quadratic(i, &inst.ground_truth, None) + inst.outliers[i])
            .collect();
        inst.frobenius_bound = (0..m)
            .map(|i| crate::linalg::norm(inst.matrix(i)))
            .fold(T::zero(), |a, b| a.max(b))
            * T::lit(2.0);
        Ok(inst)
    }

    pub fn matrix(&self, i: usize) -> &[T] {
        let nn = self.n * self.n;
        &self.sensing[i * nn..(i + 1) * nn]
    }

    /// `<A_i, U Uᵀ> = Σ_j u_jᵀ A_i u_j`; optionally writes `(A_i + A_iᵀ) U`.
    /// The value is accumulated in the same order whether or not the
    /// gradient is requested.
    pub(crate) fn quadratic(&self, i: usize, u: &[T], grad: Option<&mut [T]>) -> T {
        let (n, r) = (self.n, self.r);
        let a = self.matrix(i);
        let mut acc = T::zero();
        match grad {
            None => {
                for k in 0..n {
                    let row = &a[k * n..(k + 1) * n];
                    for j in 0..r {
                        let uj = &u[j * n..(j + 1) * n];
                        acc = acc + uj[k] * crate::linalg::dot(row, uj);
                    }
                }
            }
            Some(g) => {
                g.iter_mut().for_each(|v| *v = T::zero());
                for k in 0..n {
                    let row = &a[k * n..(k + 1) * n];
                    for j in 0..r {
                        let uj = &u[j * n..(j + 1) * n];
                        let au = crate::linalg::dot(row, uj);
                        acc = acc + uj[k] * au;
                        let gj = &mut g[j * n..(j + 1) * n];
                        // (A u_j)_k
                        gj[k] = gj[k] + au;
                        // Aᵀ u_j += u_j[k] * row_k
                        let ujk = uj[k];
                        for (gl, al) in gj.iter_mut().zip(row) {
                            *gl = *gl + ujk * *al;
                        }
                    }
                }
            }
        }
        acc
    }

    /// `||A_i||_2` for every sensing matrix, computed on first use (the
    /// row-major block read column-major is `A_iᵀ`, which has the same norm).
    pub fn spectral_norms(&self) -> &[T] {
        self.spectral.get_or_init(|| {
            let n = self.n;
            (0..self.m)
                .map(|i| spectral_norm(self.matrix(i), n, n))
                .collect()
        })
    }

    pub fn dist(&self, u: &[T]) -> Result<T> {
        check_dim(u, self.n * self.r)?;
        Ok(dist_rotation_orbit(u, &self.ground_truth, self.n, self.r))
    }
}

impl<T: Scalar> AbsComposite<T> for RmsInstance<T> {
    fn num_components(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.n * self.r
    }

    fn inner(&self, i: usize, x: &[T]) -> T {
        self.quadratic(i, x, None) - self.measurements[i]
    }

    fn inner_grad(&self, i: usize, x: &[T], grad: &mut [T]) -> T {
        self.quadratic(i, x, Some(grad)) - self.measurements[i]
    }

    fn inner_tau(&self, i: usize) -> T {
        T::lit(2.0) * self.spectral_norms()[i]
    }

    fn tau(&self) -> T {
        T::lit(2.0)
            * self
                .spectral_norms()
                .iter()
                .fold(T::zero(), |a, &b| a.max(b))
    }

    fn growth_bound(&self) -> Option<(T, T)> {
        Some((T::zero(), self.frobenius_bound))
    }

    fn mean_subgradient(&self, x: &[T], out: &mut [T]) -> bool {
        // (1/m) (G + Gᵀ) U with G = Σ sign(c_i) A_i, using X = U Uᵀ.
        let (n, r) = (self.n, self.r);
        let mut xmat = vec![T::zero(); n * n];
        for j in 0..r {
            let uj = &x[j * n..(j + 1) * n];
            for k in 0..n {
                let ukj = uj[k];
                for l in 0..n {
                    xmat[k * n + l] = xmat[k * n + l] + ukj * uj[l];
                }
            }
        }
        let mut gsum = vec![T::zero(); n * n];
        for i in 0..self.m {
            let a = self.matrix(i);
            let c = crate::linalg::dot(a, &xmat) - self.measurements[i];
            let s = c.sign0();
            if s != T::zero() {
                crate::linalg::axpy(s, a, &mut gsum);
            }
        }
        let inv_m = T::one() / T::from_usize_lossy(self.m);
        for j in 0..r {
            let uj = &x[j * n..(j + 1) * n];
            for k in 0..n {
                let mut acc = T::zero();
                for l in 0..n {
                    acc = acc + (gsum[k * n + l] + gsum[l * n + k]) * uj[l];
                }
                out[j * n + k] = acc * inv_m;
            }
        }
        true
    }
}

crate::impl_abs_composite!(RmsInstance);

impl<T: Scalar> SolutionSet<T> for RmsInstance<T> {
    fn dist_to_solutions(&self, x: &[T]) -> Result<T> {
        self.dist(x)
    }

    fn ground_truth_point(&self) -> Vec<T> {
        self.ground_truth.clone()
    }
}
