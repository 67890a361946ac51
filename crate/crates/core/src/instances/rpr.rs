use serde::{Deserialize, Serialize};

use super::{check_dim, check_ratio, outliers, SolutionSet};
use crate::error::{invalid, Result};
use crate::linalg::{distance, dot, norm_sq};
use crate::problem::AbsComposite;
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Robust phase retrieval: `f_i(x) = |<a_i, x>² - b_i|`.
/// Rows `a_i` are stored contiguously (row-major `m × n`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RprInstance<T: Scalar> {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub seed: u64,
    pub rows: Vec<T>,
    pub signal: Vec<T>,
    pub measurements: Vec<T>,
    pub outliers: Vec<T>,
    row_norms_sq: Vec<T>,
}

impl<T: Scalar> RprInstance<T> {
    pub fn generate(n: usize, m: usize, p: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(invalid(format!("invalid RPR sizes n={n}, m={m}")));
        }
        check_ratio(p)?;
        let rows: Vec<T> = SeedStream::new(seed, streams::OPERATOR).gaussian_vec(m * n);
        let signal: Vec<T> = SeedStream::new(seed, streams::GROUND_TRUTH).gaussian_vec(n);
        let outliers: Vec<T> = outliers(m, p, seed);
        Ok(Self::from_parts(n, p, seed, rows, signal, outliers))
    }

    /// Builds an instance from explicit data; measurements are
    /// `b_i = <a_i, x*>² + s_i`.
    pub fn from_parts(n: usize, p: f64, seed: u64, rows: Vec<T>, signal: Vec<T>, outliers: Vec<T>) -> Self {
        let m = outliers.len();
        assert_eq!(rows.len(), m * n);
        assert_eq!(signal.len(), n);
        let measurements = (0..m)
            .map(|i| {
                let t = dot(&rows[i * n..(i + 1) * n], &signal);
                t * t + outliers[i]
            })
            .collect();
        let row_norms_sq = (0..m).map(|i| norm_sq(&rows[i * n..(i + 1) * n])).collect();
        Self {
            n,
            m,
            p,
            seed,
            rows,
            signal,
            measurements,
            outliers,
            row_norms_sq,
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    /// `min(||x - x*||, ||x + x*||)`.
    pub fn dist(&self, x: &[T]) -> Result<T> {
        check_dim(x, self.n)?;
        let minus = distance(x, &self.signal);
        let mut plus = T::zero();
        for (a, b) in x.iter().zip(&self.signal) {
            let d = *a + *b;
            plus = plus + d * d;
        }
        Ok(minus.min(plus.sqrt()))
    }
}

impl<T: Scalar> AbsComposite<T> for RprInstance<T> {
    fn num_components(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn inner(&self, i: usize, x: &[T]) -> T {
        let t = dot(self.row(i), x);
        t * t - self.measurements[i]
    }

    fn inner_grad(&self, i: usize, x: &[T], grad: &mut [T]) -> T {
        let a = self.row(i);
        let t = dot(a, x);
        let two_t = t + t;
        for (g, ai) in grad.iter_mut().zip(a) {
            *g = two_t * *ai;
        }
        t * t - self.measurements[i]
    }

    fn inner_tau(&self, i: usize) -> T {
        T::lit(2.0) * self.row_norms_sq[i]
    }

    fn tau(&self) -> T {
        T::lit(2.0) * self.row_norms_sq.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    fn growth_bound(&self) -> Option<(T, T)> {
        Some((T::zero(), AbsComposite::tau(self)))
    }
}

crate::impl_abs_composite!(RprInstance);

impl<T: Scalar> SolutionSet<T> for RprInstance<T> {
    fn dist_to_solutions(&self, x: &[T]) -> Result<T> {
        self.dist(x)
    }

    fn ground_truth_point(&self) -> Vec<T> {
        self.signal.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{component_subgradient, component_value, local_model, FiniteSum};

    fn single(a: Vec<f64>, b: f64) -> RprInstance<f64> {
        // choose x* = 0 and outlier b so that b_1 = b exactly
        let n = a.len();
        RprInstance::from_parts(n, 0.0, 0, a, vec![0.0; n], vec![b])
    }

    #[test]
    fn component_examples() {
        let p = single(vec![1.0, 0.0], 1.0);
        assert_eq!(component_value(&p, 0, &[1.0, 0.0]).unwrap(), 0.0);
        let p = single(vec![1.0, 0.0], 0.0);
        assert_eq!(component_value(&p, 0, &[2.0, 0.0]).unwrap(), 4.0);
        assert_eq!(component_subgradient(&p, 0, &[2.0, 0.0]).unwrap(), vec![4.0, 0.0]);
    }

    #[test]
    fn subgradient_matches_finite_difference() {
        let p: RprInstance<f64> = RprInstance::generate(4, 10, 0.2, 5).unwrap();
        let x: Vec<f64> = SeedStream::new(2, 0).gaussian_vec(4);
        for i in 0..p.m {
            let g = component_subgradient(&p, i, &x).unwrap();
            for k in 0..4 {
                let h = 1e-6;
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fd = (p.value(i, &xp) - p.value(i, &xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-5 * (1.0 + g[k].abs()), "i={i} k={k}");
            }
        }
    }

    #[test]
    fn local_model_interpolates() {
        let p = single(vec![1.0, 0.0], 1.0);
        let lm = local_model(&p, 0, &[1.0, 0.0]).unwrap();
        assert_eq!(lm.a, vec![2.0, 0.0]);
        assert_eq!(lm.b, -2.0);
        assert_eq!(lm.eval(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn tau_formula() {
        let p = single(vec![1.0, 1.0], 0.0);
        assert_eq!(AbsComposite::tau(&p), 4.0);
    }

    #[test]
    fn full_scale_counts() {
        let p: RprInstance<f64> = RprInstance::generate(100, 1000, 0.3, 1).unwrap();
        assert_eq!(p.rows.len(), 100 * 1000);
        assert_eq!(p.outliers.iter().filter(|v| **v != 0.0).count(), 300);
    }

    #[test]
    fn sign_ambiguity() {
        let p: RprInstance<f64> = RprInstance::generate(8, 60, 0.0, 4).unwrap();
        let neg: Vec<f64> = p.signal.iter().map(|v| -v).collect();
        assert_eq!(p.full_value(&p.signal), 0.0);
        assert_eq!(p.full_value(&neg), 0.0);
        assert_eq!(p.dist(&p.signal).unwrap(), 0.0);
        assert_eq!(p.dist(&neg).unwrap(), 0.0);
        let nrm = crate::linalg::norm(&p.signal);
        assert!((p.dist(&[0.0; 8]).unwrap() - nrm).abs() < 1e-14);
    }
}
