use serde::{Deserialize, Serialize};

use super::{check_dim, check_ratio, outliers, SolutionSet};
use crate::error::{invalid, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::problem::AbsComposite;
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Robust blind deconvolution: `f_i(w, x) = |<a_i, w>·<c_i, x> - y_i|`.
///
/// Iterates are the concatenation `(w, x)` of length `n1 + n2`. Operator
/// rows are stored row-major (`m × n1` and `m × n2`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BdInstance<T: Scalar> {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub p: f64,
    pub seed: u64,
    pub left: Vec<T>,
    pub right: Vec<T>,
    pub w_star: Vec<T>,
    pub x_star: Vec<T>,
    pub measurements: Vec<T>,
    pub outliers: Vec<T>,
    norm_products: Vec<T>,
}

const GRID_POINTS: usize = 601;

impl<T: Scalar> BdInstance<T> {
    pub fn generate(n1: usize, n2: usize, m: usize, p: f64, seed: u64) -> Result<Self> {
        if n1 == 0 || n2 == 0 || m == 0 {
            return Err(invalid(format!("invalid BD sizes n1={n1}, n2={n2}, m={m}")));
        }
        check_ratio(p)?;
        let mut op = SeedStream::new(seed, streams::OPERATOR);
        let left: Vec<T> = op.gaussian_vec(m * n1);
        let right: Vec<T> = op.gaussian_vec(m * n2);
        let mut gt = SeedStream::new(seed, streams::GROUND_TRUTH);
        let w_star: Vec<T> = gt.gaussian_vec(n1);
        let x_star: Vec<T> = gt.gaussian_vec(n2);
        let outliers: Vec<T> = outliers(m, p, seed);
        let mut inst = Self {
            n1,
            n2,
            m,
            p,
            seed,
            left,
            right,
            w_star,
            x_star,
            measurements: Vec::new(),
            outliers,
            norm_products: Vec::new(),
        };
        inst.measurements = (0..m)
            .map(|i| {
                dot(inst.a(i), &inst.w_star) * dot(inst.c(i), &inst.x_star) + inst.outliers[i]
            })
            .collect();
        inst.norm_products = (0..m).map(|i| norm(inst.a(i)) * norm(inst.c(i))).collect();
        Ok(inst)
    }

    pub fn a(&self, i: usize) -> &[T] {
        &self.left[i * self.n1..(i + 1) * self.n1]
    }

    pub fn c(&self, i: usize) -> &[T] {
        &self.right[i * self.n2..(i + 1) * self.n2]
    }

    /// Distance from `(w, x)` to the scaling orbit `{(s w*, x*/s) : s ≠ 0}`.
    ///
    /// The scale is located on a logarithmic grid of `±s` with
    /// `|s| ∈ [1e-3, 1e3]`, refined by golden-section search on the
    /// bracketing grid cell and polished with Newton steps on the
    /// stationarity condition.
    pub fn dist(&self, w: &[T], x: &[T]) -> Result<T> {
        check_dim(w, self.n1)?;
        check_dim(x, self.n2)?;
        let q = OrbitQuadratic {
            ww: norm_sq(w).to_f64_lossy(),
            xx: norm_sq(x).to_f64_lossy(),
            wws: dot(w, &self.w_star).to_f64_lossy(),
            xxs: dot(x, &self.x_star).to_f64_lossy(),
            ws: norm_sq(&self.w_star).to_f64_lossy(),
            xs: norm_sq(&self.x_star).to_f64_lossy(),
        };
        let (s0, s1) = q.minimize();
        let d = self.direct(w, x, T::lit(s0)).min(self.direct(w, x, T::lit(s1)));
        Ok(d.sqrt())
    }

    fn direct(&self, w: &[T], x: &[T], s: T) -> T {
        let mut acc = T::zero();
        for (a, b) in w.iter().zip(&self.w_star) {
            let d = *a - s * *b;
            acc = acc + d * d;
        }
        for (a, b) in x.iter().zip(&self.x_star) {
            let d = *a - *b / s;
            acc = acc + d * d;
        }
        acc
    }

    fn split<'a>(&self, z: &'a [T]) -> (&'a [T], &'a [T]) {
        z.split_at(self.n1)
    }
}

/// `g(s) = ||w - s w*||² + ||x - x*/s||²` expanded in inner products.
struct OrbitQuadratic {
    ww: f64,
    xx: f64,
    wws: f64,
    xxs: f64,
    ws: f64,
    xs: f64,
}

impl OrbitQuadratic {
    fn eval(&self, s: f64) -> f64 {
        self.ww - 2.0 * s * self.wws + s * s * self.ws + self.xx - 2.0 * self.xxs / s
            + self.xs / (s * s)
    }

    /// Returns the golden-section estimate and its Newton polish; the
    /// expanded form is too noisy near the minimum to pick between them.
    fn minimize(&self) -> (f64, f64) {
        let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let mut best = (f64::INFINITY, 1.0, 1.0);
        for sign in [1.0, -1.0] {
            for k in 0..GRID_POINTS {
                let s = sign * (lo + step * k as f64).exp();
                let v = self.eval(s);
                if v < best.0 {
                    let below = sign * (lo + step * (k.max(1) - 1) as f64).exp();
                    let above = sign * (lo + step * (k + 1).min(GRID_POINTS - 1) as f64).exp();
                    best = (v, below, above);
                }
            }
        }
        let (a, b) = (best.1.min(best.2), best.1.max(best.2));
        let refined = self.golden(a, b);
        let mut s = refined;
        for _ in 0..8 {
            // g'(s)·s³ and its derivative
            let p = 2.0 * self.ws * s.powi(4) - 2.0 * self.wws * s.powi(3) + 2.0 * self.xxs * s
                - 2.0 * self.xs;
            let dp = 8.0 * self.ws * s.powi(3) - 6.0 * self.wws * s * s + 2.0 * self.xxs;
            let next = s - p / dp;
            if !next.is_finite() || next < a || next > b {
                return (refined, refined);
            }
            if next == s {
                break;
            }
            s = next;
        }
        (refined, s)
    }

    fn golden(&self, mut a: f64, mut b: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (self.eval(c), self.eval(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.eval(d);
            }
        }
        0.5 * (a + b)
    }
}

impl<T: Scalar> AbsComposite<T> for BdInstance<T> {
    fn num_components(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    fn inner(&self, i: usize, z: &[T]) -> T {
        let (w, x) = self.split(z);
        dot(self.a(i), w) * dot(self.c(i), x) - self.measurements[i]
    }

    fn inner_grad(&self, i: usize, z: &[T], grad: &mut [T]) -> T {
        let (w, x) = self.split(z);
        let (a, c) = (self.a(i), self.c(i));
        let (aw, cx) = (dot(a, w), dot(c, x));
        let (gw, gx) = grad.split_at_mut(self.n1);
        for (g, ak) in gw.iter_mut().zip(a) {
            *g = cx * *ak;
        }
        for (g, ck) in gx.iter_mut().zip(c) {
            *g = aw * *ck;
        }
        aw * cx - self.measurements[i]
    }

    fn inner_tau(&self, i: usize) -> T {
        self.norm_products[i]
    }

    fn tau(&self) -> T {
        self.norm_products.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    /// `||∇c_i(w, x)|| ≤ ||a_i|| ||c_i|| ||(w, x)||`.
    fn growth_bound(&self) -> Option<(T, T)> {
        Some((T::zero(), AbsComposite::tau(self)))
    }
}

crate::impl_abs_composite!(BdInstance);

impl<T: Scalar> SolutionSet<T> for BdInstance<T> {
    fn dist_to_solutions(&self, z: &[T]) -> Result<T> {
        check_dim(z, self.n1 + self.n2)?;
        let (w, x) = self.split(z);
        self.dist(w, x)
    }

    fn ground_truth_point(&self) -> Vec<T> {
        let mut z = self.w_star.clone();
        z.extend_from_slice(&self.x_star);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{component_subgradient, FiniteSum};

    fn small(p: f64) -> BdInstance<f64> {
        BdInstance::generate(6, 5, 60, p, 11).unwrap()
    }

    fn scaled(inst: &BdInstance<f64>, sw: f64, sx: f64) -> (Vec<f64>, Vec<f64>) {
        (
            inst.w_star.iter().map(|v| v * sw).collect(),
            inst.x_star.iter().map(|v| v * sx).collect(),
        )
    }

    #[test]
    fn ground_truth_is_zero() {
        let inst = small(0.0);
        assert_eq!(inst.full_value(&inst.ground_truth_point()), 0.0);
        assert!(inst.dist(&inst.w_star, &inst.x_star).unwrap() <= 1e-8);
    }

    #[test]
    fn scale_orbit() {
        let inst = small(0.0);
        let (w, x) = scaled(&inst, 2.0, 0.5);
        let mut z = w.clone();
        z.extend_from_slice(&x);
        assert!(inst.full_value(&z) < 1e-12);
        assert!(inst.dist(&w, &x).unwrap() <= 1e-6);
        let (w, x) = scaled(&inst, -3.0, -1.0 / 3.0);
        assert!(inst.dist(&w, &x).unwrap() <= 1e-6);
    }

    #[test]
    fn dist_matches_fine_grid() {
        let inst = small(0.2);
        let (w, x) = scaled(&inst, 1.0, 2.0);
        let got = inst.dist(&w, &x).unwrap();
        // dense 1-D oracle in log-space followed by local zoom
        let g = |s: f64| -> f64 {
            let a: f64 = w.iter().zip(&inst.w_star).map(|(u, v)| (u - s * v).powi(2)).sum();
            let b: f64 = x.iter().zip(&inst.x_star).map(|(u, v)| (u - v / s).powi(2)).sum();
            a + b
        };
        let mut best = (f64::INFINITY, 1.0);
        for k in 0..200_001 {
            let s = (-3.0f64 + 6.0 * k as f64 / 200_000.0).exp();
            let v = g(s);
            if v < best.0 {
                best = (v, s);
            }
        }
        let oracle = best.0.sqrt();
        assert!((got - oracle).abs() < 1e-6, "got {got}, oracle {oracle}");
    }

    #[test]
    fn dist_positive_on_random_points() {
        let inst = small(0.3);
        let z: Vec<f64> = SeedStream::new(5, 0).gaussian_vec(11);
        assert!(inst.dist_to_solutions(&z).unwrap() > 0.0);
        assert!(inst.dist(&z[..5], &z[5..]).is_err());
    }

    #[test]
    fn gradient_and_tau() {
        let inst = small(0.3);
        let z: Vec<f64> = SeedStream::new(8, 0).gaussian_vec(11);
        for i in 0..inst.m {
            let g = component_subgradient(&inst, i, &z).unwrap();
            for k in 0..11 {
                let h = 1e-6;
                let mut zp = z.clone();
                zp[k] += h;
                let mut zm = z.clone();
                zm[k] -= h;
                let fd = (inst.value(i, &zp) - inst.value(i, &zm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-5 * (1.0 + g[k].abs()));
            }
            let expect = norm(inst.a(i)) * norm(inst.c(i));
            assert_eq!(inst.inner_tau(i), expect);
        }
    }

    #[test]
    fn measurements_replay_exactly() {
        let inst = small(0.3);
        for i in 0..inst.m {
            let y = dot(inst.a(i), &inst.w_star) * dot(inst.c(i), &inst.x_star) + inst.outliers[i];
            assert_eq!(y.to_bits(), inst.measurements[i].to_bits());
        }
        assert_eq!(inst.outliers.iter().filter(|v| **v != 0.0).count(), 18);
    }
}
