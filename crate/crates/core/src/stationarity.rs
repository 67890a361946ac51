//! Moreau-envelope stationarity measure.
//!
//! For `λ < 1/τ` the proximal subproblem `min_y f(y) + (1/2λ)||y - x||²` is
//! strongly convex. It is solved by majorization: every component is
//! replaced by its local model plus `(τ_i/2)||y - y_j||²`, and the resulting
//! convex problem `min (1/m) Σ |<a_i, y> + b_i| + (β/2)||y - z||²` is solved
//! by coordinate ascent on its box-constrained dual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, distance, dot, norm, norm_sq};
use crate::problem::{check_point, FiniteSum};
use crate::solvers::kink_tolerance;
use crate::Scalar;

/// Outer (majorization) iteration cap.
pub const PROX_MAX_OUTER: usize = 2000;
const DUAL_MAX_SWEEPS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MoreauEstimate<T: Scalar> {
    pub proximal_point: Vec<T>,
    /// `τ̂ ||x - x̄||`.
    pub grad_norm: T,
    /// `f(x̄) + (τ̂/2)||x̄ - x||²`.
    pub envelope_value: T,
    /// Stationarity residual of the prox subproblem at `x̄`.
    pub residual: T,
}

/// Approximate proximal point with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSolution<T> {
    pub point: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// `prox_{λ f}(x)`; see [`prox_full_certified`].
pub fn prox_full<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &[T], lambda: T, tol: T) -> Result<Vec<T>> {
    prox_full_certified(p, x, lambda, tol).map(|s| s.point)
}

/// Proximal point of the full objective. The residual is
/// `||(1/m) Σ s_i ∇c_i(ȳ) + (ȳ - x)/λ||` with `s_i = sign(c_i(ȳ))` away from
/// kinks and the dual multiplier at kinks.
pub fn prox_full_certified<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &[T],
    lambda: T,
    tol: T,
) -> Result<ProxSolution<T>> {
    check_point(p, x)?;
    if !p.is_composite() {
        return Err(Error::NotComposite);
    }
    if !(lambda > T::zero()) || !(tol > T::zero()) {
        return Err(invalid(format!("need lambda > 0 and tol > 0, got {lambda}, {tol}")));
    }
    let tau = p.tau();
    if lambda * tau >= T::one() {
        return Err(Error::StepTooLarge {
            mu: lambda.to_f64_lossy(),
            limit: (T::one() / tau).to_f64_lossy(),
        });
    }
    let m = p.num_components();
    let d = x.len();
    let mf = T::from_usize_lossy(m);
    let inv_lambda = T::one() / lambda;
    let tau_bar = (0..m).map(|i| p.component_tau(i)).sum::<T>() / mf;
    let beta = tau_bar + inv_lambda;

    let mut y = x.to_vec();
    let mut model = Model::new(m, d);
    let mut s = vec![T::zero(); m];
    let mut z = vec![T::zero(); d];
    for iter in 0..=PROX_MAX_OUTER {
        model.build(p, &y)?;
        let r = model.residual(&s, &y, x, lambda, tol);
        if r <= tol {
            return Ok(ProxSolution {
                point: y,
                residual: r,
                iterations: iter,
            });
        }
        if iter == PROX_MAX_OUTER {
            return Err(Error::InnerSolverCap {
                iterations: iter,
                residual: r.to_f64_lossy(),
            });
        }
        for ((zk, yk), xk) in z.iter_mut().zip(&y).zip(x) {
            *zk = (tau_bar * *yk + *xk * inv_lambda) / beta;
        }
        let next = model.solve_dual(&z, beta, &mut s);
        let moved = distance(&next, &y);
        y = next;
        if moved <= T::lit(4.0) * T::epsilon() * norm(&y) {
            model.build(p, &y)?;
            let r = model.residual(&s, &y, x, lambda, tol);
            return Ok(ProxSolution {
                point: y,
                residual: r,
                iterations: iter + 1,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Local models `|<a_i, y> + b_i|` of every component at a base point.
struct Model<T> {
    m: usize,
    d: usize,
    a: Vec<T>,
    b: Vec<T>,
    /// `<a_i, base>`, kept for the kink tolerance.
    ax: Vec<T>,
    sq: Vec<T>,
}

impl<T: Scalar> Model<T> {
    fn new(m: usize, d: usize) -> Self {
        Self {
            m,
            d,
            a: vec![T::zero(); m * d],
            b: vec![T::zero(); m],
            ax: vec![T::zero(); m],
            sq: vec![T::zero(); m],
        }
    }

    fn row(&self, i: usize) -> &[T] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    fn build<P: FiniteSum<T> + ?Sized>(&mut self, p: &P, base: &[T]) -> Result<()> {
        let d = self.d;
        for i in 0..self.m {
            let row = &mut self.a[i * d..(i + 1) * d];
            self.b[i] = p.linearize(i, base, row).ok_or(Error::NotComposite)?;
            self.ax[i] = dot(row, base);
            self.sq[i] = norm_sq(row);
        }
        Ok(())
    }

    fn residual(&self, s: &[T], y: &[T], x: &[T], lambda: T, tol: T) -> T {
        let mf = T::from_usize_lossy(self.m);
        let inv_lambda = T::one() / lambda;
        let mut v: Vec<T> = y.iter().zip(x).map(|(a, b)| (*a - *b) * inv_lambda).collect();
        for i in 0..self.m {
            let row = self.row(i);
            let c = self.ax[i] + self.b[i];
            let kappa = kink_tolerance(tol, lambda, self.sq[i].sqrt(), self.ax[i], self.b[i]);
            let si = if c.abs() > kappa {
                c.sign0()
            } else {
                s[i].clamp_to(-T::one(), T::one())
            };
            if si != T::zero() {
                axpy(si / mf, row, &mut v);
            }
        }
        norm(&v)
    }

    /// Solves `min_y (1/m) Σ |<a_i, y> + b_i| + (β/2)||y - z||²` by exact
    /// coordinate maximization of the dual, warm-started from `s`.
    fn solve_dual(&self, z: &[T], beta: T, s: &mut [T]) -> Vec<T> {
        let mf = T::from_usize_lossy(self.m);
        let bm = beta * mf;
        let one = T::one();
        // y = z - w / (β m) with w = Σ s_i a_i
        let mut y = z.to_vec();
        for i in 0..self.m {
            if s[i] != T::zero() {
                axpy(-s[i] / bm, self.row(i), &mut y);
            }
        }
        let zb: Vec<T> = (0..self.m).map(|i| dot(self.row(i), z) + self.b[i]).collect();
        for _ in 0..DUAL_MAX_SWEEPS {
            for i in 0..self.m {
                if self.sq[i] == T::zero() {
                    continue;
                }
                let row = self.row(i);
                let t = dot(row, &y) + self.b[i];
                let new = (s[i] + bm * t / self.sq[i]).clamp_to(-one, one);
                let delta = new - s[i];
                if delta != T::zero() {
                    axpy(-delta / bm, row, &mut y);
                    s[i] = new;
                }
            }
            // duality gap
            let mut primal = T::zero();
            let mut dual = T::zero();
            for i in 0..self.m {
                primal = primal + (dot(self.row(i), &y) + self.b[i]).abs();
                dual = dual + s[i] * zb[i];
            }
            let yz = distance(&y, z);
            let quad = T::lit(0.5) * beta * yz * yz;
            let primal = primal / mf + quad;
            let dual = dual / mf - quad;
            let gap = primal - dual;
            let floor = T::lit(64.0) * T::epsilon() * (primal.abs() + dual.abs());
            if gap <= floor {
                break;
            }
        }
        y
    }
}

/// `||∇f_{1/τ̂}(x)|| = τ̂ ||x - prox_{f/τ̂}(x)||`. Requires `τ̂ > 2τ`.
pub fn moreau_grad_norm<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &[T],
    tau_hat: T,
    tol: T,
) -> Result<MoreauEstimate<T>> {
    let tau = p.tau();
    if !(tau_hat > T::lit(2.0) * tau) || !(tau_hat > T::zero()) {
        return Err(invalid(format!("tau_hat = {tau_hat} must exceed 2 tau = {}", T::lit(2.0) * tau)));
    }
    let lambda = T::one() / tau_hat;
    let sol = prox_full_certified(p, x, lambda, tol)?;
    let dist = distance(x, &sol.point);
    Ok(MoreauEstimate {
        grad_norm: tau_hat * dist,
        envelope_value: p.full_value(&sol.point) + T::lit(0.5) * tau_hat * dist * dist,
        residual: sol.residual,
        proximal_point: sol.point,
    })
}

/// [`moreau_grad_norm`] at every point of `points`, evaluated in parallel.
pub fn moreau_sweep<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    points: &[Vec<T>],
    tau_hat: T,
    tol: T,
) -> Result<Vec<MoreauEstimate<T>>> {
    points.par_iter().map(|x| moreau_grad_norm(p, x, tau_hat, tol)).collect()
}

/// Running minimum of a sequence, the quantity bounded by the
/// constant-stepsize rate.
pub fn running_min<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut best = T::infinity();
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// The default `τ̂ = 3τ`.
pub fn default_tau_hat<T: Scalar>(tau: T) -> T {
    T::lit(3.0) * tau
}
