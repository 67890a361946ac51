use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::problem::{check_point, FiniteSum};
use crate::Scalar;

/// Iteration cap of the IPP inner solver.
pub const IPP_MAX_INNER: usize = 200;

/// Exact minimizer of `|<a, x> + b| + (1/2μ) ||x - center||²`.
///
/// The minimizer lies on the line `center - s·a` with
/// `s = clip((<a, center> + b) / ||a||², -μ, μ)`.
pub fn prox_scalar_affine<T: Scalar>(a: &[T], b: T, center: &[T], mu: T) -> Vec<T> {
    let mut out = center.to_vec();
    prox_scalar_affine_in_place(a, b, &mut out, mu);
    out
}

/// In-place form of [`prox_scalar_affine`]: `x` holds the center on entry.
pub fn prox_scalar_affine_in_place<T: Scalar>(a: &[T], b: T, x: &mut [T], mu: T) {
    let q = norm_sq(a);
    if q == T::zero() {
        return;
    }
    let t0 = dot(a, x) + b;
    let s = (t0 / q).clamp_to(-mu, mu);
    axpy(-s, a, x);
}

/// Counters from the IPP inner solver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerStats {
    pub solves: usize,
    pub iterations: usize,
    /// Solves that stopped because the iterate stopped moving in floating
    /// point before the residual reached the tolerance.
    pub floor_hits: usize,
    pub max_residual: f64,
}

impl InnerStats {
    pub fn merge(&mut self, other: &InnerStats) {
        self.solves += other.solves;
        self.iterations += other.iterations;
        self.floor_hits += other.floor_hits;
        self.max_residual = self.max_residual.max(other.max_residual);
    }
}

fn check_step<T: Scalar>(mu: T) -> Result<()> {
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(invalid(format!("stepsize must be positive, got {mu}")));
    }
    Ok(())
}

fn check_order(order: &[usize], m: usize) -> Result<()> {
    if let Some(&bad) = order.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index: bad, len: m });
    }
    Ok(())
}

/// One pass of incremental subgradient steps `x ← x - μ g_i(x)` in `order`.
pub fn igd_epoch<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &[T], mu: T, order: &[usize]) -> Result<Vec<T>> {
    check_point(p, x)?;
    check_step(mu)?;
    check_order(order, p.num_components())?;
    let mut x = x.to_vec();
    let mut g = vec![T::zero(); x.len()];
    igd_pass(p, &mut x, mu, order, &mut g);
    Ok(x)
}

pub(crate) fn igd_pass<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &mut [T], mu: T, order: &[usize], g: &mut [T]) {
    for &i in order {
        p.subgradient(i, x, g);
        axpy(-mu, g, x);
    }
}

/// One pass of prox-linear steps on the local models `|<a_i, y> + b_i|`
/// built at the current iterate.
pub fn ipl_epoch<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &[T], mu: T, order: &[usize]) -> Result<Vec<T>> {
    check_point(p, x)?;
    check_step(mu)?;
    check_order(order, p.num_components())?;
    if !p.is_composite() {
        return Err(Error::NotComposite);
    }
    let mut x = x.to_vec();
    let mut a = vec![T::zero(); x.len()];
    ipl_pass(p, &mut x, mu, order, &mut a)?;
    Ok(x)
}

pub(crate) fn ipl_pass<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &mut [T],
    mu: T,
    order: &[usize],
    a: &mut [T],
) -> Result<()> {
    for &i in order {
        let b = p.linearize(i, x, a).ok_or(Error::NotComposite)?;
        prox_scalar_affine_in_place(a, b, x, mu);
    }
    Ok(())
}

/// Kink tolerance used by the IPP residual: below it the component value is
/// treated as zero and the whole sign interval `[-1, 1]` is admissible.
pub fn kink_tolerance<T: Scalar>(tol: T, mu: T, grad_norm: T, ax: T, b: T) -> T {
    let rounding = T::lit(16.0) * T::epsilon() * (ax.abs() + b.abs());
    (T::lit(0.5) * tol * mu * grad_norm).max(rounding)
}

/// Fixed-point residual of one proximal subproblem at `x`:
/// the smallest `||s·a + (x - center)/μ||` over admissible signs `s`,
/// where `a = ∇c_i(x)` and `c = c_i(x)`.
pub fn prox_residual<T: Scalar>(a: &[T], c: T, ax: T, b: T, x: &[T], center: &[T], mu: T, tol: T) -> T {
    let inv = T::one() / mu;
    let v: Vec<T> = x.iter().zip(center).map(|(xi, ci)| (*xi - *ci) * inv).collect();
    let gn = norm(a);
    let kappa = kink_tolerance(tol, mu, gn, ax, b);
    let s = if c.abs() > kappa {
        c.sign0()
    } else if gn == T::zero() {
        T::zero()
    } else {
        (-dot(a, &v) / (gn * gn)).clamp_to(-T::one(), T::one())
    };
    let mut r = T::zero();
    for (ai, vi) in a.iter().zip(&v) {
        let t = s * *ai + *vi;
        r = r + t * t;
    }
    r.sqrt()
}

/// Solves `min_y f_i(y) + (1/2μ)||y - center||²` by majorization: each
/// iteration replaces `f_i` with its local model plus `(τ_i/2)||y - y_j||²`
/// and applies the closed-form prox. Returns the solution and its residual.
pub fn ipp_inner<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    i: usize,
    center: &[T],
    mu: T,
    tol: T,
    stats: &mut InnerStats,
) -> Result<(Vec<T>, T)> {
    let tau_i = p.component_tau(i);
    let inv_mu = T::one() / mu;
    let beta = tau_i + inv_mu;
    let mut y = center.to_vec();
    let mut a = vec![T::zero(); y.len()];
    let mut b = p.linearize(i, &y, &mut a).ok_or(Error::NotComposite)?;
    let mut z = vec![T::zero(); y.len()];
    stats.solves += 1;
    for iter in 0..IPP_MAX_INNER {
        let ax = dot(&a, &y);
        let c = ax + b;
        let r = prox_residual(&a, c, ax, b, &y, center, mu, tol);
        if r <= tol {
            stats.iterations += iter;
            stats.max_residual = stats.max_residual.max(r.to_f64_lossy());
            return Ok((y, r));
        }
        for ((zk, yk), ck) in z.iter_mut().zip(&y).zip(center) {
            *zk = (tau_i * *yk + *ck * inv_mu) / beta;
        }
        prox_scalar_affine_in_place(&a, b, &mut z, T::one() / beta);
        let moved = crate::linalg::distance(&z, &y);
        std::mem::swap(&mut y, &mut z);
        b = p.linearize(i, &y, &mut a).ok_or(Error::NotComposite)?;
        if moved <= T::lit(4.0) * T::epsilon() * norm(&y) {
            let ax = dot(&a, &y);
            let r = prox_residual(&a, ax + b, ax, b, &y, center, mu, tol);
            stats.iterations += iter + 1;
            if r > tol {
                stats.floor_hits += 1;
            }
            stats.max_residual = stats.max_residual.max(r.to_f64_lossy());
            return Ok((y, r));
        }
    }
    let ax = dot(&a, &y);
    let r = prox_residual(&a, ax + b, ax, b, &y, center, mu, tol);
    Err(Error::InnerSolverCap {
        iterations: IPP_MAX_INNER,
        residual: r.to_f64_lossy(),
    })
}

/// One pass of incremental proximal point steps. Requires `μ < 1/τ`.
pub fn ipp_epoch<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &[T],
    mu: T,
    order: &[usize],
    inner_tol: T,
) -> Result<Vec<T>> {
    let mut stats = InnerStats::default();
    ipp_epoch_with_stats(p, x, mu, order, inner_tol, &mut stats)
}

pub fn ipp_epoch_with_stats<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &[T],
    mu: T,
    order: &[usize],
    inner_tol: T,
    stats: &mut InnerStats,
) -> Result<Vec<T>> {
    check_point(p, x)?;
    check_step(mu)?;
    check_order(order, p.num_components())?;
    check_ipp(p, mu, inner_tol)?;
    let mut x = x.to_vec();
    ipp_pass(p, &mut x, mu, order, inner_tol, stats)?;
    Ok(x)
}

pub(crate) fn check_ipp<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, mu: T, inner_tol: T) -> Result<()> {
    if !p.is_composite() {
        return Err(Error::NotComposite);
    }
    if !(inner_tol > T::zero()) {
        return Err(invalid(format!("inner_tol must be positive, got {inner_tol}")));
    }
    let tau = p.tau();
    if mu * tau >= T::one() {
        return Err(Error::StepTooLarge {
            mu: mu.to_f64_lossy(),
            limit: (T::one() / tau).to_f64_lossy(),
        });
    }
    Ok(())
}

pub(crate) fn ipp_pass<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    x: &mut Vec<T>,
    mu: T,
    order: &[usize],
    inner_tol: T,
    stats: &mut InnerStats,
) -> Result<()> {
    for &i in order {
        let (y, _) = ipp_inner(p, i, x, mu, inner_tol, stats)?;
        *x = y;
    }
    Ok(())
}

/// Full subgradient step `x - μ (1/m) Σ g_i(x)`.
pub fn gd_step<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &[T], mu: T) -> Result<Vec<T>> {
    check_point(p, x)?;
    check_step(mu)?;
    let mut x = x.to_vec();
    let mut g = vec![T::zero(); x.len()];
    gd_in_place(p, &mut x, mu, &mut g);
    Ok(x)
}

pub(crate) fn gd_in_place<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &mut [T], mu: T, g: &mut [T]) {
    p.full_subgradient(x, g);
    axpy(-mu, g, x);
}
