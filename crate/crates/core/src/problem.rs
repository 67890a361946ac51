//! Finite-sum oracle abstraction and regularity estimators.
//!
//! A problem is `f(x) = (1/m) Σ f_i(x)`. Solvers only talk to the per-component
//! oracles of [`FiniteSum`]; the `1/m` average is applied by
//! [`FiniteSum::full_value`] and [`FiniteSum::full_subgradient`].
//!
//! Most problems of interest have the composite form `f_i(x) = |c_i(x)|` with a
//! smooth scalar inner map `c_i`. Implementing [`AbsComposite`] for such a type
//! and invoking [`impl_abs_composite!`](crate::impl_abs_composite) provides the
//! whole [`FiniteSum`] interface, including the scalar-affine local model used
//! by prox-linear steps.

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, norm, scale};
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Per-component oracle bundle. Indices are zero-based. The unchecked methods
/// assume `i < num_components()` and `x.len() == dim()`; use the free
/// functions [`component_value`], [`component_subgradient`] and
/// [`local_model`] for validated access.
pub trait FiniteSum<T: Scalar>: Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    fn value(&self, i: usize, x: &[T]) -> T;

    /// Writes one element of the subdifferential of `f_i` at `x` into `out`.
    fn subgradient(&self, i: usize, x: &[T], out: &mut [T]);

    /// Scalar-affine local model `f_i(y; x) = |<a, y> + b|`. Writes `a` and
    /// returns `Some(b)`, or `None` when the component has no composite form.
    fn linearize(&self, _i: usize, _base: &[T], _a: &mut [T]) -> Option<T> {
        None
    }

    fn is_composite(&self) -> bool {
        false
    }

    /// Weak-convexity modulus of the whole family, `max_i tau_i`.
    fn tau(&self) -> T;

    /// Weak-convexity modulus of component `i`; also a valid majorization
    /// constant for its local model.
    fn component_tau(&self, _i: usize) -> T {
        self.tau()
    }

    /// Constants `(k0, k1)` with `||g|| <= k0 + k1 ||x||` for every
    /// subgradient (and local-model slope) of every component, when known.
    fn growth_bound(&self) -> Option<(T, T)> {
        None
    }

    /// `f(x) = (1/m) Σ f_i(x)`.
    fn full_value(&self, x: &[T]) -> T {
        let m = self.num_components();
        let s: T = (0..m).map(|i| self.value(i, x)).sum();
        s / T::from_usize_lossy(m)
    }

    /// `(1/m) Σ g_i(x)` with `g_i` the component subgradients.
    fn full_subgradient(&self, x: &[T], out: &mut [T]) {
        let m = self.num_components();
        let mut g = vec![T::zero(); x.len()];
        out.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..m {
            self.subgradient(i, x, &mut g);
            axpy(T::one(), &g, out);
        }
        scale(T::one() / T::from_usize_lossy(m), out);
    }
}

/// Components of the form `f_i(x) = |c_i(x)|` with a smooth inner map.
/// Pair with [`impl_abs_composite!`](crate::impl_abs_composite) to obtain the
/// [`FiniteSum`] oracles.
pub trait AbsComposite<T: Scalar>: Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    /// `c_i(x)`.
    fn inner(&self, i: usize, x: &[T]) -> T;

    /// `c_i(x)`, writing `∇c_i(x)` into `grad`.
    fn inner_grad(&self, i: usize, x: &[T], grad: &mut [T]) -> T;

    /// Weak-convexity modulus of `|c_i|`.
    fn inner_tau(&self, i: usize) -> T;

    fn tau(&self) -> T;

    fn growth_bound(&self) -> Option<(T, T)> {
        None
    }

    /// Optional fast path for `(1/m) Σ |c_i(x)|`.
    fn mean_abs(&self, _x: &[T]) -> Option<T> {
        None
    }

    /// Optional fast path for `(1/m) Σ sign(c_i(x)) ∇c_i(x)`; returns `false`
    /// when not provided.
    fn mean_subgradient(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }
}

/// Implements [`FiniteSum`] for a generic type `Name<T>` that implements
/// [`AbsComposite`]: value `|c_i|`, subgradient `sign(c_i) ∇c_i` with
/// `sign(0) = 0`, and local model `a = ∇c_i(base)`, `b = c_i(base) - <a, base>`.
#[macro_export]
macro_rules! impl_abs_composite {
    ($name:ident) => {
        impl<T: $crate::Scalar> $crate::problem::FiniteSum<T> for $name<T> {
            fn num_components(&self) -> usize {
                $crate::problem::AbsComposite::num_components(self)
            }
            fn dim(&self) -> usize {
                $crate::problem::AbsComposite::dim(self)
            }
            fn value(&self, i: usize, x: &[T]) -> T {
                $crate::problem::composite::value(self, i, x)
            }
            fn subgradient(&self, i: usize, x: &[T], out: &mut [T]) {
                $crate::problem::composite::subgradient(self, i, x, out)
            }
            fn linearize(&self, i: usize, base: &[T], a: &mut [T]) -> Option<T> {
                Some($crate::problem::composite::linearize(self, i, base, a))
            }
            fn is_composite(&self) -> bool {
                true
            }
            fn tau(&self) -> T {
                $crate::problem::AbsComposite::tau(self)
            }
            fn component_tau(&self, i: usize) -> T {
                $crate::problem::AbsComposite::inner_tau(self, i)
            }
            fn growth_bound(&self) -> Option<(T, T)> {
                $crate::problem::AbsComposite::growth_bound(self)
            }
            fn full_value(&self, x: &[T]) -> T {
                $crate::problem::composite::full_value(self, x)
            }
            fn full_subgradient(&self, x: &[T], out: &mut [T]) {
                $crate::problem::composite::full_subgradient(self, x, out)
            }
        }
    };
}

/// Oracle bodies shared by every [`AbsComposite`] type.
pub mod composite {
    use super::AbsComposite;
    use crate::linalg::{axpy, dot, scale};
    use crate::Scalar;

    pub fn value<T: Scalar, P: AbsComposite<T> + ?Sized>(p: &P, i: usize, x: &[T]) -> T {
        p.inner(i, x).abs()
    }

    pub fn subgradient<T: Scalar, P: AbsComposite<T> + ?Sized>(p: &P, i: usize, x: &[T], out: &mut [T]) {
        let c = p.inner_grad(i, x, out);
        // zero at the kink
        scale(c.sign0(), out);
    }

    pub fn linearize<T: Scalar, P: AbsComposite<T> + ?Sized>(p: &P, i: usize, base: &[T], a: &mut [T]) -> T {
        let c = p.inner_grad(i, base, a);
        c - dot(a, base)
    }

    pub fn full_value<T: Scalar, P: AbsComposite<T> + ?Sized>(p: &P, x: &[T]) -> T {
        if let Some(v) = p.mean_abs(x) {
            return v;
        }
        let m = p.num_components();
        let s: T = (0..m).map(|i| p.inner(i, x).abs()).sum();
        s / T::from_usize_lossy(m)
    }

    pub fn full_subgradient<T: Scalar, P: AbsComposite<T> + ?Sized>(p: &P, x: &[T], out: &mut [T]) {
        if p.mean_subgradient(x, out) {
            return;
        }
        let m = p.num_components();
        let mut g = vec![T::zero(); x.len()];
        out.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..m {
            let c = p.inner_grad(i, x, &mut g);
            axpy(c.sign0(), &g, out);
        }
        scale(T::one() / T::from_usize_lossy(m), out);
    }
}

/// Scalar-affine local model `y ↦ |<a, y> + b|` of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeComponent<T> {
    pub a: Vec<T>,
    pub b: T,
}

impl<T: Scalar> CompositeComponent<T> {
    pub fn eval(&self, y: &[T]) -> T {
        (dot(&self.a, y) + self.b).abs()
    }
}

/// Regularity metadata: weak convexity `tau`, subgradient bound `lipschitz`
/// valid on a ball of `region_radius`, and optional sharpness.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "")]
pub struct RegularityParams<T: Scalar> {
    pub tau: T,
    pub lipschitz: T,
    pub sharpness: Option<T>,
    pub region_radius: T,
}

impl<T: Scalar> RegularityParams<T> {
    pub fn new(tau: T, lipschitz: T, sharpness: Option<T>, region_radius: T) -> Result<Self> {
        if !(tau >= T::zero()) {
            return Err(invalid(format!("tau must be >= 0, got {tau}")));
        }
        if !(lipschitz > T::zero()) {
            return Err(invalid(format!("lipschitz must be > 0, got {lipschitz}")));
        }
        if let Some(alpha) = sharpness {
            if !(alpha > T::zero()) {
                return Err(invalid(format!("sharpness must be > 0, got {alpha}")));
            }
            if lipschitz < alpha {
                return Err(invalid(format!(
                    "lipschitz {lipschitz} is below sharpness {alpha}; L >= alpha must hold"
                )));
            }
        }
        Ok(Self {
            tau,
            lipschitz,
            sharpness,
            region_radius,
        })
    }
}

pub(crate) fn check_index<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, i: usize) -> Result<()> {
    let m = p.num_components();
    if i >= m {
        return Err(Error::IndexOutOfRange { index: i, len: m });
    }
    Ok(())
}

pub(crate) fn check_point<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, x: &[T]) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    if !crate::linalg::all_finite(x) {
        return Err(Error::NonFinite("point"));
    }
    Ok(())
}

pub fn component_value<T: Scalar, P: FiniteSum<T> + ?Sized>(p: &P, i: usize, x: &[T]) -> Result<T> {
    check_index(p, i)?;
    check_point(p, x)?;
    Ok(p.value(i, x))
}

pub fn component_subgradient<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    i: usize,
    x: &[T],
) -> Result<Vec<T>> {
    check_index(p, i)?;
    check_point(p, x)?;
    let mut g = vec![T::zero(); x.len()];
    p.subgradient(i, x, &mut g);
    Ok(g)
}

pub fn local_model<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    i: usize,
    base: &[T],
) -> Result<CompositeComponent<T>> {
    check_index(p, i)?;
    check_point(p, base)?;
    let mut a = vec![T::zero(); base.len()];
    let b = p.linearize(i, base, &mut a).ok_or(Error::NotComposite)?;
    Ok(CompositeComponent { a, b })
}

/// Sampled estimate of the subgradient bound on a ball: the largest
/// component subgradient norm over `samples` uniform points (plus the
/// center), inflated by 1.2.
pub fn estimate_lipschitz<T: Scalar, P: FiniteSum<T> + ?Sized>(
    p: &P,
    region_center: &[T],
    region_radius: T,
    samples: usize,
    seed: u64,
) -> Result<T> {
    if !(region_radius > T::zero()) {
        return Err(invalid("region radius must be positive"));
    }
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    check_point(p, region_center)?;
    let mut rng = SeedStream::new(seed, streams::LIPSCHITZ);
    let mut g = vec![T::zero(); p.dim()];
    let mut best = T::zero();
    let mut probe = |x: &[T], best: &mut T| {
        for i in 0..p.num_components() {
            p.subgradient(i, x, &mut g);
            *best = best.max(norm(&g));
        }
    };
    probe(region_center, &mut best);
    for _ in 0..samples {
        let x = rng.ball_point(region_center, region_radius);
        probe(&x, &mut best);
    }
    let l = T::lit(1.2) * best;
    if !(l > T::zero()) {
        return Err(Error::ZeroLipschitz);
    }
    Ok(l)
}

/// `f_i(x) = |<a_i, x> + b_i|`: a convex scalar-affine family, handy for
/// hand-checkable examples. Rows are stored contiguously.
#[derive(Debug, Clone)]
pub struct AbsAffine<T> {
    rows: Vec<T>,
    offsets: Vec<T>,
    dim: usize,
}

impl<T: Scalar> AbsAffine<T> {
    pub fn new(rows: Vec<Vec<T>>, offsets: Vec<T>) -> Result<Self> {
        if rows.is_empty() || rows.len() != offsets.len() {
            return Err(invalid("need one offset per row and at least one row"));
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("rows must share a positive dimension"));
        }
        Ok(Self {
            rows: rows.into_iter().flatten().collect(),
            offsets,
            dim,
        })
    }

    /// `m` copies of the scalar `|x - shift|`.
    pub fn scalar_abs(shifts: &[T]) -> Self {
        Self {
            rows: vec![T::one(); shifts.len()],
            offsets: shifts.iter().map(|s| -*s).collect(),
            dim: 1,
        }
    }

    fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

impl<T: Scalar> AbsComposite<T> for AbsAffine<T> {
    fn num_components(&self) -> usize {
        self.offsets.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn inner(&self, i: usize, x: &[T]) -> T {
        dot(self.row(i), x) + self.offsets[i]
    }

    fn inner_grad(&self, i: usize, x: &[T], grad: &mut [T]) -> T {
        grad.copy_from_slice(self.row(i));
        self.inner(i, x)
    }

    fn inner_tau(&self, _i: usize) -> T {
        T::zero()
    }

    fn tau(&self) -> T {
        T::zero()
    }

    fn growth_bound(&self) -> Option<(T, T)> {
        let k0 = (0..self.offsets.len())
            .map(|i| norm(self.row(i)))
            .fold(T::zero(), |a, b| a.max(b));
        Some((k0, T::zero()))
    }
}

type ValueFn<T> = dyn Fn(usize, &[T]) -> T + Send + Sync;
type GradFn<T> = dyn Fn(usize, &[T], &mut [T]) + Send + Sync;

crate::impl_abs_composite!(AbsAffine);

/// Black-box components given by closures. No composite structure.
pub struct ClosureProblem<T> {
    m: usize,
    dim: usize,
    tau: T,
    value: Box<ValueFn<T>>,
    subgradient: Box<GradFn<T>>,
}

impl<T: Scalar> ClosureProblem<T> {
    pub fn new(
        m: usize,
        dim: usize,
        tau: T,
        value: impl Fn(usize, &[T]) -> T + Send + Sync + 'static,
        subgradient: impl Fn(usize, &[T], &mut [T]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(invalid("need at least one component and one coordinate"));
        }
        Ok(Self {
            m,
            dim,
            tau,
            value: Box::new(value),
            subgradient: Box::new(subgradient),
        })
    }
}

impl<T: Scalar> FiniteSum<T> for ClosureProblem<T> {
    fn num_components(&self) -> usize {
        self.m
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, i: usize, x: &[T]) -> T {
        (self.value)(i, x)
    }

    fn subgradient(&self, i: usize, x: &[T], out: &mut [T]) {
        (self.subgradient)(i, x, out)
    }

    fn tau(&self) -> T {
        self.tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_subgradient_examples() {
        let p = AbsAffine::scalar_abs(&[0.0f64]);
        assert_eq!(component_subgradient(&p, 0, &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(component_subgradient(&p, 0, &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(component_value(&p, 0, &[-3.0]).unwrap(), 3.0);
    }

    #[test]
    fn checked_access_errors() {
        let p = AbsAffine::scalar_abs(&[0.0f64, 1.0]);
        assert!(matches!(
            component_value(&p, 2, &[0.0]),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(matches!(
            component_subgradient(&p, 0, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(matches!(
            component_value(&p, 0, &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn black_box_has_no_local_model() {
        let p = ClosureProblem::new(1, 1, 2.0f64, |_, x| x[0] * x[0], |_, x, g| g[0] = 2.0 * x[0])
            .unwrap();
        assert!(matches!(local_model(&p, 0, &[1.0]), Err(Error::NotComposite)));
    }

    #[test]
    fn flat_model_is_zero() {
        // c(x) = <0, x> + 0 at any base
        let p = AbsAffine::new(vec![vec![0.0f64, 0.0]], vec![0.0]).unwrap();
        let lm = local_model(&p, 0, &[1.0, 2.0]).unwrap();
        assert_eq!(lm.a, vec![0.0, 0.0]);
        assert_eq!(lm.b, 0.0);
    }

    #[test]
    fn lipschitz_of_abs() {
        let p = AbsAffine::scalar_abs(&[0.0f64]);
        let l = estimate_lipschitz(&p, &[0.0], 1.0, 16, 3).unwrap();
        assert!((l - 1.2).abs() < 1e-15);
        assert_eq!(l, estimate_lipschitz(&p, &[0.0], 1.0, 16, 3).unwrap());
        assert!(estimate_lipschitz(&p, &[0.0], 0.0, 16, 3).is_err());
    }

    #[test]
    fn zero_function_lipschitz_is_an_error() {
        let p = ClosureProblem::new(2, 3, 0.0f64, |_, _| 0.0, |_, _, g| g.fill(0.0)).unwrap();
        assert!(matches!(
            estimate_lipschitz(&p, &[0.0; 3], 1.0, 8, 0),
            Err(Error::ZeroLipschitz)
        ));
    }

    #[test]
    fn regularity_requires_l_at_least_alpha() {
        assert!(RegularityParams::new(1.0f64, 1.0, Some(2.0), 1.0).is_err());
        assert!(RegularityParams::new(1.0f64, 2.0, Some(1.0), 1.0).is_ok());
        assert!(RegularityParams::new(-1.0f64, 2.0, None, 1.0).is_err());
        assert!(RegularityParams::new(1.0f64, 0.0, None, 1.0).is_err());
    }

    #[test]
    fn full_subgradient_averages() {
        // |x| and |x - 2| at x = 1 cancel
        let p = AbsAffine::scalar_abs(&[0.0f64, 2.0]);
        let mut g = [9.0];
        p.full_subgradient(&[1.0], &mut g);
        assert_eq!(g, [0.0]);
        assert_eq!(p.full_value(&[1.0]), 1.0);
    }
}
