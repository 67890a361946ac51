//! Synthetic robust-recovery problem families with planted solutions.
//!
//! Every generator draws from fixed [`crate::rng::streams`] so an instance is
//! a pure function of its arguments and seed. Outliers are placed on
//! `round(p·m)` distinct components chosen uniformly, with magnitudes drawn
//! from a mean-zero Gaussian of variance 10.

mod bd;
mod rms;
mod rpca;
mod rpr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bd::BdInstance;
pub use rms::RmsInstance;
pub use rpca::RpcaInstance;
pub use rpr::RprInstance;

use crate::error::{invalid, Error, Result};
use crate::problem::AbsComposite;
use crate::rng::{streams, SeedStream};
use crate::Scalar;

/// Standard deviation of the outlier entries (variance 10).
pub const OUTLIER_STD: f64 = 3.162_277_660_168_379_5;

/// Distance from a point to the known set of global minimizers.
pub trait SolutionSet<T: Scalar> {
    fn dist_to_solutions(&self, x: &[T]) -> Result<T>;

    /// One member of the solution set, flattened like an iterate.
    fn ground_truth_point(&self) -> Vec<T>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Rms,
    Rpr,
    Bd,
    Rpca,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Rms => "rms",
            InstanceKind::Rpr => "rpr",
            InstanceKind::Bd => "bd",
            InstanceKind::Rpca => "rpca",
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rms" => Ok(InstanceKind::Rms),
            "rpr" => Ok(InstanceKind::Rpr),
            "bd" => Ok(InstanceKind::Bd),
            "rpca" => Ok(InstanceKind::Rpca),
            other => Err(invalid(format!("unknown instance kind '{other}'"))),
        }
    }
}

/// Generator arguments. Omitted sizes fall back to the experiment defaults:
/// RMS `n=50, r=5, m=5nr`; RPR `n=100, m=10n`; BD `n1=n2=50, m=8(n1+n2)`;
/// RPCA `n=30, r=3`. The default outlier ratio is 0.3 (0.1 for RPCA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSpec {
    Rms {
        #[serde(default = "d_rms_n")]
        n: usize,
        #[serde(default = "d_rms_r")]
        r: usize,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default = "d_p")]
        p: f64,
        #[serde(default)]
        seed: u64,
    },
    Rpr {
        #[serde(default = "d_rpr_n")]
        n: usize,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default = "d_p")]
        p: f64,
        #[serde(default)]
        seed: u64,
    },
    Bd {
        #[serde(default = "d_bd_n")]
        n1: usize,
        #[serde(default = "d_bd_n")]
        n2: usize,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default = "d_p")]
        p: f64,
        #[serde(default)]
        seed: u64,
    },
    Rpca {
        #[serde(default = "d_rpca_n")]
        n: usize,
        #[serde(default = "d_rpca_r")]
        r: usize,
        #[serde(default = "d_rpca_p")]
        p: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn d_rms_n() -> usize {
    50
}
fn d_rms_r() -> usize {
    5
}
fn d_rpr_n() -> usize {
    100
}
fn d_bd_n() -> usize {
    50
}
fn d_rpca_n() -> usize {
    30
}
fn d_rpca_r() -> usize {
    3
}
fn d_p() -> f64 {
    0.3
}
fn d_rpca_p() -> f64 {
    0.1
}

impl InstanceSpec {
    pub fn kind(&self) -> InstanceKind {
        match self {
            InstanceSpec::Rms { .. } => InstanceKind::Rms,
            InstanceSpec::Rpr { .. } => InstanceKind::Rpr,
            InstanceSpec::Bd { .. } => InstanceKind::Bd,
            InstanceSpec::Rpca { .. } => InstanceKind::Rpca,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            InstanceSpec::Rms { seed, .. }
            | InstanceSpec::Rpr { seed, .. }
            | InstanceSpec::Bd { seed, .. }
            | InstanceSpec::Rpca { seed, .. } => seed,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            InstanceSpec::Rms { seed, .. }
            | InstanceSpec::Rpr { seed, .. }
            | InstanceSpec::Bd { seed, .. }
            | InstanceSpec::Rpca { seed, .. } => *seed = new_seed,
        }
        self
    }

    /// Full-scale defaults for `kind` with the given seed.
    pub fn defaults(kind: InstanceKind, seed: u64) -> Self {
        match kind {
            InstanceKind::Rms => InstanceSpec::Rms {
                n: 50,
                r: 5,
                m: None,
                p: 0.3,
                seed,
            },
            InstanceKind::Rpr => InstanceSpec::Rpr {
                n: 100,
                m: None,
                p: 0.3,
                seed,
            },
            InstanceKind::Bd => InstanceSpec::Bd {
                n1: 50,
                n2: 50,
                m: None,
                p: 0.3,
                seed,
            },
            InstanceKind::Rpca => InstanceSpec::Rpca {
                n: 30,
                r: 3,
                p: 0.1,
                seed,
            },
        }
    }

    pub fn generate<T: Scalar>(&self) -> Result<Instance<T>> {
        Ok(match *self {
            InstanceSpec::Rms { n, r, m, p, seed } => {
                Instance::Rms(generate_rms(n, r, m.unwrap_or(5 * n * r), p, seed)?)
            }
            InstanceSpec::Rpr { n, m, p, seed } => {
                Instance::Rpr(generate_rpr(n, m.unwrap_or(10 * n), p, seed)?)
            }
            InstanceSpec::Bd { n1, n2, m, p, seed } => {
                Instance::Bd(generate_bd(n1, n2, m.unwrap_or(8 * (n1 + n2)), p, seed)?)
            }
            InstanceSpec::Rpca { n, r, p, seed } => Instance::Rpca(generate_rpca(n, r, p, seed)?),
        })
    }
}

pub fn generate_rms<T: Scalar>(n: usize, r: usize, m: usize, p: f64, seed: u64) -> Result<RmsInstance<T>> {
    RmsInstance::generate(n, r, m, p, seed)
}

pub fn generate_rpr<T: Scalar>(n: usize, m: usize, p: f64, seed: u64) -> Result<RprInstance<T>> {
    RprInstance::generate(n, m, p, seed)
}

pub fn generate_bd<T: Scalar>(n1: usize, n2: usize, m: usize, p: f64, seed: u64) -> Result<BdInstance<T>> {
    BdInstance::generate(n1, n2, m, p, seed)
}

pub fn generate_rpca<T: Scalar>(n: usize, r: usize, p: f64, seed: u64) -> Result<RpcaInstance<T>> {
    RpcaInstance::generate(n, r, p, seed)
}

pub(crate) fn check_ratio(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("outlier ratio must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// Sparse outlier vector of length `len` with `round(p·len)` nonzeros.
pub(crate) fn outliers<T: Scalar>(len: usize, p: f64, seed: u64) -> Vec<T> {
    let count = ((p * len as f64).round() as usize).min(len);
    let support = SeedStream::new(seed, streams::OUTLIER_SUPPORT).sample_distinct(len, count);
    let mut values = SeedStream::new(seed, streams::OUTLIER_VALUES);
    let mut s = vec![T::zero(); len];
    for idx in support {
        s[idx] = T::lit(OUTLIER_STD * values.gaussian());
    }
    s
}

pub(crate) fn check_dim<T>(x: &[T], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// A generated instance of any family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "")]
pub enum Instance<T: Scalar> {
    Rms(RmsInstance<T>),
    Rpr(RprInstance<T>),
    Bd(BdInstance<T>),
    Rpca(RpcaInstance<T>),
}

macro_rules! dispatch {
    ($self:expr, $inst:ident => $body:expr) => {
        match $self {
            Instance::Rms($inst) => $body,
            Instance::Rpr($inst) => $body,
            Instance::Bd($inst) => $body,
            Instance::Rpca($inst) => $body,
        }
    };
}

impl<T: Scalar> Instance<T> {
    pub fn kind(&self) -> InstanceKind {
        match self {
            Instance::Rms(_) => InstanceKind::Rms,
            Instance::Rpr(_) => InstanceKind::Rpr,
            Instance::Bd(_) => InstanceKind::Bd,
            Instance::Rpca(_) => InstanceKind::Rpca,
        }
    }

    /// Outlier vector (flattened row-major for RPCA).
    pub fn outliers(&self) -> &[T] {
        match self {
            Instance::Rms(i) => &i.outliers,
            Instance::Rpr(i) => &i.outliers,
            Instance::Bd(i) => &i.outliers,
            Instance::Rpca(i) => &i.outliers,
        }
    }

    /// Whether the family is known to be sharp around its solution set.
    /// Robust PCA is not.
    pub fn declared_sharp(&self) -> bool {
        !matches!(self, Instance::Rpca(_))
    }
}

/// Weak-convexity modulus from the closed forms: RMS `2 max ||A_i||_2`,
/// RPR `2 max ||a_i||²`, BD `max ||a_i|| ||c_i||`, RPCA `2`.
pub fn estimate_tau<T: Scalar>(instance: &Instance<T>) -> T {
    dispatch!(instance, i => AbsComposite::tau(i))
}

/// Closed-form weak-convexity modulus for an instance given by kind name.
pub fn estimate_tau_by_kind<T: Scalar>(kind: &str, instance: &Instance<T>) -> Result<T> {
    let kind: InstanceKind = kind.parse()?;
    if kind != instance.kind() {
        return Err(invalid(format!(
            "instance is {}, not {kind}",
            instance.kind()
        )));
    }
    Ok(estimate_tau(instance))
}

impl<T: Scalar> AbsComposite<T> for Instance<T> {
    fn num_components(&self) -> usize {
        dispatch!(self, i => AbsComposite::num_components(i))
    }

    fn dim(&self) -> usize {
        dispatch!(self, i => AbsComposite::dim(i))
    }

    fn inner(&self, k: usize, x: &[T]) -> T {
        dispatch!(self, i => i.inner(k, x))
    }

    fn inner_grad(&self, k: usize, x: &[T], grad: &mut [T]) -> T {
        dispatch!(self, i => i.inner_grad(k, x, grad))
    }

    fn inner_tau(&self, k: usize) -> T {
        dispatch!(self, i => i.inner_tau(k))
    }

    fn tau(&self) -> T {
        dispatch!(self, i => AbsComposite::tau(i))
    }

    fn growth_bound(&self) -> Option<(T, T)> {
        dispatch!(self, i => AbsComposite::growth_bound(i))
    }

    fn mean_abs(&self, x: &[T]) -> Option<T> {
        dispatch!(self, i => i.mean_abs(x))
    }

    fn mean_subgradient(&self, x: &[T], out: &mut [T]) -> bool {
        dispatch!(self, i => i.mean_subgradient(x, out))
    }
}

crate::impl_abs_composite!(Instance);

impl<T: Scalar> SolutionSet<T> for Instance<T> {
    fn dist_to_solutions(&self, x: &[T]) -> Result<T> {
        dispatch!(self, i => i.dist_to_solutions(x))
    }

    fn ground_truth_point(&self) -> Vec<T> {
        dispatch!(self, i => i.ground_truth_point())
    }
}

/// Frobenius distance from a column-major `n × r` factor to the orbit
/// `{truth · R : R orthogonal}`.
pub(crate) fn dist_rotation_orbit<T: Scalar>(u: &[T], truth: &[T], n: usize, r: usize) -> T {
    let rot = crate::linalg::procrustes_rotation(truth, u, n, r);
    let aligned = crate::linalg::mat_mul(truth, &rot, n, r, r);
    crate::linalg::distance(u, &aligned)
}
