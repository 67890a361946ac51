//! Incremental subgradient (IGD), proximal point (IPP) and prox-linear (IPL)
//! methods, their stochastic and full-batch baselines, and the run driver.

mod order;
mod schedule;
mod steps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use order::{OrderPolicy, OrderSampler};
pub use schedule::{constant_schedule, geometric_schedule, max_initial_step, min_decay, StepSchedule};
pub use steps::{
    gd_step, igd_epoch, ipl_epoch, ipp_epoch, ipp_epoch_with_stats, ipp_inner, kink_tolerance,
    prox_residual, prox_scalar_affine, prox_scalar_affine_in_place, InnerStats, IPP_MAX_INNER,
};

use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, norm};
use crate::problem::{check_point, FiniteSum};
use crate::stationarity::moreau_grad_norm;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Igd,
    Ipp,
    Ipl,
    Gd,
    Sgd,
    Spl,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Igd,
        SolverKind::Ipp,
        SolverKind::Ipl,
        SolverKind::Gd,
        SolverKind::Sgd,
        SolverKind::Spl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Igd => "igd",
            SolverKind::Ipp => "ipp",
            SolverKind::Ipl => "ipl",
            SolverKind::Gd => "gd",
            SolverKind::Sgd => "sgd",
            SolverKind::Spl => "spl",
        }
    }

    /// SGD and SPL sample components i.i.d.
    pub fn is_stochastic(self) -> bool {
        matches!(self, SolverKind::Sgd | SolverKind::Spl)
    }

    pub fn needs_composite(self) -> bool {
        matches!(self, SolverKind::Ipp | SolverKind::Ipl | SolverKind::Spl)
    }

    /// Order used when none is configured: i.i.d. for the stochastic
    /// methods, cyclic otherwise.
    pub fn default_order(self, seed: u64) -> OrderPolicy {
        if self.is_stochastic() {
            OrderPolicy::Iid { seed }
        } else {
            OrderPolicy::Cyclic
        }
    }

    /// Number of component updates per epoch whose lengths are bounded by
    /// `μ_k` times a subgradient norm (one for GD).
    fn updates_per_epoch(self, m: usize) -> usize {
        match self {
            SolverKind::Gd => 1,
            _ => m,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// All requested epochs ran.
    Completed,
    /// Stopped early: the distance is certified to stay below the threshold.
    Converged,
    /// Stopped early: the distance is certified to stay above the threshold.
    Stalled,
    /// The iterate left the divergence ball or became non-finite.
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EpochRecord<T: Scalar> {
    /// Completed epochs, starting at 1.
    pub epoch: usize,
    /// Stepsize used during this epoch.
    pub step_size: T,
    pub dist: Option<T>,
    pub fval: Option<T>,
    pub moreau_grad_norm: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunTrace<T: Scalar> {
    pub kind: SolverKind,
    pub order: OrderPolicy,
    pub schedule: StepSchedule<T>,
    pub epochs_requested: usize,
    pub records: Vec<EpochRecord<T>>,
    pub status: RunStatus,
    pub initial_dist: Option<T>,
    pub initial_fval: Option<T>,
    pub final_x: Vec<T>,
    #[serde(skip)]
    pub iterates: Vec<Vec<T>>,
    #[serde(skip)]
    pub inner: InnerStats,
}

impl<T: Scalar> RunTrace<T> {
    pub fn distances(&self) -> Vec<T> {
        self.records.iter().filter_map(|r| r.dist).collect()
    }

    pub fn last_dist(&self) -> Option<T> {
        self.records.last().and_then(|r| r.dist)
    }
}

/// Distance oracle used for logging and early stopping.
pub type DistanceFn<'a, T> = &'a (dyn Fn(&[T]) -> Result<T> + Sync + 'a);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoreauSettings<T> {
    pub tau_hat: T,
    pub tol: T,
}

/// Stop once the remaining movement of the iterates provably cannot carry
/// the distance across `threshold`.
///
/// After epoch `k` the iterates move at most
/// `D = S (k0 + k1 ||x_k||) / (1 - S k1)` in total, with `S` the number of
/// updates per epoch times `Σ_{j>k} μ_j` and `(k0, k1)` the subgradient
/// growth bound. Distances to a set are 1-Lipschitz, so `d_k - D >
/// threshold` proves failure and `d_k + D <= threshold` proves success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop<T> {
    pub threshold: T,
    /// Trailing records that must all lie after the stopping epoch.
    pub window: usize,
    pub growth: (T, T),
}

pub struct RunOptions<'a, T: Scalar> {
    pub distance: Option<DistanceFn<'a, T>>,
    pub function_value: bool,
    pub moreau: Option<MoreauSettings<T>>,
    pub inner_tol: T,
    pub divergence_limit: T,
    pub early_stop: Option<EarlyStop<T>>,
    pub keep_iterates: bool,
}

impl<T: Scalar> Default for RunOptions<'_, T> {
    fn default() -> Self {
        Self {
            distance: None,
            function_value: false,
            moreau: None,
            inner_tol: T::lit(1e-7),
            divergence_limit: T::lit(1e8),
            early_stop: None,
            keep_iterates: false,
        }
    }
}

/// Runs `epochs` outer iterations of `kind` from `x0`. The stepsize is frozen
/// at `μ_k` during epoch `k`.
#[allow(clippy::too_many_arguments)]
pub fn run<T: Scalar, P: FiniteSum<T> + ?Sized>(
    kind: SolverKind,
    problem: &P,
    schedule: &StepSchedule<T>,
    order: &OrderPolicy,
    x0: &[T],
    epochs: usize,
    opts: &RunOptions<'_, T>,
) -> Result<RunTrace<T>> {
    check_point(problem, x0)?;
    if epochs == 0 {
        return Err(invalid("a run needs at least one epoch"));
    }
    if kind.needs_composite() && !problem.is_composite() {
        return Err(Error::NotComposite);
    }
    if kind.is_stochastic() != order.is_stochastic() {
        return Err(invalid(format!("{kind} is incompatible with order {order:?}")));
    }
    if kind == SolverKind::Ipp {
        steps::check_ipp(problem, schedule.step(0), opts.inner_tol)?;
    }
    let m = problem.num_components();
    let mut sampler = order.sampler(m);
    let mut x = x0.to_vec();
    let mut buf = vec![T::zero(); x.len()];

    let metric = |x: &[T]| -> Result<(Option<T>, Option<T>)> {
        let d = opts.distance.map(|f| f(x)).transpose()?;
        let f = opts.function_value.then(|| problem.full_value(x));
        Ok((d, f))
    };
    let (initial_dist, initial_fval) = metric(&x)?;
    let mut trace = RunTrace {
        kind,
        order: *order,
        schedule: *schedule,
        epochs_requested: epochs,
        records: Vec::with_capacity(epochs),
        status: RunStatus::Completed,
        initial_dist,
        initial_fval,
        final_x: Vec::new(),
        iterates: Vec::new(),
        inner: InnerStats::default(),
    };
    if opts.keep_iterates {
        trace.iterates.push(x.clone());
    }

    for k in 0..epochs {
        let mu = schedule.step(k);
        match kind {
            SolverKind::Igd | SolverKind::Sgd => steps::igd_pass(problem, &mut x, mu, sampler.next_epoch(), &mut buf),
            SolverKind::Ipl | SolverKind::Spl => steps::ipl_pass(problem, &mut x, mu, sampler.next_epoch(), &mut buf)?,
            SolverKind::Ipp => steps::ipp_pass(problem, &mut x, mu, sampler.next_epoch(), opts.inner_tol, &mut trace.inner)?,
            SolverKind::Gd => steps::gd_in_place(problem, &mut x, mu, &mut buf),
        }
        let xn = norm(&x);
        if !all_finite(&x) || xn > opts.divergence_limit {
            trace.status = RunStatus::Diverged;
            break;
        }
        let (dist, fval) = metric(&x)?;
        let moreau = match opts.moreau {
            Some(s) => Some(moreau_grad_norm(problem, &x, s.tau_hat, s.tol)?.grad_norm),
            None => None,
        };
        trace.records.push(EpochRecord {
            epoch: k + 1,
            step_size: mu,
            dist,
            fval,
            moreau_grad_norm: moreau,
        });
        if opts.keep_iterates {
            trace.iterates.push(x.clone());
        }
        if let (Some(es), Some(d)) = (opts.early_stop, dist) {
            if k + 1 + es.window <= epochs {
                let s = T::from_usize_lossy(kind.updates_per_epoch(m)) * schedule.tail_sum(k + 1);
                let (k0, k1) = es.growth;
                if s * k1 < T::one() {
                    let drift = s * (k0 + k1 * xn) / (T::one() - s * k1);
                    if d - drift > es.threshold {
                        trace.status = RunStatus::Stalled;
                        break;
                    }
                    if d + drift <= es.threshold {
                        trace.status = RunStatus::Converged;
                        break;
                    }
                }
            }
        }
    }
    trace.final_x = x;
    Ok(trace)
}
