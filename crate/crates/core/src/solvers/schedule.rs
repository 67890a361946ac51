use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Scalar;

/// Stepsize rule indexed by the outer iteration (epoch) `k`, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "")]
pub enum StepSchedule<T: Scalar> {
    Constant { mu: T },
    Geometric { mu0: T, rho: T },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn constant(mu: T) -> Result<Self> {
        if !(mu > T::zero() && mu.is_finite()) {
            return Err(invalid(format!("stepsize must be positive, got {mu}")));
        }
        Ok(StepSchedule::Constant { mu })
    }

    /// Geometric schedule with only the basic range checks
    /// (`mu0 > 0`, `0 < rho < 1`); the theoretical bounds are enforced by
    /// [`geometric_schedule`].
    pub fn geometric(mu0: T, rho: T) -> Result<Self> {
        if !(mu0 > T::zero() && mu0.is_finite()) {
            return Err(invalid(format!("mu0 must be positive, got {mu0}")));
        }
        if !(rho > T::zero() && rho < T::one()) {
            return Err(invalid(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(StepSchedule::Geometric { mu0, rho })
    }

    /// `μ_k`.
    pub fn step(&self, k: usize) -> T {
        match *self {
            StepSchedule::Constant { mu } => mu,
            StepSchedule::Geometric { mu0, rho } => mu0 * rho.powi(k as i32),
        }
    }

    /// `Σ_{j ≥ k} μ_j`, infinite for a constant schedule.
    pub fn tail_sum(&self, k: usize) -> T {
        match *self {
            StepSchedule::Constant { .. } => T::infinity(),
            StepSchedule::Geometric { rho, .. } => self.step(k) / (T::one() - rho),
        }
    }

    /// Same schedule with every stepsize multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        match *self {
            StepSchedule::Constant { mu } => StepSchedule::Constant { mu: mu * factor },
            StepSchedule::Geometric { mu0, rho } => StepSchedule::Geometric {
                mu0: mu0 * factor,
                rho,
            },
        }
    }
}

/// `μ = 1 / (m √(N + 1))` for a run of `N` epochs.
pub fn constant_schedule<T: Scalar>(m: usize, epochs: usize) -> StepSchedule<T> {
    let m = T::from_usize_lossy(m.max(1));
    let n1 = T::from_usize_lossy(epochs) + T::one();
    StepSchedule::Constant {
        mu: T::one() / (m * n1.sqrt()),
    }
}

/// Largest admissible initial stepsize `α² / (5 m τ L²)`.
pub fn max_initial_step<T: Scalar>(alpha: T, tau: T, lipschitz: T, m: usize) -> T {
    let five = T::lit(5.0);
    alpha * alpha / (five * T::from_usize_lossy(m) * tau * lipschitz * lipschitz)
}

/// `ρ̄ = sqrt(1 - 2 m τ μ0 + 5 m² τ² L² μ0² / α²)`.
pub fn min_decay<T: Scalar>(alpha: T, tau: T, lipschitz: T, m: usize, mu0: T) -> T {
    let m = T::from_usize_lossy(m);
    let mt = m * tau * mu0;
    let q = T::one() - T::lit(2.0) * mt + T::lit(5.0) * mt * mt * lipschitz * lipschitz / (alpha * alpha);
    q.max(T::zero()).sqrt()
}

/// Geometric schedule from the regularity constants. With both optional
/// arguments omitted this is `μ0 = α²/(5mτL²)`, `ρ = sqrt(1 - α²/(5L²))`.
pub fn geometric_schedule<T: Scalar>(
    alpha: T,
    tau: T,
    lipschitz: T,
    m: usize,
    mu0: Option<T>,
    rho: Option<T>,
) -> Result<StepSchedule<T>> {
    if !(alpha > T::zero()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(tau > T::zero()) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if lipschitz < alpha {
        return Err(invalid(format!(
            "Lipschitz constant {lipschitz} is below the sharpness constant {alpha}"
        )));
    }
    let slack = T::one() + T::lit(64.0) * T::epsilon();
    let mu_max = max_initial_step(alpha, tau, lipschitz, m);
    let (mu0, rho_bar) = match mu0 {
        None => {
            let five = T::lit(5.0);
            (mu_max, (T::one() - alpha * alpha / (five * lipschitz * lipschitz)).sqrt())
        }
        Some(mu0) => {
            if !(mu0 > T::zero() && mu0 <= mu_max * slack) {
                return Err(invalid(format!("mu0 = {mu0} outside (0, {mu_max}]")));
            }
            (mu0, min_decay(alpha, tau, lipschitz, m, mu0))
        }
    };
    let rho = match rho {
        None => rho_bar,
        Some(rho) => {
            if rho * slack < rho_bar || rho >= T::one() {
                return Err(invalid(format!("rho = {rho} outside [{rho_bar}, 1)")));
            }
            rho
        }
    };
    StepSchedule::geometric(mu0, rho)
}
