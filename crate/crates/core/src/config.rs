//! Experiment configuration (TOML).
//!
//! ```toml
//! solver = "igd"
//! epochs = 500
//! x0_seed = 0
//!
//! [instance]
//! kind = "rpr"
//! n = 100
//! seed = 1
//!
//! [schedule]
//! kind = "geometric"
//! mu0_times_m = 15.0
//! rho = 0.8
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::{
    default_grids, grid_search, initial_point, linspace, GridSettings, SuccessMap, DEFAULT_THRESHOLD, DEFAULT_WINDOW,
};
use crate::instances::{InstanceSpec, SolutionSet};
use crate::problem::FiniteSum;
use crate::solvers::{
    constant_schedule, geometric_schedule, run, MoreauSettings, OrderPolicy, RunOptions, RunTrace, SolverKind,
    StepSchedule,
};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub solver: SolverKind,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Seed of the shared Gaussian starting point.
    #[serde(default)]
    pub x0_seed: u64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    /// Defaults to cyclic, or i.i.d. with `order_seed` for SGD/SPL.
    #[serde(default)]
    pub order: Option<OrderPolicy>,
    #[serde(default)]
    pub order_seed: u64,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_window")]
    pub window: usize,
    #[serde(default = "d_inner_tol")]
    pub inner_tol: f64,
}

fn d_epochs() -> usize {
    500
}
fn d_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn d_window() -> usize {
    DEFAULT_WINDOW
}
fn d_inner_tol() -> f64 {
    1e-7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Fixed stepsize; defaults to `1/(m√(N+1))` for `N = epochs`.
    Constant {
        #[serde(default)]
        mu: Option<f64>,
    },
    /// `μ_k = μ0 ρ^k`; give `mu0` directly or as `mu0_times_m`.
    Geometric {
        #[serde(default)]
        mu0: Option<f64>,
        #[serde(default)]
        mu0_times_m: Option<f64>,
        rho: f64,
    },
    /// Schedule from the regularity constants (`geometric_schedule`).
    GeometricAuto {
        alpha: AlphaSource,
        /// Lipschitz constant; estimated on the probe ball when omitted.
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        mu0: Option<f64>,
        #[serde(default)]
        rho: Option<f64>,
    },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Constant { mu: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSource {
    Supplied {
        value: f64,
    },
    Calibrated {
        #[serde(default = "d_probes")]
        probes: usize,
        radius: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn d_probes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "yes")]
    pub dist: bool,
    #[serde(default = "yes")]
    pub fval: bool,
    #[serde(default)]
    pub moreau: bool,
    /// `τ̂ = tau_hat_factor · τ`; must exceed 2.
    #[serde(default = "d_tau_hat_factor")]
    pub tau_hat_factor: f64,
    #[serde(default = "d_moreau_tol")]
    pub moreau_tol: f64,
}

fn yes() -> bool {
    true
}
fn d_tau_hat_factor() -> f64 {
    3.0
}
fn d_moreau_tol() -> f64 {
    1e-9
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            dist: true,
            fval: true,
            moreau: false,
            tau_hat_factor: d_tau_hat_factor(),
            moreau_tol: d_moreau_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Explicit decay factors; defaults to 15 values on `[0.65, 0.99]`.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    /// Explicit initial stepsizes in units of `1/m`; defaults to 15 values
    /// on `[1, 210]`.
    #[serde(default)]
    pub mu0_times_m: Option<Vec<f64>>,
    #[serde(default)]
    pub rho_count: Option<usize>,
    #[serde(default)]
    pub mu0_count: Option<usize>,
    #[serde(default = "yes")]
    pub early_stop: bool,
    #[serde(default = "d_votes")]
    pub votes: usize,
    #[serde(default = "yes")]
    pub gd_epoch_scale: bool,
}

fn d_votes() -> usize {
    5
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rho: None,
            mu0_times_m: None,
            rho_count: None,
            mu0_count: None,
            early_stop: true,
            votes: d_votes(),
            gd_epoch_scale: true,
        }
    }
}

impl GridSpec {
    pub fn grids(&self) -> (Vec<f64>, Vec<f64>) {
        let (drho, dmu) = default_grids();
        let rho = match (&self.rho, self.rho_count) {
            (Some(r), _) => r.clone(),
            (None, Some(c)) => linspace(0.65, 0.99, c),
            (None, None) => drho,
        };
        let mu = match (&self.mu0_times_m, self.mu0_count) {
            (Some(v), _) => v.clone(),
            (None, Some(c)) => linspace(1.0, 210.0, c),
            (None, None) => dmu,
        };
        (rho, mu)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; the command line and the `INCOPT_OUT_DIR`
    /// environment variable take precedence in that order.
    #[serde(default)]
    pub dir: Option<String>,
    /// File name stem for artifacts (default: `<instance>_<solver>`).
    #[serde(default)]
    pub name: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if !(self.threshold > 0.0) {
            return Err(invalid("threshold must be positive"));
        }
        if self.window == 0 {
            return Err(invalid("window must be positive"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid("inner_tol must be positive"));
        }
        match &self.schedule {
            ScheduleSpec::Constant { mu: Some(mu) } if !(*mu > 0.0 && mu.is_finite()) => {
                return Err(invalid(format!("constant stepsize must be positive, got {mu}")));
            }
            ScheduleSpec::Geometric { mu0, mu0_times_m, rho } => {
                check_rho(*rho)?;
                match (mu0, mu0_times_m) {
                    (Some(v), None) | (None, Some(v)) if *v > 0.0 && v.is_finite() => {}
                    (Some(_), Some(_)) => return Err(invalid("give either mu0 or mu0_times_m, not both")),
                    (None, None) => return Err(invalid("geometric schedule needs mu0 or mu0_times_m")),
                    _ => return Err(invalid("initial stepsize must be positive")),
                }
            }
            ScheduleSpec::GeometricAuto { rho: Some(rho), .. } => check_rho(*rho)?,
            _ => {}
        }
        if self.metrics.moreau && !(self.metrics.tau_hat_factor > 2.0) {
            return Err(invalid("tau_hat_factor must exceed 2"));
        }
        let (rho, mu) = self.grid.grids();
        if rho.is_empty() || mu.is_empty() {
            return Err(invalid("grids must be nonempty"));
        }
        for r in rho {
            check_rho(r)?;
        }
        if mu.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("grid stepsizes must be positive"));
        }
        if self.solver.is_stochastic() != self.order().is_stochastic() {
            return Err(invalid(format!("order {:?} does not fit solver {}", self.order(), self.solver)));
        }
        Ok(())
    }

    pub fn order(&self) -> OrderPolicy {
        self.order.unwrap_or_else(|| self.solver.default_order(self.order_seed))
    }

    pub fn grid_settings(&self) -> GridSettings {
        GridSettings {
            threshold: self.threshold,
            window: self.window,
            early_stop: self.grid.early_stop,
            inner_tol: self.inner_tol,
            votes: self.grid.votes,
            order_seed: self.order_seed,
            gd_epoch_scale: self.grid.gd_epoch_scale,
        }
    }

    /// Concrete stepsize schedule for `problem`.
    pub fn build_schedule<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
        &self,
        problem: &P,
    ) -> Result<StepSchedule<T>> {
        let m = problem.num_components();
        match &self.schedule {
            ScheduleSpec::Constant { mu: None } => Ok(constant_schedule(m, self.epochs)),
            ScheduleSpec::Constant { mu: Some(mu) } => StepSchedule::constant(T::lit(*mu)),
            ScheduleSpec::Geometric { mu0, mu0_times_m, rho } => {
                let mu0 = mu0.unwrap_or_else(|| mu0_times_m.unwrap_or(1.0) / m as f64);
                StepSchedule::geometric(T::lit(mu0), T::lit(*rho))
            }
            ScheduleSpec::GeometricAuto {
                alpha,
                lipschitz,
                mu0,
                rho,
            } => {
                let (alpha, radius, seed) = match *alpha {
                    AlphaSource::Supplied { value } => (value, None, 0),
                    AlphaSource::Calibrated { probes, radius, seed } => {
                        let est = crate::harness::calibrate_alpha(problem, probes, seed, radius)?;
                        if !est.sharp {
                            log::warn!("calibrated alpha = {:e} looks non-sharp", est.alpha);
                        }
                        (est.alpha, Some(radius), seed)
                    }
                };
                let lip = match lipschitz {
                    Some(l) => *l,
                    None => crate::harness::calibrate_lipschitz(problem, 200, seed, radius.unwrap_or(1.0))?,
                };
                geometric_schedule(
                    T::lit(alpha),
                    problem.tau(),
                    T::lit(lip.max(alpha)),
                    m,
                    mu0.map(T::lit),
                    rho.map(T::lit),
                )
            }
        }
    }

    /// Single run of the configured solver from the shared starting point.
    pub fn run_on<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
        &self,
        problem: &P,
        keep_iterates: bool,
    ) -> Result<RunTrace<T>> {
        let schedule = self.build_schedule(problem)?;
        let x0: Vec<T> = initial_point(problem.dim(), self.x0_seed);
        let dist = |x: &[T]| problem.dist_to_solutions(x);
        let moreau = self.metrics.moreau.then(|| MoreauSettings {
            tau_hat: T::lit(self.metrics.tau_hat_factor) * problem.tau(),
            tol: T::lit(self.metrics.moreau_tol),
        });
        let opts = RunOptions {
            distance: self.metrics.dist.then_some(&dist as _),
            function_value: self.metrics.fval,
            moreau,
            inner_tol: T::lit(self.inner_tol),
            keep_iterates,
            ..RunOptions::default()
        };
        run(self.solver, problem, &schedule, &self.order(), &x0, self.epochs, &opts)
    }

    /// Success map of the configured solver over the configured grids.
    pub fn grid_on<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(&self, problem: &P) -> Result<SuccessMap> {
        let (rho, mu) = self.grid.grids();
        grid_search(self.solver, problem, &rho, &mu, self.epochs, self.x0_seed, &self.grid_settings())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}
