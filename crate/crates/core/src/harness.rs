//! Experiment harness: success maps over `(ρ, μ0)` grids, linear-rate fits,
//! baseline comparisons and empirical sharpness calibration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instances::SolutionSet;
use crate::problem::{estimate_lipschitz, FiniteSum};
use crate::rng::{streams, SeedStream};
use crate::solvers::{run, EarlyStop, OrderPolicy, RunOptions, RunStatus, RunTrace, SolverKind, StepSchedule};
use crate::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_WINDOW: usize = 5;
/// Distances below this are treated as the floating-point floor by
/// [`fit_linear_rate`].
pub const RATE_FLOOR: f64 = 1e-12;

/// `true` iff the mean of the last `window` logged distances is at most
/// `threshold`.
pub fn success_metric<T: Scalar>(trace: &RunTrace<T>, threshold: f64, window: usize) -> Result<bool> {
    let d = trace.distances();
    if window == 0 {
        return Err(invalid("window must be positive"));
    }
    if d.len() < window {
        return Err(Error::TooFewRecords {
            need: window,
            have: d.len(),
        });
    }
    Ok(tail_mean(&d, window) <= threshold)
}

fn tail_mean<T: Scalar>(d: &[T], window: usize) -> f64 {
    let w = window.min(d.len());
    d[d.len() - w..].iter().map(|v| v.to_f64_lossy()).sum::<f64>() / w as f64
}

/// Standard Gaussian starting point shared by every cell of a comparison.
pub fn initial_point<T: Scalar>(dim: usize, seed: u64) -> Vec<T> {
    SeedStream::new(seed, streams::INIT).gaussian_vec(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub threshold: f64,
    pub window: usize,
    /// Stop runs whose outcome is already certified (see [`EarlyStop`]).
    pub early_stop: bool,
    pub inner_tol: f64,
    /// Seeds voted over for stochastic solvers.
    pub votes: usize,
    pub order_seed: u64,
    /// Multiply GD stepsizes by `m`, so that one GD epoch may travel as far
    /// as one incremental pass.
    pub gd_epoch_scale: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            window: DEFAULT_WINDOW,
            early_stop: true,
            inner_tol: 1e-7,
            votes: 5,
            order_seed: 0,
            gd_epoch_scale: true,
        }
    }
}

/// `count` values evenly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Default grids: 15 decay factors on `[0.65, 0.99]` and 15 initial
/// stepsizes on `[1, 210]` in units of `1/m`.
pub fn default_grids() -> (Vec<f64>, Vec<f64>) {
    (linspace(0.65, 0.99, 15), linspace(1.0, 210.0, 15))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub success: bool,
    /// Mean of the last `window` distances (fewer if the run stopped early);
    /// infinite for divergent or infeasible runs.
    pub final_dist: f64,
    pub status: RunStatus,
}

impl CellOutcome {
    fn failed() -> Self {
        Self {
            success: false,
            final_dist: f64::INFINITY,
            status: RunStatus::Diverged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessMap {
    pub kind: SolverKind,
    pub rho_grid: Vec<f64>,
    /// Initial stepsizes in units of `1/m`.
    pub mu0_grid: Vec<f64>,
    /// `cells[i][j]` is the outcome at `(rho_grid[i], mu0_grid[j])`.
    pub cells: Vec<Vec<bool>>,
    pub final_dist: Vec<Vec<f64>>,
    pub epochs: usize,
    pub threshold: f64,
}

impl SuccessMap {
    /// Smallest `ρ` with at least one successful cell.
    pub fn smallest_successful_rho(&self) -> Option<f64> {
        self.rho_grid
            .iter()
            .zip(&self.cells)
            .find(|(_, row)| row.iter().any(|&s| s))
            .map(|(&r, _)| r)
    }
}

fn sorted_nonempty(name: &str, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} grid has non-finite values")));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(g)
}

/// Runs one `(ρ, c)` cell with `μ0 = c/m` from `x0`. Stochastic solvers are
/// decided by majority over `settings.votes` order seeds.
#[allow(clippy::too_many_arguments)]
pub fn run_cell<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    kind: SolverKind,
    problem: &P,
    x0: &[T],
    rho: f64,
    mu0_times_m: f64,
    epochs: usize,
    settings: &GridSettings,
) -> Result<CellOutcome> {
    let m = problem.num_components();
    let mut mu0 = mu0_times_m / m as f64;
    if kind == SolverKind::Gd && settings.gd_epoch_scale {
        mu0 *= m as f64;
    }
    let schedule = StepSchedule::geometric(T::lit(mu0), T::lit(rho))?;
    let votes = if kind.is_stochastic() { settings.votes.max(1) } else { 1 };
    let need = votes / 2 + 1;
    let (mut wins, mut losses) = (0, 0);
    let mut dists = Vec::with_capacity(votes);
    let mut last_status = RunStatus::Completed;
    for v in 0..votes {
        let order = if kind.is_stochastic() {
            OrderPolicy::Iid {
                seed: settings.order_seed.wrapping_add(v as u64),
            }
        } else {
            OrderPolicy::Cyclic
        };
        let outcome = single_run(kind, problem, x0, &schedule, &order, epochs, settings)?;
        dists.push(outcome.final_dist);
        last_status = outcome.status;
        if outcome.success {
            wins += 1;
        } else {
            losses += 1;
        }
        if wins >= need || losses > votes - need {
            break;
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    Ok(CellOutcome {
        success: wins >= need,
        final_dist: dists[dists.len() / 2],
        status: last_status,
    })
}

fn single_run<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    kind: SolverKind,
    problem: &P,
    x0: &[T],
    schedule: &StepSchedule<T>,
    order: &OrderPolicy,
    epochs: usize,
    settings: &GridSettings,
) -> Result<CellOutcome> {
    let dist = |x: &[T]| problem.dist_to_solutions(x);
    let early_stop = match (settings.early_stop, problem.growth_bound()) {
        (true, Some(growth)) => Some(EarlyStop {
            threshold: T::lit(settings.threshold),
            window: settings.window,
            growth,
        }),
        _ => None,
    };
    let opts = RunOptions {
        distance: Some(&dist),
        inner_tol: T::lit(settings.inner_tol),
        early_stop,
        ..RunOptions::default()
    };
    let trace = match run(kind, problem, schedule, order, x0, epochs, &opts) {
        Ok(t) => t,
        Err(Error::StepTooLarge { .. }) => return Ok(CellOutcome::failed()),
        Err(Error::InnerSolverCap { iterations, residual }) => {
            log::warn!("{kind} cell abandoned: inner solver cap ({iterations} iterations, residual {residual:e})");
            return Ok(CellOutcome::failed());
        }
        Err(e) => return Err(e),
    };
    let d = trace.distances();
    let outcome = match trace.status {
        RunStatus::Diverged => CellOutcome::failed(),
        RunStatus::Converged | RunStatus::Stalled => CellOutcome {
            success: trace.status == RunStatus::Converged,
            final_dist: tail_mean(&d, settings.window),
            status: trace.status,
        },
        RunStatus::Completed => {
            let final_dist = tail_mean(&d, settings.window);
            CellOutcome {
                success: success_metric(&trace, settings.threshold, settings.window)?,
                final_dist,
                status: RunStatus::Completed,
            }
        }
    };
    Ok(outcome)
}

/// Success map over `rho_grid × mu0_grid` (the latter in units of `1/m`),
/// every cell started from the same Gaussian point. Cells run in parallel
/// on the current rayon pool; results do not depend on scheduling.
pub fn grid_search<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    kind: SolverKind,
    problem: &P,
    rho_grid: &[f64],
    mu0_grid: &[f64],
    epochs: usize,
    shared_x0_seed: u64,
    settings: &GridSettings,
) -> Result<SuccessMap> {
    let rho_grid = sorted_nonempty("rho", rho_grid)?;
    let mu0_grid = sorted_nonempty("mu0", mu0_grid)?;
    if epochs < settings.window {
        return Err(invalid(format!(
            "epochs ({epochs}) must be at least the window ({})",
            settings.window
        )));
    }
    let x0: Vec<T> = initial_point(problem.dim(), shared_x0_seed);
    let cells: Vec<(usize, usize)> = (0..rho_grid.len())
        .flat_map(|i| (0..mu0_grid.len()).map(move |j| (i, j)))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(i, j)| run_cell(kind, problem, &x0, rho_grid[i], mu0_grid[j], epochs, settings))
        .collect::<Result<_>>()?;
    let cols = mu0_grid.len();
    let mut success = vec![vec![false; cols]; rho_grid.len()];
    let mut final_dist = vec![vec![0.0; cols]; rho_grid.len()];
    for (&(i, j), o) in cells.iter().zip(&outcomes) {
        success[i][j] = o.success;
        final_dist[i][j] = o.final_dist;
    }
    Ok(SuccessMap {
        kind,
        rho_grid,
        mu0_grid,
        cells: success,
        final_dist,
        epochs,
        threshold: settings.threshold,
    })
}

/// First successful initial stepsize (in units of `1/m`) at a fixed `ρ`,
/// scanning `mu0_grid` in parallel chunks and in ascending order.
#[allow(clippy::too_many_arguments)]
pub fn tune_mu0<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    kind: SolverKind,
    problem: &P,
    x0: &[T],
    rho: f64,
    mu0_grid: &[f64],
    epochs: usize,
    settings: &GridSettings,
) -> Result<Option<f64>> {
    let grid = sorted_nonempty("mu0", mu0_grid)?;
    let chunk = rayon::current_num_threads().max(1);
    for block in grid.chunks(chunk) {
        let outcomes: Vec<CellOutcome> = block
            .par_iter()
            .map(|&c| run_cell(kind, problem, x0, rho, c, epochs, settings))
            .collect::<Result<_>>()?;
        if let Some(pos) = outcomes.iter().position(|o| o.success) {
            return Ok(Some(block[pos]));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope_log10: f64,
    pub r_squared: f64,
    /// Set when the fitted distances are constant and R² is undefined.
    pub degenerate: bool,
    pub points: usize,
}

/// Least-squares fit of `log10(dist)` against the epoch index over the
/// records after `skip`, stopping at the first distance below 1e-12.
pub fn fit_linear_rate<T: Scalar>(trace: &RunTrace<T>, skip: usize) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in trace.records.iter().skip(skip) {
        let Some(d) = r.dist else { continue };
        let d = d.to_f64_lossy();
        if !d.is_finite() {
            return Err(invalid("non-finite distance in trace"));
        }
        if d < RATE_FLOOR {
            if d < 0.0 {
                return Err(invalid("negative distance in trace"));
            }
            break;
        }
        xs.push(r.epoch as f64);
        ys.push(d.log10());
    }
    linear_fit(&xs, &ys)
}

/// Ordinary least squares `y ≈ a + b x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewRecords { need: 3, have: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let tiny = 1e-24 * (1.0 + my * my) * nf;
    if syy <= tiny {
        return Ok(RateFit {
            slope_log10: 0.0,
            r_squared: 0.0,
            degenerate: true,
            points: n,
        });
    }
    let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
    Ok(RateFit {
        slope_log10: slope,
        r_squared: r2,
        degenerate: false,
        points: n,
    })
}

/// One algorithm's scan settings for [`compare_baselines`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: SolverKind,
    pub rho_grid: Vec<f64>,
    pub mu0_grid: Vec<f64>,
    pub epochs: usize,
    /// Stop scanning above this `ρ` (the answer is then "none at or below").
    #[serde(default)]
    pub rho_ceiling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub kind: SolverKind,
    pub smallest_rho: Option<f64>,
    /// A successful initial stepsize (units of `1/m`) at `smallest_rho`.
    pub mu0_times_m: Option<f64>,
    /// Largest `ρ` examined.
    pub scanned_up_to: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub x0_seed: u64,
    pub results: Vec<BaselineResult>,
}

impl BaselineReport {
    pub fn get(&self, kind: SolverKind) -> Option<&BaselineResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

/// Smallest successful `ρ` per algorithm, scanning rows in ascending order
/// and stopping at the first row with a successful cell.
pub fn compare_baselines<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    problem: &P,
    configs: &[BaselineConfig],
    x0_seed: u64,
    settings: &GridSettings,
) -> Result<BaselineReport> {
    let x0: Vec<T> = initial_point(problem.dim(), x0_seed);
    let mut results = Vec::with_capacity(configs.len());
    for cfg in configs {
        let rows = sorted_nonempty("rho", &cfg.rho_grid)?;
        let mut found = None;
        let mut scanned = None;
        for &rho in &rows {
            if cfg.rho_ceiling.is_some_and(|c| rho > c) {
                break;
            }
            scanned = Some(rho);
            if let Some(c) = tune_mu0(cfg.kind, problem, &x0, rho, &cfg.mu0_grid, cfg.epochs, settings)? {
                found = Some((rho, c));
                break;
            }
            log::debug!("{}: no success at rho = {rho}", cfg.kind);
        }
        results.push(BaselineResult {
            kind: cfg.kind,
            smallest_rho: found.map(|f| f.0),
            mu0_times_m: found.map(|f| f.1),
            scanned_up_to: scanned,
        });
    }
    Ok(BaselineReport { x0_seed, results })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    /// `min (f(x) - f*) / dist(x, X)` over the probes.
    pub alpha: f64,
    /// False when the ratio collapses near the solution set (the inner half
    /// of the probes, by distance, has a minimum ratio below a tenth of the
    /// outer half's), which is the signature of non-sharp growth.
    pub sharp: bool,
    pub probes: usize,
    pub radius: f64,
}

/// Empirical sharpness constant from `probes` uniform points in the ball of
/// `radius` around the ground truth, with `f* = f(ground truth)`.
pub fn calibrate_alpha<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    problem: &P,
    probes: usize,
    seed: u64,
    radius: f64,
) -> Result<AlphaEstimate> {
    if probes < 2 {
        return Err(invalid("need at least two probes"));
    }
    if !(radius > 0.0) {
        return Err(invalid(format!("probe radius must be positive, got {radius}")));
    }
    let center = problem.ground_truth_point();
    let f_star = problem.full_value(&center).to_f64_lossy();
    let mut rng = SeedStream::new(seed, streams::SHARPNESS);
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(probes);
    let mut attempts = 0;
    while samples.len() < probes {
        attempts += 1;
        if attempts > 100 * probes {
            return Err(invalid("probes keep landing on the solution set"));
        }
        let x = rng.ball_point(&center, T::lit(radius));
        let d = problem.dist_to_solutions(&x)?.to_f64_lossy();
        if d <= 0.0 {
            continue;
        }
        let gap = problem.full_value(&x).to_f64_lossy() - f_star;
        samples.push((d, gap / d));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = samples.len() / 2;
    let min_of = |s: &[(f64, f64)]| s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let inner = min_of(&samples[..half]);
    let outer = min_of(&samples[half..]);
    let alpha = inner.min(outer);
    Ok(AlphaEstimate {
        alpha,
        sharp: alpha > 0.0 && inner >= 0.1 * outer,
        probes,
        radius,
    })
}

/// Empirical Lipschitz constant on the same ball used for [`calibrate_alpha`].
pub fn calibrate_lipschitz<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    problem: &P,
    samples: usize,
    seed: u64,
    radius: f64,
) -> Result<f64> {
    let center = problem.ground_truth_point();
    Ok(estimate_lipschitz(problem, &center, T::lit(radius), samples, seed)?.to_f64_lossy())
}

/// Whether `x0` lies in the local region `dist(x0, X) <= α / (2τ)`.
pub fn in_local_region<T: Scalar, P: FiniteSum<T> + SolutionSet<T> + ?Sized>(
    problem: &P,
    x0: &[T],
    alpha: f64,
) -> Result<bool> {
    let d = problem.dist_to_solutions(x0)?.to_f64_lossy();
    let tau = problem.tau().to_f64_lossy();
    Ok(d <= alpha / (2.0 * tau))
}
