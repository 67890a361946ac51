use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use incopt::config::ExperimentConfig;
use incopt::harness::{calibrate_alpha, calibrate_lipschitz, fit_linear_rate};
use incopt::instances::{Instance, InstanceKind, InstanceSpec};
use incopt::io::{self, MapFormat, Provenance};
use incopt::stationarity::{moreau_sweep, running_min};

#[derive(Parser, Debug)]
#[command(name = "incopt", version, about = "Incremental methods for weakly convex finite sums")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the instance seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "INCOPT_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for grid searches and stationarity sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated instance to JSON.
    Generate {
        /// Instance family when no config is given.
        #[arg(long)]
        kind: Option<InstanceKind>,
    },
    /// Run one solver and write its trace.
    Run {
        /// Use a saved instance instead of generating one.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Success map over the (rho, mu0) grid.
    Grid {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Moreau stationarity measure at every epoch of a run.
    Moreau {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Render stored results as SVG.
    Plot {
        /// Success-map CSV to draw as a heatmap.
        #[arg(long, conflicts_with = "trace")]
        map: Option<PathBuf>,
        /// Trace CSVs to draw as convergence curves.
        #[arg(long)]
        trace: Vec<PathBuf>,
        /// Trace column to plot.
        #[arg(long, default_value = "dist")]
        column: String,
        /// Output file (defaults to the input name with an .svg extension).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate the sharpness and Lipschitz constants around the solution set.
    Calibrate {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        probe_seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.global.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("incopt: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Generate { kind } => generate(g, *kind),
        Command::Run { instance } => run(g, instance.as_deref()),
        Command::Grid { instance } => grid(g, instance.as_deref()),
        Command::Moreau { instance } => moreau(g, instance.as_deref()),
        Command::Plot {
            map,
            trace,
            column,
            output,
        } => plot(map.as_deref(), trace, column, output.as_deref()),
        Command::Calibrate {
            instance,
            probes,
            radius,
            probe_seed,
        } => calibrate(g, instance.as_deref(), *probes, *radius, *probe_seed),
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let path = g.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    if let Some(seed) = g.seed {
        cfg.instance = cfg.instance.with_seed(seed);
    }
    Ok(cfg)
}

fn out_dir(g: &Global, cfg: Option<&ExperimentConfig>) -> PathBuf {
    g.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn stem(cfg: &ExperimentConfig) -> String {
    cfg.output
        .name
        .clone()
        .unwrap_or_else(|| format!("{}_{}", cfg.instance.kind(), cfg.solver))
}

fn instance_for(cfg: &ExperimentConfig, file: Option<&Path>) -> Result<Instance<f64>> {
    match file {
        Some(path) => {
            let inst: Instance<f64> =
                io::load_instance(path).with_context(|| format!("loading instance {}", path.display()))?;
            if inst.kind() != cfg.instance.kind() {
                bail!(
                    "instance file {} holds a {} instance but the config describes {}",
                    path.display(),
                    inst.kind(),
                    cfg.instance.kind()
                );
            }
            Ok(inst)
        }
        None => Ok(cfg.instance.generate()?),
    }
}

fn provenance(command: &str, cfg: &ExperimentConfig, input: Option<&Path>) -> Result<Provenance> {
    let mut prov = Provenance::new(command).with_config(cfg)?;
    if let Some(p) = input {
        prov.inputs.push(p.display().to_string());
    }
    Ok(prov)
}

fn generate(g: &Global, kind: Option<InstanceKind>) -> Result<()> {
    let (spec, prov, name, dir) = match (&g.config, kind) {
        (Some(_), _) => {
            let cfg = load_config(g)?;
            let name = format!("{}_instance", stem(&cfg));
            (cfg.instance, provenance("generate", &cfg, None)?, name, out_dir(g, Some(&cfg)))
        }
        (None, Some(kind)) => {
            let spec = InstanceSpec::defaults(kind, g.seed.unwrap_or(0));
            let mut prov = Provenance::new("generate");
            prov.instance_seed = Some(spec.seed());
            (spec, prov, format!("{kind}_seed{}", spec.seed()), out_dir(g, None))
        }
        (None, None) => bail!("generate needs --config or --kind"),
    };
    let instance: Instance<f64> = spec.generate()?;
    let path = dir.join(format!("{name}.json"));
    io::save_instance(&instance, &path)?;
    io::write_meta(&path, &prov)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(g: &Global, instance: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let problem = instance_for(&cfg, instance)?;
    let trace = cfg.run_on(&problem, false)?;
    let path = out_dir(g, Some(&cfg)).join(format!("{}_trace.csv", stem(&cfg)));
    io::emit_trace_csv(&trace, &path)?;
    io::write_meta(&path, &provenance("run", &cfg, instance)?)?;
    let last = trace.last_dist().map_or("n/a".to_string(), |d| format!("{d:.3e}"));
    println!(
        "{} on {}: {:?} after {} epochs, final distance {last}",
        cfg.solver,
        cfg.instance.kind(),
        trace.status,
        trace.records.len()
    );
    if cfg.metrics.dist && trace.records.len() >= cfg.window {
        let ok = incopt::harness::success_metric(&trace, cfg.threshold, cfg.window)?;
        println!("success (mean of last {} distances <= {:e}): {ok}", cfg.window, cfg.threshold);
        if let Ok(fit) = fit_linear_rate(&trace, 0) {
            println!("log10 rate {:.4} (R^2 {:.3})", fit.slope_log10, fit.r_squared);
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn grid(g: &Global, instance: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let problem = instance_for(&cfg, instance)?;
    let map = cfg.grid_on(&problem)?;
    let dir = out_dir(g, Some(&cfg));
    let prov = provenance("grid", &cfg, instance)?;
    let csv = dir.join(format!("{}_map.csv", stem(&cfg)));
    let svg = dir.join(format!("{}_map.svg", stem(&cfg)));
    io::emit_map(&map, &csv, MapFormat::Csv)?;
    io::write_meta(&csv, &prov)?;
    let rows = io::map_rows(&map);
    io::write_text(
        &svg,
        &io::heatmap_svg(&rows, &format!("{} success map", map.kind), Some(&prov.to_json()?))?,
    )?;
    io::write_meta(&svg, &prov)?;
    let wins = rows.iter().filter(|r| r.success).count();
    println!("{wins}/{} cells succeeded", rows.len());
    match map.smallest_successful_rho() {
        Some(rho) => println!("smallest successful rho: {rho}"),
        None => println!("no successful cell"),
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn moreau(g: &Global, instance: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(g)?;
    let problem = instance_for(&cfg, instance)?;
    let tau_hat = cfg.metrics.tau_hat_factor * incopt::instances::estimate_tau(&problem);
    if !(cfg.metrics.tau_hat_factor > 2.0) {
        bail!("tau_hat_factor must exceed 2");
    }
    // The measure is filled in from the stored iterates, in parallel.
    cfg.metrics.moreau = false;
    let mut trace = cfg.run_on(&problem, true)?;
    let estimates = moreau_sweep(&problem, &trace.iterates[1..], tau_hat, cfg.metrics.moreau_tol)?;
    for (rec, est) in trace.records.iter_mut().zip(&estimates) {
        rec.moreau_grad_norm = Some(est.grad_norm);
    }
    cfg.metrics.moreau = true;
    let path = out_dir(g, Some(&cfg)).join(format!("{}_moreau.csv", stem(&cfg)));
    io::emit_trace_csv(&trace, &path)?;
    io::write_meta(&path, &provenance("moreau", &cfg, instance)?)?;
    let norms: Vec<f64> = estimates.iter().map(|e| e.grad_norm).collect();
    if let Some(best) = running_min(&norms).last() {
        println!("running minimum of the Moreau gradient norm (tau_hat = {tau_hat:.4e}): {best:.6e}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn plot(map: Option<&Path>, traces: &[PathBuf], column: &str, output: Option<&Path>) -> Result<()> {
    let (svg, default_out) = if let Some(path) = map {
        let rows = io::read_map_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let meta = io::read_meta(path).ok().map(|p| p.to_json()).transpose()?;
        let title = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (io::heatmap_svg(&rows, &title, meta.as_deref())?, path.with_extension("svg"))
    } else if !traces.is_empty() {
        let mut series = Vec::with_capacity(traces.len());
        for path in traces {
            let rows = io::read_trace_csv(path).with_context(|| format!("reading {}", path.display()))?;
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            series.push(io::trace_series(&rows, column, &label)?);
        }
        let svg: String = io::convergence_svg(&series, column, None)?;
        let out = traces[0].with_file_name(format!(
            "{}_{column}.svg",
            traces[0].file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        ));
        (svg, out)
    } else {
        bail!("plot needs --map or at least one --trace");
    };
    let out = output.map(Path::to_path_buf).unwrap_or(default_out);
    io::write_text(&out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn calibrate(g: &Global, instance: Option<&Path>, probes: usize, radius: f64, probe_seed: u64) -> Result<()> {
    let cfg = load_config(g)?;
    let problem = instance_for(&cfg, instance)?;
    let alpha = calibrate_alpha(&problem, probes, probe_seed, radius)?;
    let lip = calibrate_lipschitz(&problem, probes, probe_seed, radius)?;
    let tau = incopt::instances::estimate_tau(&problem);
    println!("alpha_hat = {:.6e} (sharp: {})", alpha.alpha, alpha.sharp);
    println!("L_hat     = {lip:.6e}");
    println!("tau       = {tau:.6e}");
    if alpha.alpha > lip {
        log::warn!("alpha_hat exceeds L_hat; the probe radius may be too large");
    }
    let report = serde_json::json!({
        "alpha": alpha,
        "lipschitz": lip,
        "tau": tau,
    });
    let path = out_dir(g, Some(&cfg)).join(format!("{}_calibration.json", stem(&cfg)));
    io::write_text(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    io::write_meta(&path, &provenance("calibrate", &cfg, instance)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
