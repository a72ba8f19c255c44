//! `vnfchain` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 unstable core queue.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use vnfchain::optimizer::{
    optimal_alpha_surface, performance_region, sweep_alpha, Objective, OptimizeError, SURFACE_STEP,
};
use vnfchain::{analyze, evaluate, replicate, simulate, AnalysisError, SimConfig, SystemParams};

use report::{CsvOut, Row};

#[derive(Debug, Parser)]
#[command(name = "vnfchain", version, about = "Analyze, simulate and optimize a two-VNF edge/core service chain")]
struct Cli {
    /// Worker threads for parallel sweeps and replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytical metrics for one parameter set.
    Analyze {
        #[command(flatten)]
        params: ParamArgs,
        /// Write a one-row CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slot-level simulation, optionally replicated.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Independent replications (streams 0..runs of the seed).
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytical and simulated metrics side by side for several alphas.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated routing probabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force search for the best routing probability.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Drop)]
        objective: ObjectiveArg,
        /// Weight on the drop rate for `--objective weighted`.
        #[arg(long, default_value_t = 0.5)]
        weight: f64,
        /// Optimize alpha on every (mu1, mu2) cell instead of a single sweep.
        #[arg(long)]
        surface: bool,
        /// Grid step of the (mu1, mu2) surface.
        #[arg(long, default_value_t = SURFACE_STEP)]
        mu_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Throughput, delay and drop rate over a (mu, M) grid.
    Region {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated service probabilities applied to Q1..Q5.
        #[arg(long, value_delimiter = ',', required = true)]
        mus: Vec<f64>,
        /// Comma-separated buffer sizes applied to Q1..Q5.
        #[arg(long, value_delimiter = ',', required = true)]
        buffers: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// TOML parameter file.
    #[arg(long)]
    config: PathBuf,
    /// Override the routing probability.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the arrival probability.
    #[arg(long)]
    p: Option<f64>,
    /// Override any config key, e.g. `--set mu6=0.8 --set M1=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ParamArgs {
    fn resolve(&self) -> anyhow::Result<SystemParams> {
        let mut params = SystemParams::load(&self.config)?;
        for kv in &self.overrides {
            let (key, value) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            params.set(key.trim(), value).map_err(|e| anyhow!(e))?;
        }
        if let Some(alpha) = self.alpha {
            params.alpha = alpha;
        }
        if let Some(p) = self.p {
            params.p = p;
        }
        params.validate().context("invalid parameters after overrides")
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 10_000)]
    warmup: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fold Q6 occupancies at or above this value into one histogram bin.
    #[arg(long)]
    q6_cap: Option<usize>,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig { slots: self.slots, warmup: self.warmup, seed: self.seed, q6_cap: self.q6_cap }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Drop,
    Tasks,
    Weighted,
}

/// Failure categories mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Unstable { lambda6: f64, mu6: f64 },
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Unstable { lambda6, mu6 }) => {
            eprintln!("unstable: lambda6 = {lambda6} >= mu6 = {mu6}; Q6 has no stationary distribution");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(anyhow!("--jobs must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| anyhow!(e))?;
    }
    match cli.command {
        Command::Analyze { params, out } => cmd_analyze(&params.resolve()?, out),
        Command::Simulate { params, sim, runs, out } => cmd_simulate(&params.resolve()?, &sim.config(), runs, out),
        Command::Compare { params, sim, alphas, out } => cmd_compare(&params.resolve()?, &sim.config(), &alphas, out),
        Command::Sweep { params, step, objective, weight, surface, mu_step, out } => {
            let objective = match objective {
                ObjectiveArg::Drop => Objective::Drop,
                ObjectiveArg::Tasks => Objective::Tasks,
                ObjectiveArg::Weighted => Objective::Weighted(weight),
            };
            let params = params.resolve()?;
            if surface {
                cmd_surface(&params, mu_step, step, objective, out)
            } else {
                cmd_sweep(&params, step, objective, out)
            }
        }
        Command::Region { params, mus, buffers, out } => cmd_region(&params.resolve()?, &mus, &buffers, out),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_analyze(params: &SystemParams, out: Option<PathBuf>) -> Result<(), Failure> {
    let analysis = evaluate(params).map_err(|e| anyhow!(e))?;
    print!("{}", report::metrics_block(params, &analysis.metrics));
    let lambda6 = analysis.q6_inputs.lambda6();
    println!("lambda6 = {lambda6}, mu6 = {}", params.mu[5]);
    if let Some(path) = out {
        let mut csv = CsvOut::file(&path)?;
        let mut row = Row::with_params(params);
        row.push("stable", analysis.is_stable().to_string());
        row.push("lambda6", lambda6.to_string());
        report::push_metrics(&mut row, &analysis.metrics, "");
        csv.write(&row)?;
        csv.finish()?;
    }
    if analysis.is_stable() {
        Ok(())
    } else {
        Err(Failure::Unstable { lambda6, mu6: params.mu[5] })
    }
}

fn push_sim_meta(row: &mut Row, cfg: &SimConfig, runs: usize) {
    row.push("seed", cfg.seed.to_string());
    row.push("rng", vnfchain::RNG_ID.to_string());
    row.push("slots", cfg.slots.to_string());
    row.push("warmup", cfg.warmup.to_string());
    row.push("runs", runs.to_string());
}

fn cmd_simulate(params: &SystemParams, cfg: &SimConfig, runs: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    if runs == 0 {
        return Err(anyhow!("--runs must be at least 1").into());
    }
    let mut row = Row::with_params(params);
    push_sim_meta(&mut row, cfg, runs);
    println!("rng {} seed {} slots {} warmup {} runs {runs}", vnfchain::RNG_ID, cfg.seed, cfg.slots, cfg.warmup);
    if runs == 1 {
        let result = simulate(params, cfg).map_err(|e| anyhow!(e))?;
        print!("{}", report::metrics_block(params, &result.metrics));
        row.push("flow_residual", result.flow.residual().to_string());
        for (name, value) in report::metric_columns(&result.metrics) {
            row.push(&format!("{name}_mean"), opt(value));
            row.push(&format!("{name}_std"), String::new());
            row.push(&format!("{name}_ci95"), String::new());
        }
    } else {
        let rep = replicate(params, cfg, runs).map_err(|e| anyhow!(e))?;
        let residual: i128 = rep.runs.iter().map(|r| r.flow.residual().abs()).sum();
        row.push("flow_residual", residual.to_string());
        let estimates = report::replication_columns(&rep);
        println!("{:<16} {:>14} {:>14} {:>14}", "metric", "mean", "std", "ci95");
        for (name, est) in &estimates {
            match est {
                Some(e) => println!("{name:<16} {:>14.6} {:>14.6} {:>14.6}", e.mean, e.std_dev, e.half_width),
                None => println!("{name:<16} {:>14}", "n/a"),
            }
        }
        for (name, est) in estimates {
            row.push(&format!("{name}_mean"), opt(est.map(|e| e.mean)));
            row.push(&format!("{name}_std"), opt(est.map(|e| e.std_dev)));
            row.push(&format!("{name}_ci95"), opt(est.map(|e| e.half_width)));
        }
    }
    if let Some(path) = out {
        let mut csv = CsvOut::file(&path)?;
        csv.write(&row)?;
        csv.finish()?;
    }
    Ok(())
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (a - b).abs() / b.abs()
    }
}

fn cmd_compare(params: &SystemParams, cfg: &SimConfig, alphas: &[f64], out: Option<PathBuf>) -> Result<(), Failure> {
    if alphas.is_empty() {
        return Err(anyhow!("--alphas must list at least one value").into());
    }
    let results = alphas
        .par_iter()
        .map(|&alpha| {
            let p = params.with_alpha(alpha);
            let ana = analyze(&p);
            let sim = simulate(&p, cfg);
            (p, ana, sim)
        })
        .collect::<Vec<_>>();
    let mut csv = CsvOut::new(out.as_deref())?;
    for (p, ana, sim) in results {
        let ana = match ana {
            Ok(m) => m,
            Err(AnalysisError::Unstable { lambda6, mu6, .. }) => {
                eprintln!("alpha = {}: analytical Q6 is unstable", p.alpha);
                return Err(Failure::Unstable { lambda6, mu6 });
            }
            Err(e) => return Err(anyhow!(e).into()),
        };
        let sim = sim.map_err(|e| anyhow!(e))?.metrics;
        let (qa, qs) = (ana.mean_total.expect("stable"), sim.mean_total.expect("simulated"));
        let mut row = Row::with_params(&p);
        push_sim_meta(&mut row, cfg, 1);
        row.push("P_D_ana", ana.drop_total.to_string());
        row.push("P_D_sim", sim.drop_total.to_string());
        row.push("Qbar_ana", qa.to_string());
        row.push("Qbar_sim", qs.to_string());
        row.push("P_D_abs_err", (ana.drop_total - sim.drop_total).abs().to_string());
        row.push("P_D_rel_err", rel_err(ana.drop_total, sim.drop_total).to_string());
        row.push("Qbar_abs_err", (qa - qs).abs().to_string());
        row.push("Qbar_rel_err", rel_err(qa, qs).to_string());
        csv.write(&row)?;
    }
    csv.finish()?;
    Ok(())
}

fn optimize_failure(e: OptimizeError, params: &SystemParams) -> Failure {
    match e {
        OptimizeError::AllUnstable => {
            let lambda6 = evaluate(params).map(|a| a.q6_inputs.lambda6()).unwrap_or(f64::NAN);
            Failure::Unstable { lambda6, mu6: params.mu[5] }
        }
        other => Failure::Usage(anyhow!(other)),
    }
}

fn cmd_sweep(params: &SystemParams, step: f64, objective: Objective, out: Option<PathBuf>) -> Result<(), Failure> {
    let sweep = sweep_alpha(params, step, objective).map_err(|e| optimize_failure(e, params))?;
    let weight = match objective {
        Objective::Weighted(w) => w.to_string(),
        _ => String::new(),
    };
    let mut csv = CsvOut::new(out.as_deref())?;
    for (i, point) in sweep.points.iter().enumerate() {
        let mut row = Row::with_params(&params.with_alpha(point.alpha));
        row.push("objective", objective.name().to_string());
        row.push("weight", weight.clone());
        row.push("stable", point.stable.to_string());
        row.push("objective_value", opt(point.objective));
        row.push("best", (i == sweep.best).to_string());
        report::push_metrics(&mut row, &point.metrics, "");
        csv.write(&row)?;
    }
    csv.finish()?;
    eprintln!(
        "best alpha = {} ({} = {}); {} of {} points excluded as unstable",
        sweep.best_alpha(),
        objective.name(),
        sweep.best_value(),
        sweep.excluded().count(),
        sweep.points.len()
    );
    Ok(())
}

fn cmd_surface(
    params: &SystemParams,
    mu_step: f64,
    step: f64,
    objective: Objective,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let surface = optimal_alpha_surface(params, mu_step, step, objective).map_err(|e| optimize_failure(e, params))?;
    let mut csv = CsvOut::new(out.as_deref())?;
    for point in &surface {
        let mut cell = *params;
        cell.mu[0] = point.mu1;
        cell.mu[1] = point.mu2;
        let mut row = Row::with_params(&cell.with_alpha(point.best_alpha));
        row.push("objective", objective.name().to_string());
        row.push("objective_value", point.best_value.to_string());
        csv.write(&row)?;
    }
    csv.finish()?;
    Ok(())
}

fn cmd_region(params: &SystemParams, mus: &[f64], buffers: &[usize], out: Option<PathBuf>) -> Result<(), Failure> {
    if mus.is_empty() || buffers.is_empty() {
        return Err(anyhow!("--mus and --buffers must both be non-empty").into());
    }
    let region = performance_region(mus, buffers, params).map_err(|e| anyhow!(e))?;
    let mut csv = CsvOut::new(out.as_deref())?;
    for cell in &region {
        let p = vnfchain::optimizer::region_params(params, cell.mu, cell.buffer);
        let mut row = Row::with_params(&p);
        row.push("stable", cell.stable.to_string());
        row.push("throughput", cell.throughput.to_string());
        row.push("delay", opt(cell.delay));
        row.push("drop_total", cell.drop_total.to_string());
        csv.write(&row)?;
    }
    csv.finish()?;
    let unstable = region.iter().filter(|c| !c.stable).count();
    if unstable > 0 {
        eprintln!("{unstable} of {} cells have an unstable Q6 (delay left empty)", region.len());
    }
    Ok(())
}
