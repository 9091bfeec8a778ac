use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mixfbm::experiment::report::SoftwareInfo;
use mixfbm::experiment::{replication_seed, run_convergence_study, run_experiment, Estimator, ExperimentConfig, RunInfo};
use mixfbm::io::{read_trajectory_batch, write_trajectory_batch};
use mixfbm::mle::{estimate_fixed_effect, estimate_joint, score, total_log_likelihood, EffectEstimate};
use mixfbm::sde::{draw_effects, simulate_batch};
use mixfbm::statistics::stats_batch;
use mixfbm::{DiffusionSpec, DriftModel, Error, Result, StatsBatch, ThetaParams};

#[derive(Parser, Debug)]
#[command(name = "mixfbm", version, about = "Random-effect SDEs driven by fractional Brownian motion", allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    #[arg(long, global = true)]
    hurst: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    x0: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    sigma0_sq: Option<f64>,
    /// Trajectories per replication.
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// `constant:<c>` or `affine:<intercept>,<slope>`.
    #[arg(long, global = true, value_parser = parse_drift)]
    drift: Option<DriftModel>,
    /// Constant diffusion coefficient.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, value_parser = parse_estimator)]
    estimator: Option<Estimator>,
    #[arg(long, global = true)]
    blowup_guard: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one batch and write it as `batch.sdeb`.
    Simulate {
        /// Also write one `trajectory_<i>.csv` per path.
        #[arg(long)]
        csv: bool,
    },
    /// Reduce a trajectory batch to sufficient statistics (CSV and JSON).
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate (μ, σ₀²) from a statistics file (`.csv` or `.json`).
    Estimate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run all replications and write the report.
    Experiment,
    /// Refinement study of the sufficient statistics.
    Converge,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn parse_drift(s: &str) -> std::result::Result<DriftModel, String> {
    let (kind, args) = s.split_once(':').ok_or("expected <kind>:<parameters>")?;
    let nums = args
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|e| format!("{a}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match (kind, nums.as_slice()) {
        ("constant", [c]) => Ok(DriftModel::constant(*c)),
        ("affine", [a, b]) => Ok(DriftModel::affine(*a, *b)),
        _ => Err("expected constant:<c> or affine:<intercept>,<slope>".into()),
    }
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    match s {
        "joint" => Ok(Estimator::Joint),
        "fixed_effect" | "fixed-effect" => Ok(Estimator::FixedEffect),
        _ => Err("expected joint or fixed_effect".into()),
    }
}

impl GlobalArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(seed => run.master_seed);
        set!(out_dir => output.dir);
        set!(dt => grid.dt);
        set!(horizon => grid.horizon);
        set!(replications => run.replications);
        set!(hurst => model.hurst);
        set!(x0 => model.x0);
        set!(mu => population.mu);
        set!(sigma0_sq => population.sigma0_sq);
        set!(trajectories => population.trajectories);
        set!(drift => model.drift);
        set!(estimator => run.estimator);
        set!(blowup_guard => run.blowup_guard);
        if let Some(s) = self.sigma {
            c.model.sigma = DiffusionSpec::constant(s).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(c)
    }
}

fn threads_in_use() -> usize {
    rayon::current_num_threads()
}

fn write_run_info(dir: &Path, command: &str, started: Instant) -> Result<()> {
    RunInfo {
        command: command.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        threads: threads_in_use(),
        software: SoftwareInfo::current(),
    }
    .write_to(dir)?;
    Ok(())
}

fn estimate(batch: &StatsBatch, config: &ExperimentConfig) -> Result<EffectEstimate> {
    match config.run.estimator {
        Estimator::Joint => estimate_joint(batch, &config.solver),
        Estimator::FixedEffect => {
            let mu = estimate_fixed_effect(batch)?;
            let theta = ThetaParams::new(mu, 0.0)?;
            let sc = score(batch, theta)?;
            Ok(EffectEstimate {
                theta_hat: theta,
                log_likelihood: total_log_likelihood(batch, theta)?,
                iterations: 0,
                boundary: false,
                converged: true,
                gradient_norm: sc.d_mu.abs(),
                score: sc,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.global.config()?;
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let out = config.output.dir.clone();
    let started = Instant::now();
    match cli.command {
        Command::PrintConfig => {
            config.validate()?;
            print!("{}", config.to_toml_string()?);
        }
        Command::Simulate { csv } => {
            config.validate()?;
            let seed = replication_seed(config.run.master_seed, 0);
            let effects = draw_effects(
                config.population.trajectories,
                config.population.mu,
                config.population.sigma0_sq,
                seed,
            )?;
            let batch = simulate_batch(
                &effects,
                &config.model.drift,
                &config.model.sigma,
                config.time_grid()?,
                config.hurst()?,
                config.model.x0,
                seed,
                config.simulation_settings(),
            )?;
            fs::create_dir_all(&out)?;
            let path = out.join("batch.sdeb");
            write_trajectory_batch(BufWriter::new(File::create(&path)?), &batch)?;
            if csv {
                for t in &batch.trajectories {
                    t.write_csv(BufWriter::new(File::create(out.join(format!("trajectory_{}.csv", t.id())))?))?;
                }
            }
            println!("{}", path.display());
        }
        Command::Stats { input } => {
            let batch = read_trajectory_batch(BufReader::new(File::open(&input)?))?;
            let observations: Vec<_> = batch.trajectories.iter().map(|t| t.observation()).collect();
            let stats = stats_batch(batch.hurst, &observations, &batch.drift, &batch.sigma)?;
            fs::create_dir_all(&out)?;
            stats.write_csv(BufWriter::new(File::create(out.join("stats.csv"))?))?;
            stats.write_json(BufWriter::new(File::create(out.join("stats.json"))?))?;
            println!("{}", out.join("stats.csv").display());
        }
        Command::Estimate { input } => {
            let reader = BufReader::new(File::open(&input)?);
            let batch = match input.extension().and_then(|e| e.to_str()) {
                Some("json") => StatsBatch::read_json(reader)?,
                Some("csv") => StatsBatch::read_csv(reader)?,
                _ => return Err(Error::Config(format!("{}: expected a .csv or .json file", input.display()))),
            };
            let est = estimate(&batch, &config)?;
            let report = est.to_report(batch.provenance.clone());
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(File::create(out.join("estimate.json"))?);
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Experiment => {
            let report = run_experiment(&config)?;
            report.write_to(&out)?;
            write_run_info(&out, "experiment", started)?;
            let s = &report.summary;
            println!(
                "mu_hat: mean {:.4} sd {:.4} | sigma0_sq_hat: mean {:.4} sd {:.4} | {} completed, {} failed",
                s.mu.mean, s.mu.sd, s.sigma0_sq.mean, s.sigma0_sq.sd, s.completed, s.failed
            );
        }
        Command::Converge => {
            let report = run_convergence_study(&config)?;
            report.write_to(&out)?;
            write_run_info(&out, "converge", started)?;
            println!(
                "median slopes: U {:?}, V {:?}",
                report.median_u_slope, report.median_v_slope
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
