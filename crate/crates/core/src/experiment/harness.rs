//! End-to-end runs: simulate, reduce, estimate, aggregate.
//!
//! Every random quantity is derived from the master seed and an index, and
//! every reduction runs in index order, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use super::config::{Estimator, ExperimentConfig};
use super::report::{
    ConvergenceReport, Exclusion, ExperimentReport, PathRate, ReplicationOutcome, ReplicationResult, SoftwareInfo,
    Summary,
};
use crate::error::{Error, Result};
use crate::fbm::FbmGenerator;
use crate::grid::{HurstIndex, TimeGrid};
use crate::kernel::{KernelTable, Observation};
use crate::mle::{estimate_fixed_effect, estimate_joint, total_log_likelihood, ThetaParams};
use crate::rng::{derive_seed, domain};
use crate::sde::{draw_effects, euler_path, Simulator, Trajectory};
use crate::statistics::{
    convergence_probe, sufficient_stats, ConstantDriftFastPath, Provenance, StatsBatch, SufficientStats,
};

/// Master seed of replication `r`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, domain::REPLICATION, r as u64)
}

/// Shared, read-only state of one experiment.
struct Context<'a> {
    config: &'a ExperimentConfig,
    hurst: HurstIndex,
    grid: TimeGrid,
    generator: FbmGenerator,
    table: KernelTable,
    fast_path: Option<ConstantDriftFastPath>,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let hurst = config.hurst()?;
        let grid = config.time_grid()?;
        let generator = FbmGenerator::new(grid, hurst)?;
        let table = KernelTable::new(grid, hurst);
        let fast_path = ConstantDriftFastPath::new(&table, &config.model.drift, &config.model.sigma).ok();
        Ok(Context {
            config,
            hurst,
            grid,
            generator,
            table,
            fast_path,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            hurst: self.hurst,
            horizon: self.grid.horizon(),
            steps: self.grid.steps(),
            drift: self.config.model.drift.clone(),
            sigma: self.config.model.sigma.clone(),
        }
    }

    fn reduce(&self, t: &Trajectory) -> Result<SufficientStats> {
        let obs = t.observation();
        match &self.fast_path {
            Some(fast) => fast.stats(&obs),
            None => sufficient_stats(&self.table, &obs, &self.config.model.drift, &self.config.model.sigma),
        }
    }

    fn replication(&self, r: usize) -> ReplicationResult {
        let seed = replication_seed(self.config.run.master_seed, r);
        let mut result = ReplicationResult {
            replication: r,
            seed,
            survivors: 0,
            excluded: Vec::new(),
            outcome: ReplicationOutcome::Failed { cause: String::new() },
        };
        match self.replication_inner(seed, &mut result) {
            Ok(outcome) => result.outcome = outcome,
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                result.outcome = ReplicationOutcome::Failed { cause: e.to_string() };
            }
        }
        result
    }

    fn replication_inner(&self, seed: u64, result: &mut ReplicationResult) -> Result<ReplicationOutcome> {
        let cfg = self.config;
        let n = cfg.population.trajectories;
        let effects = draw_effects(n, cfg.population.mu, cfg.population.sigma0_sq, seed)?;
        let sim = Simulator {
            generator: &self.generator,
            drift: &cfg.model.drift,
            sigma: &cfg.model.sigma,
            x0: cfg.model.x0,
            fbm_seed: seed,
            settings: cfg.simulation_settings(),
        };
        let reduced: Vec<Result<SufficientStats>> = effects
            .draws
            .par_iter()
            .enumerate()
            .map(|(i, &phi)| sim.trajectory(i, phi).and_then(|t| self.reduce(&t)))
            .collect();

        let mut stats = Vec::with_capacity(n);
        for (i, r) in reduced.into_iter().enumerate() {
            match r {
                Ok(s) => stats.push(s),
                Err(e) => {
                    log::debug!("replication {}: trajectory {i} excluded: {e}", result.replication);
                    result.excluded.push(Exclusion {
                        trajectory: i,
                        cause: e.to_string(),
                    });
                }
            }
        }
        result.survivors = stats.len();
        if (stats.len() as f64) < cfg.run.min_survival * n as f64 - 1e-9 {
            return Err(Error::Experiment(format!(
                "only {} of {n} trajectories survived (need {:.0}%)",
                stats.len(),
                100.0 * cfg.run.min_survival
            )));
        }
        let batch = StatsBatch::new(Some(self.provenance()), stats)?;
        match cfg.run.estimator {
            Estimator::Joint => {
                let est = estimate_joint(&batch, &cfg.solver)?;
                if !est.converged {
                    log::warn!(
                        "replication {}: solver stopped with projected score norm {:e}",
                        result.replication,
                        est.gradient_norm
                    );
                }
                Ok(ReplicationOutcome::Completed {
                    mu_hat: est.theta_hat.mu,
                    sigma0_sq_hat: est.theta_hat.sigma0_sq,
                    log_likelihood: est.log_likelihood,
                    converged: est.converged,
                    boundary: est.boundary,
                    iterations: est.iterations,
                })
            }
            Estimator::FixedEffect => {
                let mu = estimate_fixed_effect(&batch)?;
                let log_likelihood = total_log_likelihood(&batch, ThetaParams::new(mu, 0.0)?)?;
                Ok(ReplicationOutcome::Completed {
                    mu_hat: mu,
                    sigma0_sq_hat: 0.0,
                    log_likelihood,
                    converged: true,
                    boundary: false,
                    iterations: 0,
                })
            }
        }
    }
}

/// Run every replication of `config`.
///
/// A replication that fails is recorded with its cause; the experiment
/// fails when half or more of the replications do.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(config)?;
    log::info!(
        "experiment: {} replications of {} trajectories on {} steps ({:?} fBm)",
        config.run.replications,
        config.population.trajectories,
        ctx.grid.steps(),
        ctx.generator.method()
    );
    let replications: Vec<ReplicationResult> = (0..config.run.replications)
        .into_par_iter()
        .map(|r| ctx.replication(r))
        .collect();
    let summary = Summary::of(&replications);
    if 2 * summary.failed >= replications.len() {
        let first = replications.iter().find_map(|r| match &r.outcome {
            ReplicationOutcome::Failed { cause } => Some(cause.clone()),
            ReplicationOutcome::Completed { .. } => None,
        });
        return Err(Error::Experiment(format!(
            "{} of {} replications failed; first cause: {}",
            summary.failed,
            replications.len(),
            first.unwrap_or_default()
        )));
    }
    Ok(ExperimentReport {
        software: SoftwareInfo::current(),
        config: config.clone(),
        summary,
        replications,
    })
}

/// Refinement study of `(U, V)` on nested grids.
///
/// Each trajectory is driven by one fBm path sampled on the finest grid;
/// coarser levels use the same path at every `factor`-th point, and the
/// SDE is re-solved on each level.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate_convergence()?;
    let hurst = config.hurst()?;
    let levels = config.convergence.levels.clone();
    let finest = *levels.last().unwrap_or(&0);
    let fine_grid = TimeGrid::new(config.grid.horizon, finest)?;
    let generator = FbmGenerator::new(fine_grid, hurst)?;
    let seed = derive_seed(config.run.master_seed, domain::CONVERGENCE, 0);
    let count = config.convergence.paths;
    let effects = draw_effects(count, config.population.mu, config.population.sigma0_sq, seed)?;
    let drift = &config.model.drift;
    let sigma = &config.model.sigma;
    let guard = config.run.blowup_guard;

    let paths: Vec<PathRate> = effects
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let outcome = (|| {
                let fbm = generator.path(seed, i as u64);
                let mut series = Vec::with_capacity(levels.len());
                for &m in &levels {
                    let factor = finest / m;
                    let grid = fine_grid.coarsen(factor)?;
                    let w: Vec<f64> = fbm.values.iter().step_by(factor).copied().collect();
                    let dw: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
                    let x = euler_path(i, config.model.x0, phi, drift, |k| sigma.at(k), &dw, grid.dt(), guard)?;
                    series.push((grid, x));
                }
                let obs = series
                    .iter()
                    .map(|(g, x)| Observation::new(i, *g, x))
                    .collect::<Result<Vec<_>>>()?;
                convergence_probe(&obs, drift, sigma, hurst)
            })();
            match outcome {
                Ok(rate) => PathRate {
                    trajectory: i,
                    effect: phi,
                    rate: Some(rate),
                    cause: None,
                },
                Err(e) => {
                    log::warn!("rate study: trajectory {i} failed: {e}");
                    PathRate {
                        trajectory: i,
                        effect: phi,
                        rate: None,
                        cause: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let failed = paths.iter().filter(|p| p.rate.is_none()).count();
    if 2 * failed >= paths.len() {
        return Err(Error::Experiment(format!("{failed} of {} rate-study paths failed", paths.len())));
    }
    let mut report = ConvergenceReport {
        software: SoftwareInfo::current(),
        config: config.clone(),
        levels,
        median_u_slope: None,
        median_v_slope: None,
        paths,
    };
    let (u, v) = report.slopes();
    report.median_u_slope = ConvergenceReport::median_or_none(&u);
    report.median_v_slope = ConvergenceReport::median_or_none(&v);
    Ok(report)
}
