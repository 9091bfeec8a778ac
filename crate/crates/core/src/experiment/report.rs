//! Experiment and rate-study reports, and their JSON and CSV files.
//!
//! Report files contain no timing information, so that runs with equal
//! configuration produce identical bytes; timing goes to `run_info.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::numeric::{mean, median, sample_variance};
use crate::statistics::RateReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftwareInfo {
    pub name: String,
    pub version: String,
}

impl SoftwareInfo {
    pub fn current() -> Self {
        SoftwareInfo {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// A trajectory left out of a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub trajectory: usize,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub survivors: usize,
    pub excluded: Vec<Exclusion>,
    pub outcome: ReplicationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplicationOutcome {
    Completed {
        mu_hat: f64,
        sigma0_sq_hat: f64,
        log_likelihood: f64,
        converged: bool,
        boundary: bool,
        iterations: usize,
    },
    Failed {
        cause: String,
    },
}

impl ReplicationResult {
    pub fn estimate(&self) -> Option<(f64, f64)> {
        match self.outcome {
            ReplicationOutcome::Completed {
                mu_hat, sigma0_sq_hat, ..
            } => Some((mu_hat, sigma0_sq_hat)),
            ReplicationOutcome::Failed { .. } => None,
        }
    }
}

/// Mean, standard deviation (n − 1 denominator) and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl ComponentSummary {
    pub fn of(xs: &[f64]) -> Self {
        let sd = sample_variance(xs).sqrt();
        ComponentSummary {
            mean: mean(xs),
            sd,
            se: sd / (xs.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub completed: usize,
    pub failed: usize,
    pub mu: ComponentSummary,
    pub sigma0_sq: ComponentSummary,
}

impl Summary {
    /// Summary of the completed replications, in replication order.
    pub fn of(replications: &[ReplicationResult]) -> Self {
        let (mus, sigmas): (Vec<f64>, Vec<f64>) = replications.iter().filter_map(|r| r.estimate()).unzip();
        Summary {
            completed: mus.len(),
            failed: replications.len() - mus.len(),
            mu: ComponentSummary::of(&mus),
            sigma0_sq: ComponentSummary::of(&sigmas),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub software: SoftwareInfo,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentReport {
    pub fn mu_hats(&self) -> Vec<f64> {
        self.replications.iter().filter_map(|r| r.estimate()).map(|e| e.0).collect()
    }

    pub fn sigma0_sq_hats(&self) -> Vec<f64> {
        self.replications.iter().filter_map(|r| r.estimate()).map(|e| e.1).collect()
    }

    /// Writes `report.json`, `replications.csv` and `summary.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join("report.json");
        write_json(&json, self)?;

        let reps = dir.join("replications.csv");
        let mut w = BufWriter::new(File::create(&reps)?);
        writeln!(
            w,
            "replication,seed,status,mu_hat,sigma0_sq_hat,log_likelihood,converged,boundary,survivors,excluded,cause"
        )?;
        for r in &self.replications {
            match &r.outcome {
                ReplicationOutcome::Completed {
                    mu_hat,
                    sigma0_sq_hat,
                    log_likelihood,
                    converged,
                    boundary,
                    ..
                } => writeln!(
                    w,
                    "{},{},completed,{mu_hat},{sigma0_sq_hat},{log_likelihood},{converged},{boundary},{},{},",
                    r.replication,
                    r.seed,
                    r.survivors,
                    r.excluded.len()
                )?,
                ReplicationOutcome::Failed { cause } => writeln!(
                    w,
                    "{},{},failed,,,,,,{},{},\"{}\"",
                    r.replication,
                    r.seed,
                    r.survivors,
                    r.excluded.len(),
                    cause.replace('"', "'")
                )?,
            }
        }
        w.flush()?;

        let summary = dir.join("summary.csv");
        let mut w = BufWriter::new(File::create(&summary)?);
        writeln!(w, "component,mean,sd,se,completed,failed")?;
        for (name, c) in [("mu", self.summary.mu), ("sigma0_sq", self.summary.sigma0_sq)] {
            writeln!(
                w,
                "{name},{},{},{},{},{}",
                c.mean, c.sd, c.se, self.summary.completed, self.summary.failed
            )?;
        }
        w.flush()?;
        Ok(vec![json, reps, summary])
    }
}

/// Wall-clock and thread count of one run, kept apart from the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub software: SoftwareInfo,
}

impl RunInfo {
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("run_info.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRate {
    pub trajectory: usize,
    pub effect: f64,
    pub rate: Option<RateReport>,
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub software: SoftwareInfo,
    pub config: ExperimentConfig,
    pub levels: Vec<usize>,
    /// Median over paths of the fitted slopes; paths whose differences
    /// vanish somewhere have no slope and are skipped.
    pub median_u_slope: Option<f64>,
    pub median_v_slope: Option<f64>,
    pub paths: Vec<PathRate>,
}

impl ConvergenceReport {
    pub fn slopes(&self) -> (Vec<f64>, Vec<f64>) {
        let rates = self.paths.iter().filter_map(|p| p.rate.as_ref());
        let u = rates.clone().filter_map(|r| r.u_slope).collect();
        let v = rates.filter_map(|r| r.v_slope).collect();
        (u, v)
    }

    pub(crate) fn median_or_none(xs: &[f64]) -> Option<f64> {
        (!xs.is_empty()).then(|| median(xs))
    }

    /// Writes `convergence.json` and `convergence.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join("convergence.json");
        write_json(&json, self)?;
        let csv = dir.join("convergence.csv");
        let mut w = BufWriter::new(File::create(&csv)?);
        writeln!(w, "trajectory,steps,u,v,u_difference,v_difference")?;
        for p in &self.paths {
            let Some(rate) = &p.rate else { continue };
            for (j, steps) in rate.steps.iter().enumerate() {
                let du = rate.u_differences.get(j).map(|d| d.to_string()).unwrap_or_default();
                let dv = rate.v_differences.get(j).map(|d| d.to_string()).unwrap_or_default();
                writeln!(w, "{},{steps},{},{},{du},{dv}", p.trajectory, rate.u[j], rate.v[j])?;
            }
        }
        w.flush()?;
        Ok(vec![json, csv])
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn done(i: usize, mu: f64, s: f64) -> ReplicationResult {
        ReplicationResult {
            replication: i,
            seed: i as u64,
            survivors: 10,
            excluded: vec![],
            outcome: ReplicationOutcome::Completed {
                mu_hat: mu,
                sigma0_sq_hat: s,
                log_likelihood: -1.0,
                converged: true,
                boundary: false,
                iterations: 3,
            },
        }
    }

    #[test]
    fn summary_skips_failures() {
        let reps = vec![
            done(0, 1.0, 0.5),
            ReplicationResult {
                replication: 1,
                seed: 1,
                survivors: 2,
                excluded: vec![],
                outcome: ReplicationOutcome::Failed { cause: "x".into() },
            },
            done(2, 3.0, 1.5),
        ];
        let s = Summary::of(&reps);
        assert_eq!((s.completed, s.failed), (2, 1));
        assert_eq!(s.mu.mean, 2.0);
        assert!((s.mu.sd - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.mu.se - 1.0).abs() < 1e-15);
        assert_eq!(s.sigma0_sq.mean, 1.0);
    }

    #[test]
    fn report_json_round_trip() {
        let reps = vec![done(0, 0.1 + 0.2, 1.0 / 3.0), done(1, -2.5e-17, 7.0)];
        let report = ExperimentReport {
            software: SoftwareInfo::current(),
            config: ExperimentConfig::default(),
            summary: Summary::of(&reps),
            replications: reps,
        };
        let text = serde_json::to_string(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(Summary::of(&back.replications), back.summary);
    }
}
