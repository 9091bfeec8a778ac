//! Reduction of each trajectory to the pair `(U, V)` seen by the likelihood.
//!
//! With `Q_k` the ω-derivative of the kernel-transformed drift and `Z` the
//! transformed observation, on a grid with points `0..=n`
//!
//! ```text
//! U = Σ_{k=1}^{n-1} Q_k (Z_{k+1} − Z_k)
//! V = Σ_{k=1}^{n-1} Q_k² (ω_{k+1} − ω_k)
//! ```
//!
//! The last `Q_n` would need increments past `t_n` and is not used.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::grid::{HurstIndex, TimeGrid};
use crate::kernel::{DiffusionSpec, KernelTable, Observation};
use crate::numeric::{compensated_sum, ols_slope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub trajectory_id: usize,
    pub u: f64,
    pub v: f64,
    /// Grid steps of the trajectory the pair was computed from.
    #[serde(default)]
    pub n: usize,
}

impl SufficientStats {
    pub fn new(trajectory_id: usize, u: f64, v: f64, n: usize) -> Result<Self> {
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::Data {
                trajectory: trajectory_id,
                index: n,
                reason: format!("non-finite statistics (u, v) = ({u}, {v})"),
            });
        }
        if v < 0.0 {
            return Err(Error::domain(format!("trajectory {trajectory_id}: v = {v} is negative")));
        }
        Ok(SufficientStats { trajectory_id, u, v, n })
    }
}

/// Where a statistics batch came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub hurst: HurstIndex,
    pub horizon: f64,
    pub steps: usize,
    pub drift: DriftModel,
    pub sigma: DiffusionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBatch {
    /// Absent for statistics imported from a bare CSV file.
    pub provenance: Option<Provenance>,
    pub stats: Vec<SufficientStats>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    trajectory_id: usize,
    u: f64,
    v: f64,
}

impl StatsBatch {
    pub fn new(provenance: Option<Provenance>, stats: Vec<SufficientStats>) -> Result<Self> {
        if let Some(s) = stats.iter().find(|s| s.v < 0.0 || !s.u.is_finite() || !s.v.is_finite()) {
            return Err(Error::domain(format!("invalid statistics for trajectory {}", s.trajectory_id)));
        }
        if let Some(p) = &provenance {
            if let Some(s) = stats.iter().find(|s| s.n != p.steps) {
                return Err(Error::contract(format!(
                    "trajectory {} was reduced on {} steps, batch provenance says {}",
                    s.trajectory_id, s.n, p.steps
                )));
            }
        }
        Ok(StatsBatch { provenance, stats })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let stats = pairs
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| SufficientStats::new(i, u, v, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(StatsBatch { provenance: None, stats })
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Columns `trajectory_id,u,v`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.stats {
            w.serialize(CsvRow {
                trajectory_id: s.trajectory_id,
                u: s.u,
                v: s.v,
            })
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut stats = Vec::new();
        for row in r.deserialize::<CsvRow>() {
            let row = row.map_err(csv_error)?;
            stats.push(SufficientStats::new(row.trajectory_id, row.u, row.v, 0)?);
        }
        StatsBatch::new(None, stats)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let batch: StatsBatch = serde_json::from_reader(input)?;
        StatsBatch::new(batch.provenance, batch.stats)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Intermediate series kept when debugging a reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    pub qh: Vec<f64>,
    pub z: Vec<f64>,
}

/// `(U, V)` from `Q`, the increments `Z(t_{k+1}) − Z(t_k)` and the weights `ω`.
pub fn reduce_series(q: &[f64], z_increments: &[f64], omega: &[f64]) -> (f64, f64) {
    let n = q.len() - 1;
    let u = compensated_sum((1..n).map(|k| q[k] * z_increments[k]));
    let v = compensated_sum((1..n).map(|k| q[k] * q[k] * (omega[k + 1] - omega[k])));
    (u, v)
}

fn reduce(
    table: &KernelTable,
    obs: &Observation<'_>,
    drift: &DriftModel,
    sigma: &DiffusionSpec,
) -> Result<(SufficientStats, ReductionTrace)> {
    let qh = table.q_series(&table.drift_integral_parts(obs, drift, sigma)?);
    let z = table.z_parts(obs, sigma)?;
    let (u, v) = reduce_series(&qh, &z.increments(), table.omega());
    let stats = SufficientStats::new(obs.id, u, v, obs.grid.steps())?;
    Ok((stats, ReductionTrace { qh, z: z.values() }))
}

/// Sufficient statistics of one observed path using a shared kernel table.
pub fn sufficient_stats(
    table: &KernelTable,
    obs: &Observation<'_>,
    drift: &DriftModel,
    sigma: &DiffusionSpec,
) -> Result<SufficientStats> {
    reduce(table, obs, drift, sigma).map(|(s, _)| s)
}

/// As [`sufficient_stats`], also returning the `Q_H` and `Z` series.
pub fn sufficient_stats_traced(
    table: &KernelTable,
    obs: &Observation<'_>,
    drift: &DriftModel,
    sigma: &DiffusionSpec,
) -> Result<(SufficientStats, ReductionTrace)> {
    reduce(table, obs, drift, sigma)
}

/// Per-path outcomes in input order.
pub fn sufficient_stats_each(
    table: &KernelTable,
    observations: &[Observation<'_>],
    drift: &DriftModel,
    sigma: &DiffusionSpec,
) -> Vec<Result<SufficientStats>> {
    observations
        .par_iter()
        .map(|obs| sufficient_stats(table, obs, drift, sigma))
        .collect()
}

/// Reduce every path of a homogeneous batch; the first failure aborts.
pub fn stats_batch(
    hurst: HurstIndex,
    observations: &[Observation<'_>],
    drift: &DriftModel,
    sigma: &DiffusionSpec,
) -> Result<StatsBatch> {
    let grid = match observations.first() {
        Some(o) => o.grid,
        None => return Err(Error::domain("cannot reduce an empty batch")),
    };
    if observations.iter().any(|o| o.grid != grid) {
        return Err(Error::contract("all trajectories of a batch must share one grid"));
    }
    let table = KernelTable::new(grid, hurst);
    let stats = sufficient_stats_each(&table, observations, drift, sigma)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    StatsBatch::new(
        Some(Provenance {
            hurst,
            horizon: grid.horizon(),
            steps: grid.steps(),
            drift: drift.clone(),
            sigma: sigma.clone(),
        }),
        stats,
    )
}

/// Closed-path evaluation for constant `b = c σ` with constant `σ`.
///
/// `Q_H` is then deterministic, `V` is the same for every path, and `U` is
/// a fixed linear functional of the increments of `X / σ`:
/// `U = c Σ_i d_i (X_{i+1} − X_i) / σ` with
/// `d_i = q_i w(i+1, i) + Σ_{k>i} q_k (w(k+1, i) − w(k, i))`,
/// where `q` is the unit-drift `Q_H` and `w` the kernel weights.
#[derive(Debug, Clone)]
pub struct ConstantDriftFastPath {
    grid: TimeGrid,
    ratio: f64,
    sigma: f64,
    v: f64,
    coefficients: Vec<f64>,
}

impl ConstantDriftFastPath {
    pub fn new(table: &KernelTable, drift: &DriftModel, sigma: &DiffusionSpec) -> Result<Self> {
        let (Some(b), Some(s)) = (drift.constant_value(), sigma.constant_value()) else {
            return Err(Error::contract("fast path needs constant drift and constant diffusion"));
        };
        let grid = table.grid();
        let n = grid.steps();
        let unit = vec![grid.dt(); n];
        let q = table.q_series(&table.transform_parts(&unit));
        let omega = table.omega();
        let v_unit = compensated_sum((1..n).map(|k| q[k] * q[k] * (omega[k + 1] - omega[k])));

        let mut coefficients = vec![0.0; n];
        for i in 2..n {
            let tail = (i + 1..n).map(|k| q[k] * (table.weight(k + 1, i) - table.weight(k, i)));
            coefficients[i] = compensated_sum(std::iter::once(q[i] * table.weight(i + 1, i)).chain(tail));
        }
        let ratio = b / s;
        Ok(ConstantDriftFastPath {
            grid,
            ratio,
            sigma: s,
            v: ratio * ratio * v_unit,
            coefficients,
        })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn stats(&self, obs: &Observation<'_>) -> Result<SufficientStats> {
        if obs.grid != self.grid {
            return Err(Error::contract("observation grid differs from fast-path grid"));
        }
        let x = obs.values;
        let u = self.ratio
            * compensated_sum(
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, d)| d * (x[i + 1] - x[i]) / self.sigma),
            );
        SufficientStats::new(obs.id, u, self.v, self.grid.steps())
    }
}

/// Differences of `(U, V)` between successive refinements of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub steps: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `|U^{(m)} − U^{(2m)}|` indexed by the coarser level.
    pub u_differences: Vec<f64>,
    pub v_differences: Vec<f64>,
    /// Log-log slope of the differences against the coarse step count;
    /// absent when some difference is exactly zero.
    pub u_slope: Option<f64>,
    pub v_slope: Option<f64>,
}

fn fitted_slope(steps: &[usize], diffs: &[f64]) -> Option<f64> {
    if diffs.iter().any(|d| *d <= 0.0 || !d.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = steps.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    Some(ols_slope(&xs, &ys))
}

/// Rate study over one path observed at nested refinements (coarse first).
pub fn convergence_probe(
    levels: &[Observation<'_>],
    drift: &DriftModel,
    sigma: &DiffusionSpec,
    hurst: HurstIndex,
) -> Result<RateReport> {
    if levels.len() < 3 {
        return Err(Error::Config(format!(
            "a rate study needs at least 3 refinement levels, got {}",
            levels.len()
        )));
    }
    let mut steps = Vec::with_capacity(levels.len());
    let mut u = Vec::with_capacity(levels.len());
    let mut v = Vec::with_capacity(levels.len());
    for obs in levels {
        let table = KernelTable::new(obs.grid, hurst);
        let s = sufficient_stats(&table, obs, drift, sigma)?;
        steps.push(obs.grid.steps());
        u.push(s.u);
        v.push(s.v);
    }
    let u_differences: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let v_differences: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let coarse = &steps[..steps.len() - 1];
    Ok(RateReport {
        u_slope: fitted_slope(coarse, &u_differences),
        v_slope: fitted_slope(coarse, &v_differences),
        steps,
        u,
        v,
        u_differences,
        v_differences,
    })
}
