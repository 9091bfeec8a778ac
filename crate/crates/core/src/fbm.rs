//! Exact sampling of fractional Brownian motion on a uniform grid.
//!
//! Increments on a uniform grid form a stationary Gaussian sequence
//! (fractional Gaussian noise). They are drawn by circulant embedding of
//! the increment autocovariance, falling back to a dense Cholesky factor
//! when the embedding is not nonnegative definite. Levels are the prefix
//! sums of the increments.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{HurstIndex, TimeGrid};
use crate::rng::{self, domain};

/// Largest grid accepted by the dense Cholesky fallback (n x n doubles).
pub const MAX_CHOLESKY_STEPS: usize = 4096;

/// Relative tolerance below which negative circulant eigenvalues are
/// treated as rounding noise.
const EIGEN_TOLERANCE: f64 = 1e-10;

/// `E[W(s) W(t)] = ½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstIndex) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::domain(format!("fBm covariance needs nonnegative times, got ({s}, {t})")));
    }
    let two_h = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: HurstIndex) -> f64 {
    let two_h = 2.0 * hurst.value();
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    CirculantEmbedding,
    Cholesky,
}

enum Factor {
    Circulant { sqrt_eigen: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    // Row-major lower-triangular factor of the unit-spacing increment covariance.
    Cholesky { lower: Vec<f64> },
}

/// Read-only factorization for one `(grid, H)` pair, shareable across
/// worker threads.
pub struct FbmGenerator {
    grid: TimeGrid,
    hurst: HurstIndex,
    scale: f64,
    factor: Factor,
}

impl fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("method", &self.method())
            .finish()
    }
}

impl FbmGenerator {
    /// Circulant embedding when valid, dense Cholesky otherwise.
    pub fn new(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        match circulant_factor(grid.steps(), hurst) {
            Some(factor) => Ok(Self::assemble(grid, hurst, factor)),
            None => {
                log::warn!(
                    "circulant embedding not nonnegative definite for H = {}, n = {}; using Cholesky",
                    hurst.value(),
                    grid.steps()
                );
                Ok(Self::assemble(grid, hurst, cholesky_factor(grid.steps(), hurst)?))
            }
        }
    }

    pub fn with_method(grid: TimeGrid, hurst: HurstIndex, method: FbmMethod) -> Result<Self> {
        let factor = match method {
            FbmMethod::CirculantEmbedding => circulant_factor(grid.steps(), hurst).ok_or_else(|| {
                Error::domain(format!(
                    "circulant embedding is not nonnegative definite for H = {}, n = {}",
                    hurst.value(),
                    grid.steps()
                ))
            })?,
            FbmMethod::Cholesky => cholesky_factor(grid.steps(), hurst)?,
        };
        Ok(Self::assemble(grid, hurst, factor))
    }

    fn assemble(grid: TimeGrid, hurst: HurstIndex, factor: Factor) -> Self {
        FbmGenerator {
            grid,
            hurst,
            scale: grid.dt().powf(hurst.value()),
            factor,
        }
    }

    pub fn method(&self) -> FbmMethod {
        match self.factor {
            Factor::Circulant { .. } => FbmMethod::CirculantEmbedding,
            Factor::Cholesky { .. } => FbmMethod::Cholesky,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    /// One draw of the `n` grid increments `W(t_{k+1}) − W(t_k)`.
    pub fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.steps();
        match &self.factor {
            Factor::Circulant { sqrt_eigen, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eigen
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..n].iter().map(|c| c.re * self.scale).collect()
            }
            Factor::Cholesky { lower } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                (0..n)
                    .map(|i| {
                        let row = &lower[i * n..i * n + i + 1];
                        row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>() * self.scale
                    })
                    .collect()
            }
        }
    }

    /// Path `index` of the batch keyed by `master_seed`.
    pub fn path(&self, master_seed: u64, index: u64) -> FbmPath {
        let mut rng = rng::stream(master_seed, domain::FBM, index);
        let increments = self.increments(&mut rng);
        FbmPath {
            hurst: self.hurst,
            grid: self.grid,
            values: levels_from_increments(&increments),
            seed: master_seed,
            index,
        }
    }
}

fn circulant_factor(n: usize, hurst: HurstIndex) -> Option<Factor> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut sqrt_eigen = Vec::with_capacity(m);
    for c in &row {
        if c.re < -EIGEN_TOLERANCE * max {
            return None;
        }
        sqrt_eigen.push((c.re.max(0.0) / m as f64).sqrt());
    }
    Some(Factor::Circulant { sqrt_eigen, fft })
}

fn cholesky_factor(n: usize, hurst: HurstIndex) -> Result<Factor> {
    if n > MAX_CHOLESKY_STEPS {
        return Err(Error::Resource(format!(
            "dense Cholesky for {n} steps needs {:.0} MiB (limit is {MAX_CHOLESKY_STEPS} steps); \
             use fewer steps or a Hurst index where circulant embedding applies",
            (n * n * 8) as f64 / (1024.0 * 1024.0)
        )));
    }
    let acov: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = acov[i - j];
            for k in 0..j {
                sum -= lower[i * n + k] * lower[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::domain(format!(
                        "increment covariance is not positive definite at row {i}"
                    )));
                }
                lower[i * n + i] = sum.sqrt();
            } else {
                lower[i * n + j] = sum / lower[j * n + j];
            }
        }
    }
    Ok(Factor::Cholesky { lower })
}

/// Prefix sums with a leading zero.
pub fn levels_from_increments(increments: &[f64]) -> Vec<f64> {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for &d in increments {
        acc += d;
        values.push(acc);
    }
    values
}

/// One sampled path of `W^H` at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: HurstIndex,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Master seed of the batch this path belongs to.
    pub seed: u64,
    /// Stream index within the batch.
    pub index: u64,
}

impl FbmPath {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Columns `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.time(k), v)?;
        }
        Ok(())
    }
}

/// `count` independent paths; path `i` uses stream `i` of `master_seed`.
pub fn generate_fbm_paths(grid: TimeGrid, hurst: HurstIndex, count: usize, master_seed: u64) -> Result<Vec<FbmPath>> {
    if count == 0 {
        return Err(Error::domain("path count must be at least 1"));
    }
    let generator = FbmGenerator::new(grid, hurst)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| generator.path(master_seed, i))
        .collect())
}
