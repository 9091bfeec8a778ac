//! Kernel transform turning fBm-driven observations into semimartingales.
//!
//! On a grid `t_k` the transform of a series `f` is the endpoint-excluding
//! left-point sum
//!
//! ```text
//! T[f](t_k) = Σ_{i=2}^{k-1} κ⁻¹ t_i^{1/2−H} (t_k − t_i)^{1/2−H} f_i
//! ```
//!
//! which never touches the singularities of the kernel at `s = 0` and
//! `s = t_k`. Sums with no terms (`k < 3`) are zero.

use std::io::Write;

use serde::Serialize;

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::grid::{HurstIndex, TimeGrid};
use crate::numeric::{compensated_sum, compensated_sum_parts};
use crate::special::gamma;

/// The constants `κ_H` and `λ_H` of the kernel and of the martingale's
/// quadratic variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NorrosConstants {
    pub hurst: HurstIndex,
    /// `2H Γ(3/2 − H) Γ(H + 1/2)`
    pub kappa: f64,
    /// `2H Γ(3 − 2H) Γ(H + 1/2) / Γ(3/2 − H)`
    pub lambda: f64,
}

pub fn norros_constants(hurst: HurstIndex) -> NorrosConstants {
    let h = hurst.value();
    let kappa = 2.0 * h * gamma(1.5 - h) * gamma(h + 0.5);
    let lambda = 2.0 * h * gamma(3.0 - 2.0 * h) * gamma(h + 0.5) / gamma(1.5 - h);
    NorrosConstants { hurst, kappa, lambda }
}

/// `k_H(t, s) = κ⁻¹ s^{1/2−H} (t − s)^{1/2−H}` for `0 < s < t`.
pub fn kernel_kh(t: f64, s: f64, hurst: HurstIndex) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(Error::domain(format!("kernel needs 0 < s < t, got s = {s}, t = {t}")));
    }
    let a = 0.5 - hurst.value();
    Ok(s.powf(a) * (t - s).powf(a) / norros_constants(hurst).kappa)
}

/// `ω_t = λ⁻¹ t^{2−2H}`, the quadratic variation of the fundamental martingale.
pub fn weight_omega(t: f64, hurst: HurstIndex) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("omega needs t >= 0, got {t}")));
    }
    Ok(omega_unchecked(t, hurst.value(), norros_constants(hurst).lambda))
}

#[inline]
fn omega_unchecked(t: f64, h: f64, lambda: f64) -> f64 {
    t.powf(2.0 - 2.0 * h) / lambda
}

/// Positive deterministic diffusion coefficient `σ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSpec {
    Constant { value: f64 },
    /// `σ(t_k)` for every grid point `k = 0..=n`.
    Tabulated { values: Vec<f64> },
}

impl DiffusionSpec {
    pub fn constant(value: f64) -> Result<Self> {
        let spec = DiffusionSpec::Constant { value };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        let spec = DiffusionSpec::Tabulated { values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DiffusionSpec::Constant { value } => value.is_finite() && *value > 0.0,
            DiffusionSpec::Tabulated { values } => {
                !values.is_empty() && values.iter().all(|v| v.is_finite() && *v > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("diffusion coefficient must be finite and strictly positive"))
        }
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        match self {
            DiffusionSpec::Tabulated { values } if values.len() != grid.len() => Err(Error::contract(format!(
                "tabulated diffusion has {} entries, grid has {} points",
                values.len(),
                grid.len()
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            DiffusionSpec::Constant { value } => *value,
            DiffusionSpec::Tabulated { values } => values[k],
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            DiffusionSpec::Constant { value } => Some(*value),
            DiffusionSpec::Tabulated { .. } => None,
        }
    }
}

/// A borrowed view of one observed path without any latent information.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub id: usize,
    pub grid: TimeGrid,
    pub values: &'a [f64],
}

impl<'a> Observation<'a> {
    pub fn new(id: usize, grid: TimeGrid, values: &'a [f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "path has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Observation { id, grid, values })
    }
}

/// A series on the grid together with `ω` at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSeries {
    /// Columns `t,value,omega`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value,omega")?;
        for k in 0..self.values.len() {
            writeln!(out, "{},{},{}", self.grid.time(k), self.values[k], self.weights[k])?;
        }
        Ok(())
    }

    /// `values[k+1] − values[k]` for `k = 0..n`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// A transformed series as unscaled compensated sums `hi + lo`.
///
/// Increments are formed from the pairs before scaling, so they carry a
/// rounding error relative to their own size rather than to the size of
/// the series.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformParts {
    scale: f64,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl TransformParts {
    pub fn values(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| self.scale * (h + l)).collect()
    }

    /// `T(t_{k+1}) − T(t_k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.scale * ((self.hi[k + 1] - self.hi[k]) + (self.lo[k + 1] - self.lo[k]))
    }

    /// All `n` increments.
    pub fn increments(&self) -> Vec<f64> {
        (0..self.hi.len() - 1).map(|k| self.increment(k)).collect()
    }
}

/// Kernel weights and `ω` for one `(grid, H)`, shared by all trajectories.
///
/// On a uniform grid `t_i^{a} (t_k − t_i)^{a} = Δt^{2a} i^{a} (k − i)^{a}`
/// with `a = 1/2 − H`, so only the powers `j^a` are stored.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: TimeGrid,
    constants: NorrosConstants,
    scale: f64,
    powers: Vec<f64>,
    omega: Vec<f64>,
}

impl KernelTable {
    pub fn new(grid: TimeGrid, hurst: HurstIndex) -> Self {
        let constants = norros_constants(hurst);
        let a = 0.5 - hurst.value();
        let n = grid.steps();
        let powers = (0..=n).map(|j| (j as f64).powf(a)).collect();
        let omega = (0..=n)
            .map(|k| omega_unchecked(grid.time(k), hurst.value(), constants.lambda))
            .collect();
        KernelTable {
            grid,
            constants,
            scale: grid.dt().powf(2.0 * a) / constants.kappa,
            powers,
            omega,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.constants.hurst
    }

    pub fn constants(&self) -> NorrosConstants {
        self.constants
    }

    /// `ω(t_k)` for `k = 0..=n`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `κ⁻¹ t_i^{1/2−H} (t_k − t_i)^{1/2−H}` for `0 < i < k`.
    #[inline]
    pub fn weight(&self, k: usize, i: usize) -> f64 {
        self.scale * self.powers[i] * self.powers[k - i]
    }

    /// `T[f](t_k)` for a single `k`.
    pub fn transform_at(&self, f: &[f64], k: usize) -> f64 {
        if k < 3 {
            return 0.0;
        }
        let p = &self.powers;
        self.scale * compensated_sum((2..k).map(|i| p[i] * f[i] * p[k - i]))
    }

    /// `T[f](t_k)` for all `k = 0..=n`; `f` needs entries `0..n`.
    pub fn transform(&self, f: &[f64]) -> Vec<f64> {
        self.transform_parts(f).values()
    }

    /// As [`KernelTable::transform`], keeping each unscaled compensated sum
    /// as a (sum, residual) pair.
    pub fn transform_parts(&self, f: &[f64]) -> TransformParts {
        let n = self.grid.steps();
        debug_assert!(f.len() >= n);
        let p = &self.powers;
        let g: Vec<f64> = (0..n).map(|i| p[i] * f[i]).collect();
        let mut hi = vec![0.0; n + 1];
        let mut lo = vec![0.0; n + 1];
        for k in 3..=n {
            (hi[k], lo[k]) = compensated_sum_parts((2..k).map(|i| g[i] * p[k - i]));
        }
        TransformParts {
            scale: self.scale,
            hi,
            lo,
        }
    }

    /// The drift ratio `b(X(t_i)) / σ(t_i)` for `i = 0..n`.
    pub fn drift_ratio(&self, obs: &Observation<'_>, drift: &DriftModel, sigma: &DiffusionSpec) -> Result<Vec<f64>> {
        self.check(obs, sigma)?;
        let n = self.grid.steps();
        (0..n)
            .map(|i| {
                let r = drift.eval(obs.values[i]) / sigma.at(i);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(Error::Data {
                        trajectory: obs.id,
                        index: i,
                        reason: format!("drift evaluates to {r} at x = {}", obs.values[i]),
                    })
                }
            })
            .collect()
    }

    /// `∫₀^{t_k} k_H(t_k, s) b(X(s))/σ(s) ds` for all `k`.
    pub fn drift_integral(&self, obs: &Observation<'_>, drift: &DriftModel, sigma: &DiffusionSpec) -> Result<Vec<f64>> {
        Ok(self.drift_integral_parts(obs, drift, sigma)?.values())
    }

    pub fn drift_integral_parts(
        &self,
        obs: &Observation<'_>,
        drift: &DriftModel,
        sigma: &DiffusionSpec,
    ) -> Result<TransformParts> {
        let dt = self.grid.dt();
        let f: Vec<f64> = self.drift_ratio(obs, drift, sigma)?.into_iter().map(|r| r * dt).collect();
        Ok(self.transform_parts(&f))
    }

    /// `Q_H(t_k)`, the ω-derivative of the drift integral; `Q_H(t_0) = 0`.
    pub fn q_series(&self, drift_integral: &TransformParts) -> Vec<f64> {
        let mut q = vec![0.0; drift_integral.hi.len()];
        for k in 1..q.len() {
            q[k] = drift_integral.increment(k - 1) / (self.omega[k] - self.omega[k - 1]);
        }
        q
    }

    pub fn compute_qh(&self, obs: &Observation<'_>, drift: &DriftModel, sigma: &DiffusionSpec) -> Result<WeightedSeries> {
        let integral = self.drift_integral_parts(obs, drift, sigma)?;
        Ok(self.weighted(self.q_series(&integral)))
    }

    /// The fundamental semimartingale `Z(t_k) = T[ΔX/σ](t_k)`.
    pub fn z_values(&self, obs: &Observation<'_>, sigma: &DiffusionSpec) -> Result<Vec<f64>> {
        Ok(self.z_parts(obs, sigma)?.values())
    }

    pub fn z_parts(&self, obs: &Observation<'_>, sigma: &DiffusionSpec) -> Result<TransformParts> {
        self.check(obs, sigma)?;
        let n = self.grid.steps();
        let f: Vec<f64> = (0..n)
            .map(|i| (obs.values[i + 1] - obs.values[i]) / sigma.at(i))
            .collect();
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                trajectory: obs.id,
                index: i,
                reason: "non-finite increment".into(),
            });
        }
        Ok(self.transform_parts(&f))
    }

    pub fn compute_z(&self, obs: &Observation<'_>, sigma: &DiffusionSpec) -> Result<WeightedSeries> {
        Ok(self.weighted(self.z_values(obs, sigma)?))
    }

    /// `M^H(t_k) = T[ΔW^H](t_k)` for a path on this table's grid.
    pub fn fundamental_martingale(&self, path: &FbmPath) -> Result<WeightedSeries> {
        if path.grid != self.grid || path.hurst != self.hurst() {
            return Err(Error::contract("fBm path and kernel table disagree on grid or H"));
        }
        Ok(self.weighted(self.transform(&path.increments())))
    }

    /// `M^H(T)` only, in O(n).
    pub fn martingale_terminal(&self, increments: &[f64]) -> f64 {
        self.transform_at(increments, self.grid.steps())
    }

    fn weighted(&self, values: Vec<f64>) -> WeightedSeries {
        WeightedSeries {
            grid: self.grid,
            values,
            weights: self.omega.clone(),
        }
    }

    fn check(&self, obs: &Observation<'_>, sigma: &DiffusionSpec) -> Result<()> {
        if obs.grid != self.grid {
            return Err(Error::contract("observation grid differs from kernel table grid"));
        }
        sigma.check_grid(&self.grid)
    }
}

/// Direct evaluation of `∫₀^{t_k} k_H(t_k, s) r(s) ds` by the
/// endpoint-excluding sum, where `ratio[i] = b(X(t_i)) / σ(t_i)`.
pub fn kernel_integral(ratio: &[f64], grid: &TimeGrid, k: usize, hurst: HurstIndex) -> Result<f64> {
    if k > grid.steps() || ratio.len() < k {
        return Err(Error::contract(format!("index {k} outside grid of {} steps", grid.steps())));
    }
    if k < 3 {
        return Ok(0.0);
    }
    let tk = grid.time(k);
    let mut acc = 0.0;
    for i in 2..k {
        let ti = grid.time(i);
        acc += kernel_kh(tk, ti, hurst)? * ratio[i] * (grid.time(i + 1) - ti);
    }
    Ok(acc)
}

pub fn compute_qh(obs: &Observation<'_>, hurst: HurstIndex, drift: &DriftModel, sigma: &DiffusionSpec) -> Result<WeightedSeries> {
    KernelTable::new(obs.grid, hurst).compute_qh(obs, drift, sigma)
}

pub fn compute_z(obs: &Observation<'_>, hurst: HurstIndex, sigma: &DiffusionSpec) -> Result<WeightedSeries> {
    KernelTable::new(obs.grid, hurst).compute_z(obs, sigma)
}

pub fn fundamental_martingale(path: &FbmPath) -> Result<WeightedSeries> {
    KernelTable::new(path.grid, path.hurst).fundamental_martingale(path)
}
