//! Euler simulation of `dX_i = φ_i b(X_i) dt + σ(t) dW_i^H` with
//! `φ_i ~ N(μ, σ₀²)`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::fbm::FbmGenerator;
use crate::grid::{HurstIndex, TimeGrid};
use crate::kernel::{DiffusionSpec, Observation};
use crate::rng::{self, domain};

pub const DEFAULT_BLOWUP_GUARD: f64 = 1e12;

/// Realized random effects of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectPopulation {
    pub mu: f64,
    pub sigma0_sq: f64,
    pub draws: Vec<f64>,
    pub seed: u64,
}

/// `n` i.i.d. `N(μ, σ₀²)` draws from the effects stream of `seed`.
pub fn draw_effects(n: usize, mu: f64, sigma0_sq: f64, seed: u64) -> Result<EffectPopulation> {
    if n == 0 {
        return Err(Error::domain("need at least one random effect"));
    }
    if !(sigma0_sq >= 0.0 && sigma0_sq.is_finite()) || !mu.is_finite() {
        return Err(Error::domain(format!(
            "effect distribution needs finite mean and nonnegative variance, got ({mu}, {sigma0_sq})"
        )));
    }
    let draws = if sigma0_sq == 0.0 {
        vec![mu; n]
    } else {
        let dist = Normal::new(mu, sigma0_sq.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = rng::stream(seed, domain::EFFECTS, 0);
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    };
    Ok(EffectPopulation { mu, sigma0_sq, draws, seed })
}

/// One simulated path. The generating effect is kept for diagnostics and
/// is not reachable through [`Trajectory::observation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: usize,
    grid: TimeGrid,
    x0: f64,
    values: Vec<f64>,
    effect_truth: Option<f64>,
}

impl Trajectory {
    pub fn new(id: usize, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "trajectory has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                trajectory: id,
                index: i,
                reason: "non-finite observation".into(),
            });
        }
        Ok(Trajectory {
            id,
            grid,
            x0: values[0],
            values,
            effect_truth: None,
        })
    }

    pub fn with_effect(mut self, effect: f64) -> Self {
        self.effect_truth = Some(effect);
        self
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn effect_truth(&self) -> Option<f64> {
        self.effect_truth
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            id: self.id,
            grid: self.grid,
            values: &self.values,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.time(k), v)?;
        }
        Ok(())
    }
}

/// `N` paths sharing grid, drift shape, diffusion and initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub hurst: HurstIndex,
    pub grid: TimeGrid,
    pub drift: DriftModel,
    pub sigma: DiffusionSpec,
    pub x0: f64,
    pub fbm_seed: u64,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Left-point Euler step `X_{k+1} = X_k + φ b(X_k) Δt + s_k ΔW_k`.
///
/// `noise_scale[k]` multiplies the k-th increment and may be zero.
pub fn euler_path(
    id: usize,
    x0: f64,
    effect: f64,
    drift: &DriftModel,
    noise_scale: impl Fn(usize) -> f64,
    increments: &[f64],
    dt: f64,
    guard: f64,
) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut x = x0;
    values.push(x);
    for (k, dw) in increments.iter().enumerate() {
        x = x + effect * drift.eval(x) * dt + noise_scale(k) * dw;
        if !x.is_finite() || x.abs() > guard {
            return Err(Error::BlowUp {
                trajectory: id,
                step: k + 1,
                value: x.abs(),
                guard,
            });
        }
        values.push(x);
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// Largest admissible `|X|` before a trajectory is declared exploded.
    pub blowup_guard: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            blowup_guard: DEFAULT_BLOWUP_GUARD,
        }
    }
}

/// Everything needed to simulate trajectories of one batch.
#[derive(Debug)]
pub struct Simulator<'a> {
    pub generator: &'a FbmGenerator,
    pub drift: &'a DriftModel,
    pub sigma: &'a DiffusionSpec,
    pub x0: f64,
    pub fbm_seed: u64,
    pub settings: SimulationSettings,
}

impl Simulator<'_> {
    /// Trajectory `i` driven by fBm stream `i` of `fbm_seed`.
    pub fn trajectory(&self, i: usize, effect: f64) -> Result<Trajectory> {
        let grid = self.generator.grid();
        let path = self.generator.path(self.fbm_seed, i as u64);
        let values = euler_path(
            i,
            self.x0,
            effect,
            self.drift,
            |k| self.sigma.at(k),
            &path.increments(),
            grid.dt(),
            self.settings.blowup_guard,
        )?;
        Ok(Trajectory {
            id: i,
            grid,
            x0: self.x0,
            values,
            effect_truth: Some(effect),
        })
    }

    /// All trajectories, with per-trajectory outcomes in index order.
    pub fn run(&self, effects: &[f64]) -> Vec<Result<Trajectory>> {
        effects
            .par_iter()
            .enumerate()
            .map(|(i, &phi)| self.trajectory(i, phi))
            .collect()
    }
}

fn validate_inputs(drift: &DriftModel, sigma: &DiffusionSpec, grid: &TimeGrid, x0: f64) -> Result<()> {
    drift.validate()?;
    sigma.validate()?;
    sigma.check_grid(grid)?;
    if !x0.is_finite() {
        return Err(Error::domain("initial value must be finite"));
    }
    if x0 == 0.0 && matches!(drift, DriftModel::Affine { .. }) {
        log::warn!("x0 = 0 with an affine drift leaves little drift information early in each path");
    }
    Ok(())
}

/// Simulate one batch; fails on the lowest-index trajectory that explodes.
pub fn simulate_batch(
    effects: &EffectPopulation,
    drift: &DriftModel,
    sigma: &DiffusionSpec,
    grid: TimeGrid,
    hurst: HurstIndex,
    x0: f64,
    fbm_seed: u64,
    settings: SimulationSettings,
) -> Result<TrajectoryBatch> {
    validate_inputs(drift, sigma, &grid, x0)?;
    let generator = FbmGenerator::new(grid, hurst)?;
    let sim = Simulator {
        generator: &generator,
        drift,
        sigma,
        x0,
        fbm_seed,
        settings,
    };
    let trajectories = sim.run(&effects.draws).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch {
        hurst,
        grid,
        drift: drift.clone(),
        sigma: sigma.clone(),
        x0,
        fbm_seed,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{mean, sample_variance};

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn effect_draws() {
        let e = draw_effects(10, 2.0, 0.0, 1).unwrap();
        assert!(e.draws.iter().all(|&d| d == 2.0));
        assert!(draw_effects(10, 0.0, -1.0, 1).is_err());
        assert!(draw_effects(0, 0.0, 1.0, 1).is_err());
        let a = draw_effects(100, 1.0, 1.0, 9).unwrap();
        let b = draw_effects(100, 1.0, 1.0, 9).unwrap();
        assert_eq!(a, b);

        let big = draw_effects(100_000, 1.0, 1.0, 4).unwrap();
        assert!((mean(&big.draws) - 1.0).abs() < 0.01);
        assert!((sample_variance(&big.draws) - 1.0).abs() < 0.02);
    }

    #[test]
    fn deterministic_paths() {
        let drift = DriftModel::constant(1.0);
        let inc = vec![0.3; 10];
        let still = euler_path(0, 1.5, 0.0, &drift, |_| 0.0, &inc, 0.1, 1e12).unwrap();
        assert!(still.iter().all(|&x| x == 1.5));
        let line = euler_path(0, 1.5, 2.0, &drift, |_| 0.0, &inc, 0.1, 1e12).unwrap();
        for (k, x) in line.iter().enumerate() {
            assert!((x - (1.5 + 2.0 * 0.1 * k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_names_trajectory_and_step() {
        let drift = DriftModel::affine(0.0, 1.0);
        let inc = vec![0.0; 100];
        let err = euler_path(4, 1.0, 100.0, &drift, |_| 1.0, &inc, 1.0, 1e12).unwrap_err();
        match err {
            Error::BlowUp { trajectory, step, .. } => {
                assert_eq!(trajectory, 4);
                assert_eq!(step, 6); // 101^6 > 1e12
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn constant_drift_mean_evolution() {
        let grid = TimeGrid::new(8.0, 80).unwrap();
        let effects = draw_effects(10_000, 1.0, 1.0, 21).unwrap();
        let sigma = DiffusionSpec::constant(1.0).unwrap();
        let batch = simulate_batch(
            &effects,
            &DriftModel::constant(1.0),
            &sigma,
            grid,
            h(0.7),
            0.5,
            22,
            SimulationSettings::default(),
        )
        .unwrap();
        let ends: Vec<f64> = batch.trajectories.iter().map(|t| *t.values().last().unwrap()).collect();
        let m = mean(&ends);
        let se = (sample_variance(&ends) / ends.len() as f64).sqrt();
        assert!((m - (0.5 + 8.0)).abs() < 5.0 * se, "mean {m}, se {se}");
        for (t, phi) in batch.trajectories.iter().zip(&effects.draws) {
            assert_eq!(t.effect_truth(), Some(*phi));
            assert_eq!(t.values()[0], 0.5);
        }
    }

    #[test]
    fn effects_independent_of_noise() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let effects = draw_effects(10_000, 0.0, 1.0, 5).unwrap();
        let gen = FbmGenerator::new(grid, h(0.8)).unwrap();
        let w_end: Vec<f64> = (0..10_000).map(|i| gen.path(6, i).values[32]).collect();
        let (mx, my) = (mean(&effects.draws), mean(&w_end));
        let cov: f64 = effects.draws.iter().zip(&w_end).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / 10_000.0;
        let corr = cov / (sample_variance(&effects.draws) * sample_variance(&w_end)).sqrt();
        assert!(corr.abs() < 4.0 / 100.0, "corr {corr}");
    }

    #[test]
    fn step_halving_shrinks_endpoint_change() {
        // Same fBm path refined consistently: coarse grids subsample the finest one.
        let hv = h(0.7);
        let fine = TimeGrid::new(2.0, 1600).unwrap();
        let gen = FbmGenerator::new(fine, hv).unwrap();
        let drift = DriftModel::affine(1.0, 1.0);
        let mut total_changes = [0.0f64; 3];
        for p in 0..10 {
            let w = gen.path(77, p).values;
            let ends: Vec<f64> = [200usize, 400, 800, 1600]
                .iter()
                .map(|&n| {
                    let stride = 1600 / n;
                    let inc: Vec<f64> = (0..n).map(|k| w[(k + 1) * stride] - w[k * stride]).collect();
                    *euler_path(0, 1.0, 0.8, &drift, |_| 1.0, &inc, 2.0 / n as f64, 1e12).unwrap().last().unwrap()
                })
                .collect();
            for j in 0..3 {
                total_changes[j] += (ends[j + 1] - ends[j]).abs();
            }
        }
        assert!(total_changes[1] < total_changes[0] && total_changes[2] < total_changes[1], "{total_changes:?}");
    }
}
