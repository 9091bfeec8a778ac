//! TOML experiment configuration.
//!
//! Every field has a default, so an empty file is a valid configuration
//! (the constant-drift example at H = 0.7, μ = 1, σ₀² = 1, N = 50, T = 8).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::grid::{HurstIndex, TimeGrid};
use crate::kernel::DiffusionSpec;
use crate::mle::SolverConfig;
use crate::sde::{SimulationSettings, DEFAULT_BLOWUP_GUARD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hurst: f64,
    pub drift: DriftModel,
    pub sigma: DiffusionSpec,
    pub x0: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hurst: 0.7,
            drift: DriftModel::constant(1.0),
            sigma: DiffusionSpec::Constant { value: 1.0 },
            x0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { horizon: 8.0, dt: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSection {
    /// Trajectories per replication.
    pub trajectories: usize,
    pub mu: f64,
    pub sigma0_sq: f64,
}

impl Default for PopulationSection {
    fn default() -> Self {
        PopulationSection {
            trajectories: 50,
            mu: 1.0,
            sigma0_sq: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Joint maximum likelihood in `(μ, σ₀²)`.
    Joint,
    /// `Σu / Σv`, for populations without dispersion.
    FixedEffect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub replications: usize,
    pub master_seed: u64,
    pub estimator: Estimator,
    pub blowup_guard: f64,
    /// Smallest surviving fraction of a replication's trajectories.
    pub min_survival: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replications: 20,
            master_seed: 20_240_417,
            estimator: Estimator::Joint,
            blowup_guard: DEFAULT_BLOWUP_GUARD,
            min_survival: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Step counts, coarse to fine; each must divide the finest.
    pub levels: Vec<usize>,
    pub paths: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            levels: vec![250, 500, 1000, 2000],
            paths: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub population: PopulationSection,
    pub run: RunSection,
    pub solver: SolverConfig,
    pub output: OutputSection,
    pub convergence: ConvergenceSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn hurst(&self) -> Result<HurstIndex> {
        HurstIndex::for_estimation(self.model.hurst).map_err(config_error)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_step(self.grid.horizon, self.grid.dt).map_err(config_error)
    }

    pub fn simulation_settings(&self) -> SimulationSettings {
        SimulationSettings {
            blowup_guard: self.run.blowup_guard,
        }
    }

    /// Checks shared by every command.
    fn validate_model(&self) -> Result<()> {
        self.hurst()?;
        self.model.drift.validate().map_err(config_error)?;
        self.model.sigma.validate().map_err(config_error)?;
        if !self.model.x0.is_finite() {
            return Err(Error::Config("model.x0 must be finite".into()));
        }
        let p = &self.population;
        if p.trajectories == 0 {
            return Err(Error::Config("population.trajectories must be at least 1".into()));
        }
        if !p.mu.is_finite() || !(p.sigma0_sq >= 0.0 && p.sigma0_sq.is_finite()) {
            return Err(Error::Config("population needs finite mu and sigma0_sq >= 0".into()));
        }
        if !(self.run.blowup_guard > 0.0) {
            return Err(Error::Config("run.blowup_guard must be positive".into()));
        }
        Ok(())
    }

    /// Checks for `simulate` and `experiment`.
    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        let grid = self.time_grid()?;
        self.model.sigma.check_grid(&grid).map_err(config_error)?;
        if self.run.replications == 0 {
            return Err(Error::Config("run.replications must be at least 1".into()));
        }
        if !(self.run.min_survival > 0.0 && self.run.min_survival <= 1.0) {
            return Err(Error::Config("run.min_survival must lie in (0, 1]".into()));
        }
        if self.run.estimator == Estimator::Joint && self.population.trajectories < 2 {
            return Err(Error::Config("joint estimation needs at least 2 trajectories".into()));
        }
        Ok(())
    }

    /// Checks for `converge`; the grid step is taken from the levels.
    pub fn validate_convergence(&self) -> Result<()> {
        self.validate_model()?;
        if !(self.grid.horizon > 0.0 && self.grid.horizon.is_finite()) {
            return Err(Error::Config("grid.horizon must be positive".into()));
        }
        if matches!(self.model.sigma, DiffusionSpec::Tabulated { .. }) {
            return Err(Error::Config("rate studies need a constant diffusion coefficient".into()));
        }
        let levels = &self.convergence.levels;
        if levels.len() < 3 {
            return Err(Error::Config(format!(
                "convergence.levels needs at least 3 entries, got {}",
                levels.len()
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] == 0 {
            return Err(Error::Config("convergence.levels must be positive and increasing".into()));
        }
        let finest = *levels.last().unwrap_or(&0);
        if levels.iter().any(|m| finest % m != 0) {
            return Err(Error::Config("every convergence level must divide the finest one".into()));
        }
        if self.convergence.paths == 0 {
            return Err(Error::Config("convergence.paths must be at least 1".into()));
        }
        Ok(())
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
        c.validate_convergence().unwrap();
        assert_eq!(c.time_grid().unwrap().steps(), 800);
    }

    #[test]
    fn printed_defaults_parse_back() {
        let c = ExperimentConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn affine_drift_from_toml() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            [model]
            hurst = 0.9
            drift = { kind = "affine", intercept = 1.0, slope = 1.0 }
            [population]
            mu = 5.0
            [run]
            estimator = "fixed_effect"
            blowup_guard = 1e100
            "#,
        )
        .unwrap();
        assert_eq!(c.model.drift, DriftModel::affine(1.0, 1.0));
        assert_eq!(c.population.mu, 5.0);
        assert_eq!(c.population.sigma0_sq, 1.0);
        assert_eq!(c.run.estimator, Estimator::FixedEffect);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        let bad = |text: &str| matches!(ExperimentConfig::from_toml_str(text).and_then(|c| c.validate()), Err(Error::Config(_)));
        assert!(bad("[model]\nhurst = 0.5"));
        assert!(bad("[model]\nhurst = 1.0"));
        assert!(bad("[grid]\ndt = 0.03"));
        assert!(bad("[run]\nreplications = 0"));
        assert!(bad("[run]\nmin_survival = 1.5"));
        assert!(bad("[population]\nsigma0_sq = -1.0"));
        assert!(bad("[population]\ntrajectories = 1"));
        assert!(bad("[model]\nunknown_key = 3"));
        let conv = |text: &str| ExperimentConfig::from_toml_str(text).unwrap().validate_convergence().is_err();
        assert!(conv("[convergence]\nlevels = [250, 500]"));
        assert!(conv("[convergence]\nlevels = [300, 500, 1000]"));
        assert!(conv("[convergence]\nlevels = [500, 250, 1000]"));
    }
}
