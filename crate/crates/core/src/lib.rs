//! Simulation of fBm-driven SDEs with Gaussian random drift effects and
//! exact maximum-likelihood estimation of the effect population.

pub mod drift;
pub mod error;
pub mod experiment;
pub mod fbm;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod mle;
pub mod numeric;
pub mod rng;
pub mod sde;
mod special;
pub mod statistics;

pub use drift::DriftModel;
pub use error::{Error, Result};
pub use fbm::{FbmGenerator, FbmMethod, FbmPath};
pub use grid::{HurstIndex, TimeGrid};
pub use kernel::{DiffusionSpec, KernelTable, Observation, TransformParts, WeightedSeries};
pub use mle::{EffectEstimate, SolverConfig, ThetaParams};
pub use sde::{Simulator, Trajectory, TrajectoryBatch};
pub use statistics::{StatsBatch, SufficientStats};
