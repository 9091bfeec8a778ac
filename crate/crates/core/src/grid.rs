//! Hurst index and the uniform observation grid shared by every series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst index of the driving fractional Brownian motion.
///
/// Values in `[1/2, 1)` are representable. The estimation pipeline needs
/// `H > 1/2`; `H = 1/2` is kept for degeneration checks against the
/// classical Brownian case.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.5..1.0).contains(&value) {
            Ok(HurstIndex(value))
        } else {
            Err(Error::domain(format!("Hurst index must lie in [0.5, 1), got {value}")))
        }
    }

    /// Same as [`HurstIndex::new`] but rejects the Brownian endpoint.
    pub fn for_estimation(value: f64) -> Result<Self> {
        let h = Self::new(value)?;
        if h.is_brownian() {
            return Err(Error::domain("estimation requires H in (0.5, 1)"));
        }
        Ok(h)
    }

    pub fn brownian() -> Self {
        HurstIndex(0.5)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        HurstIndex::new(value)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// Uniform partition `t_k = k T / n`, `k = 0..=n`, of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    /// Grid with step `dt`; `dt` must divide `horizon` to within rounding.
    pub fn from_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!("step must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::domain(format!(
                "dt = {dt} does not divide T = {horizon} into an integer number of steps"
            )));
        }
        TimeGrid::new(horizon, steps as usize)
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`, computed as `k T / n` so that `t_n == T` exactly.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Coarser grid taking every `factor`-th point of this one.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::contract(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps
            )));
        }
        TimeGrid::new(self.horizon, self.steps / factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_range() {
        assert!(HurstIndex::new(0.5).is_ok());
        assert!(HurstIndex::new(0.99).is_ok());
        assert!(HurstIndex::new(1.0).is_err());
        assert!(HurstIndex::new(0.3).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert!(HurstIndex::for_estimation(0.5).is_err());
        assert!(HurstIndex::for_estimation(0.7).is_ok());
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let g = TimeGrid::new(8.0, 800).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(800), 8.0);
        let t = g.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((g.dt() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn from_step_requires_divisibility() {
        assert_eq!(TimeGrid::from_step(8.0, 0.01).unwrap().steps(), 800);
        assert_eq!(TimeGrid::from_step(5.0, 0.001).unwrap().steps(), 5000);
        assert!(TimeGrid::from_step(1.0, 0.3).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn coarsening_shares_points() {
        let fine = TimeGrid::new(1.0, 2000).unwrap();
        let coarse = fine.coarsen(8).unwrap();
        assert_eq!(coarse.steps(), 250);
        for k in 0..=250 {
            assert!((coarse.time(k) - fine.time(8 * k)).abs() <= f64::EPSILON);
        }
        assert!(fine.coarsen(3).is_err());
    }
}
