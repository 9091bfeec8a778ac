//! Known drift shapes `b(x)` multiplying the scalar random effect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift shape `b`, so that the drift of trajectory `i` is `φ_i b(x)`.
///
/// Every variant satisfies a linear growth bound `|b(x)| <= K (1 + |x|)`
/// with `K` from [`DriftModel::growth_constant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    /// `b(x) = value`.
    Constant { value: f64 },
    /// `b(x) = intercept + slope * x`.
    Affine { intercept: f64, slope: f64 },
    /// Piecewise-linear interpolation through `(knots[j], values[j])`,
    /// held constant outside the knot range.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl DriftModel {
    pub fn constant(value: f64) -> Self {
        DriftModel::Constant { value }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        DriftModel::Affine { intercept, slope }
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let model = DriftModel::Tabulated { knots, values };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DriftModel::Constant { value } if !value.is_finite() => {
                Err(Error::domain("constant drift must be finite"))
            }
            DriftModel::Affine { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                Err(Error::domain("affine drift coefficients must be finite"))
            }
            DriftModel::Tabulated { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::domain("tabulated drift needs matching, nonempty knots and values"));
                }
                if !knots.windows(2).all(|w| w[1] > w[0]) {
                    return Err(Error::domain("tabulated drift knots must be strictly increasing"));
                }
                if !knots.iter().chain(values).all(|v| v.is_finite()) {
                    return Err(Error::domain("tabulated drift entries must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftModel::Constant { value } => *value,
            DriftModel::Affine { intercept, slope } => intercept + slope * x,
            DriftModel::Tabulated { knots, values } => {
                let last = knots.len() - 1;
                if x <= knots[0] {
                    return values[0];
                }
                if x >= knots[last] {
                    return values[last];
                }
                let j = knots.partition_point(|&k| k <= x) - 1;
                let w = (x - knots[j]) / (knots[j + 1] - knots[j]);
                values[j] + w * (values[j + 1] - values[j])
            }
        }
    }

    /// A constant `K` with `|b(x)| <= K (1 + |x|)` for all `x`.
    pub fn growth_constant(&self) -> f64 {
        match self {
            DriftModel::Constant { value } => value.abs(),
            DriftModel::Affine { intercept, slope } => intercept.abs().max(slope.abs()),
            DriftModel::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriftModel::Constant { value } => *value == 0.0,
            DriftModel::Affine { intercept, slope } => *intercept == 0.0 && *slope == 0.0,
            DriftModel::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            DriftModel::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluation() {
        assert_eq!(DriftModel::constant(2.5).eval(-40.0), 2.5);
        assert_eq!(DriftModel::affine(1.0, 1.0).eval(3.0), 4.0);
        let t = DriftModel::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(9.0), 0.0);
    }

    #[test]
    fn tabulated_validation() {
        assert!(DriftModel::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DriftModel::tabulated(vec![0.0], vec![]).is_err());
        assert!(DriftModel::tabulated(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn growth_bound_holds(a in -10.0..10.0f64, b in -10.0..10.0f64, x in -1e6..1e6f64) {
            for m in [DriftModel::constant(a), DriftModel::affine(a, b),
                      DriftModel::tabulated(vec![-1.0, 0.5, 2.0], vec![a, b, a - b]).unwrap()] {
                prop_assert!(m.eval(x).abs() <= m.growth_constant() * (1.0 + x.abs()) * (1.0 + 1e-12));
            }
        }
    }
}
