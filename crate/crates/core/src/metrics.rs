//! Evaluation metrics and reference infection-rate curves.

use serde::{Deserialize, Serialize};

use crate::bootstrap::ConfidenceBand;
use crate::error::{invalid, Result};
use crate::likelihood::ParameterVector;
use crate::sir::InfectionRate;

/// A known infection-rate curve used to generate and score simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TruthFunction {
    Constant { value: f64 },
    /// `values[k]` holds on `[breaks[k-1], breaks[k])`.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    /// `low + (high − low) / (1 + exp(−(t − midpoint) / scale))`.
    Logistic { low: f64, high: f64, midpoint: f64, scale: f64 },
    /// Linear interpolation, constant beyond the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl TruthFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            TruthFunction::Constant { value } => value.is_finite() && *value >= 0.0,
            TruthFunction::Steps { breaks, values } => {
                values.len() == breaks.len() + 1
                    && breaks.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
            TruthFunction::Logistic { low, high, scale, midpoint } => {
                *low >= 0.0 && *high >= 0.0 && *scale > 0.0 && midpoint.is_finite() && high.is_finite()
            }
            TruthFunction::Tabulated { times, values } => {
                !times.is_empty()
                    && times.len() == values.len()
                    && times.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("malformed truth function"))
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            TruthFunction::Constant { value } => *value,
            TruthFunction::Steps { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
            TruthFunction::Logistic { low, high, midpoint, scale } => {
                low + (high - low) / (1.0 + (-(t - midpoint) / scale).exp())
            }
            TruthFunction::Tabulated { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    values[k - 1] + w * (values[k] - values[k - 1])
                }
            }
        }
    }

    pub fn on_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.evaluate(t)).collect()
    }
}

impl InfectionRate for TruthFunction {
    fn value(&self, t: f64) -> f64 {
        self.evaluate(t)
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        match self {
            TruthFunction::Constant { value } => *value,
            TruthFunction::Logistic { .. } => self.evaluate(a).max(self.evaluate(b)),
            TruthFunction::Steps { breaks, values } => {
                let first = breaks.partition_point(|&x| x <= a);
                let last = breaks.partition_point(|&x| x <= b);
                values[first..=last].iter().copied().fold(0.0, f64::max)
            }
            TruthFunction::Tabulated { times, values } => {
                let inside = times.iter().zip(values).filter(|(t, _)| **t >= a && **t <= b).map(|(_, v)| *v);
                inside.fold(self.evaluate(a).max(self.evaluate(b)), f64::max)
            }
        }
    }
}

/// Reference scenarios on a 70-day horizon.
///
/// Scenario 1 is the constant rate 0.3. Scenarios 2 to 5 are stand-in shapes
/// (increasing, decreasing, up then down, smoothly increasing); their
/// parameters are chosen here and are not taken from any published curve.
pub fn scenario(id: u8) -> Option<TruthFunction> {
    let steps = |breaks: &[f64], values: &[f64]| TruthFunction::Steps {
        breaks: breaks.to_vec(),
        values: values.to_vec(),
    };
    match id {
        1 => Some(TruthFunction::Constant { value: 0.3 }),
        2 => Some(steps(&[20.0, 40.0], &[0.2, 0.3, 0.45])),
        3 => Some(steps(&[15.0, 35.0], &[0.5, 0.3, 0.15])),
        4 => Some(steps(&[20.0, 40.0], &[0.25, 0.45, 0.15])),
        5 => Some(TruthFunction::Logistic {
            low: 0.15,
            high: 0.4,
            midpoint: 35.0,
            scale: 6.0,
        }),
        _ => None,
    }
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
        .sum()
}

/// Trapezoid approximation of `∫ (β̂ − β)² dt` over `grid`.
pub fn imse(estimate: &[f64], truth: &TruthFunction, grid: &[f64]) -> Result<f64> {
    if estimate.len() != grid.len() || grid.len() < 2 {
        return Err(invalid("estimate must have one value per grid point (at least two)"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("grid must be strictly increasing"));
    }
    let sq: Vec<f64> = estimate
        .iter()
        .zip(grid)
        .map(|(e, &t)| (e - truth.evaluate(t)).powi(2))
        .collect();
    Ok(trapezoid(grid, &sq))
}

/// Fraction of bands containing the truth, per timestamp.
pub fn coverage(bands: &[ConfidenceBand], truth: &TruthFunction) -> Result<Vec<f64>> {
    let first = bands.first().ok_or_else(|| invalid("no bands"))?;
    if bands.iter().any(|b| b.times != first.times) {
        return Err(invalid("bands must share a time grid"));
    }
    Ok(first
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let v = truth.evaluate(t);
            bands.iter().filter(|b| b.contains(k, v)).count() as f64 / bands.len() as f64
        })
        .collect())
}

/// Reproduction number `β(t) / γ` on `grid`.
pub fn r0_curve(theta: &ParameterVector, grid: &[f64]) -> Result<Vec<f64>> {
    if !(theta.gamma() > 0.0) {
        return Err(invalid("reproduction number undefined for a zero recovery rate"));
    }
    grid.iter().map(|&t| Ok(theta.beta(t)? / theta.gamma())).collect()
}
