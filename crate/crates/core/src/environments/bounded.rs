use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_index, Environment, OutcomeDistribution};
use crate::estimators::{encode_bounded_mean, encode_moments};
use crate::rng::Stream;
use crate::{Error, Result, SimplexPoint};

/// Law of the i.i.d. bounded variable `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiDistribution {
    Atoms { values: Vec<f64>, probabilities: Vec<f64> },
    Uniform { low: f64, high: f64 },
}

impl XiDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            XiDistribution::Atoms { values, probabilities } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err(Error::Environment("atoms need matching, non-empty values and probabilities".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Environment("atom values must be finite".into()));
                }
                SimplexPoint::new(probabilities.clone())?;
            }
            XiDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::Environment(format!("uniform law needs low < high, got [{low}, {high}]")));
                }
            }
        }
        Ok(())
    }

    fn support(&self) -> (f64, f64) {
        match self {
            XiDistribution::Atoms { values, .. } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            XiDistribution::Uniform { low, high } => (*low, *high),
        }
    }

    /// `E xi^k`.
    fn moment(&self, k: u32) -> f64 {
        match self {
            XiDistribution::Atoms { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| p * v.powi(k as i32)).sum()
            }
            XiDistribution::Uniform { low, high } => {
                let k1 = (k + 1) as i32;
                (high.powi(k1) - low.powi(k1)) / ((k + 1) as f64 * (high - low))
            }
        }
    }

    fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            XiDistribution::Atoms { values, probabilities } => values[sample_index(probabilities, stream)],
            XiDistribution::Uniform { low, high } => low + (high - low) * stream.random::<f64>(),
        }
    }
}

/// How `xi` is mapped onto the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundedMode {
    /// `X = ((xi - a) / b, 1 - (xi - a) / b)` for `xi` in `[a, a + b]`.
    Mean { offset: f64, width: f64 },
    /// `X^n = xi^n / N` for `n = 1..N`, plus the remainder, for `xi` in `[0, 1]`.
    Moments { order: usize },
}

impl BoundedMode {
    fn interval(&self) -> (f64, f64) {
        match self {
            BoundedMode::Mean { offset, width } => (*offset, offset + width),
            BoundedMode::Moments { .. } => (0.0, 1.0),
        }
    }

    fn encode(&self, xi: f64) -> Result<SimplexPoint> {
        match self {
            BoundedMode::Mean { offset, width } => encode_bounded_mean(xi, *offset, *width),
            BoundedMode::Moments { order } => encode_moments(xi, *order),
        }
    }
}

/// I.i.d. draws of a bounded variable, encoded so that the market forecast
/// estimates its conditional mean or moments.
pub struct BoundedVariable {
    distribution: XiDistribution,
    mode: BoundedMode,
    oracle: SimplexPoint,
    epsilon: f64,
    stream: Stream,
}

impl BoundedVariable {
    pub fn new(distribution: XiDistribution, mode: BoundedMode, stream: Stream) -> Result<Self> {
        distribution.validate()?;
        match mode {
            BoundedMode::Mean { offset, width } if !(offset.is_finite() && width.is_finite() && width > 0.0) => {
                return Err(Error::Environment(format!("mean encoding needs a positive width, got {width}")));
            }
            BoundedMode::Moments { order: 0 } => {
                return Err(Error::Environment("moment order must be at least 1".into()));
            }
            _ => {}
        }
        let (lo, hi) = mode.interval();
        let (min, max) = distribution.support();
        if min < lo || max > hi {
            return Err(Error::Environment(format!("xi takes values in [{min}, {max}], outside [{lo}, {hi}]")));
        }

        let oracle = match &mode {
            BoundedMode::Mean { offset, width } => {
                let first = (distribution.moment(1) - offset) / width;
                SimplexPoint::new(vec![first, 1.0 - first])?
            }
            BoundedMode::Moments { order } => {
                let n = *order;
                let mut mu: Vec<f64> = (1..=n as u32).map(|k| distribution.moment(k) / n as f64).collect();
                mu.push(1.0 - mu.iter().sum::<f64>());
                SimplexPoint::new(mu.into_iter().map(|v| v.max(0.0)).collect())?
            }
        };
        let epsilon = oracle.min_component();
        if epsilon <= 0.0 {
            return Err(Error::Environment(format!(
                "encoded conditional expectation {:?} has a zero component",
                oracle.as_slice()
            )));
        }
        Ok(Self { distribution, mode, oracle, epsilon, stream })
    }
}

impl Environment for BoundedVariable {
    fn dimension(&self) -> usize {
        self.oracle.dim()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn oracle(&self) -> SimplexPoint {
        self.oracle.clone()
    }

    fn outcomes(&self) -> Option<OutcomeDistribution> {
        match &self.distribution {
            XiDistribution::Atoms { values, probabilities } => {
                let atoms = values
                    .iter()
                    .zip(probabilities)
                    .map(|(&v, &p)| Ok((p, self.mode.encode(v)?)))
                    .collect::<Result<Vec<_>>>()
                    .ok()?;
                OutcomeDistribution::new(atoms).ok()
            }
            XiDistribution::Uniform { .. } => None,
        }
    }

    fn advance(&mut self) -> SimplexPoint {
        let xi = self.distribution.sample(&mut self.stream);
        self.mode.encode(xi).expect("support validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn atoms(values: &[f64], probabilities: &[f64]) -> XiDistribution {
        XiDistribution::Atoms { values: values.to_vec(), probabilities: probabilities.to_vec() }
    }

    #[test]
    fn degenerate_mean_mode() {
        let mut env = BoundedVariable::new(
            atoms(&[0.5], &[1.0]),
            BoundedMode::Mean { offset: 0.0, width: 1.0 },
            substream(1, 0, 0),
        )
        .unwrap();
        assert_eq!(env.oracle().as_slice(), &[0.5, 0.5]);
        for _ in 0..5 {
            assert_eq!(env.advance().as_slice(), &[0.5, 0.5]);
        }
    }

    #[test]
    fn two_point_moments() {
        let env = BoundedVariable::new(atoms(&[0.2, 0.8], &[0.5, 0.5]), BoundedMode::Moments { order: 2 }, substream(1, 0, 0))
            .unwrap();
        let mu = env.oracle();
        let expected = [0.25, 0.17, 0.58];
        for n in 0..3 {
            assert!((mu[n] - expected[n]).abs() < 1e-12, "{mu:?}");
        }
        let mean = env.outcomes().unwrap().mean();
        for n in 0..3 {
            assert!((mean[n] - mu[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn support_violations_are_rejected() {
        let mean = BoundedMode::Mean { offset: 0.0, width: 1.0 };
        assert!(BoundedVariable::new(atoms(&[0.5, 1.2], &[0.5, 0.5]), mean.clone(), substream(1, 0, 0)).is_err());
        // an endpoint-degenerate variable leaves a zero oracle component
        assert!(BoundedVariable::new(atoms(&[1.0], &[1.0]), mean.clone(), substream(1, 0, 0)).is_err());
        assert!(BoundedVariable::new(atoms(&[0.5], &[1.0]), BoundedMode::Mean { offset: 0.0, width: 0.0 }, substream(1, 0, 0)).is_err());
        assert!(BoundedVariable::new(atoms(&[0.5], &[1.0]), BoundedMode::Moments { order: 0 }, substream(1, 0, 0)).is_err());
        assert!(BoundedVariable::new(atoms(&[1.5], &[1.0]), BoundedMode::Moments { order: 2 }, substream(1, 0, 0)).is_err());
    }

    #[test]
    fn shifted_interval_mean_mode() {
        let env = BoundedVariable::new(
            atoms(&[2.0, 5.0], &[0.5, 0.5]),
            BoundedMode::Mean { offset: 2.0, width: 3.0 },
            substream(1, 0, 0),
        )
        .unwrap();
        assert!((env.oracle()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_law_is_not_enumerable_but_has_exact_oracle() {
        let mut env = BoundedVariable::new(
            XiDistribution::Uniform { low: 0.0, high: 1.0 },
            BoundedMode::Moments { order: 2 },
            substream(4, 0, 0),
        )
        .unwrap();
        assert!(env.outcomes().is_none());
        let mu = env.oracle();
        assert!((mu[0] - 0.25).abs() < 1e-15 && (mu[1] - 1.0 / 6.0).abs() < 1e-15);
        let draws = 100_000;
        let mut first = 0.0;
        for _ in 0..draws {
            first += env.advance()[0];
        }
        // X^1 = xi / 2 with xi uniform: variance 1/48
        let sigma = (1.0 / 48.0 / draws as f64).sqrt();
        assert!((first / draws as f64 - 0.25).abs() <= 4.0 * sigma);
    }
}
