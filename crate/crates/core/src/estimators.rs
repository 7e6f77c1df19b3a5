//! Encodings of quantities of interest as simplex-valued outcomes, and the
//! matching decodings of a market forecast into probability, mean and moment
//! estimates.

use serde::{Deserialize, Serialize};

use crate::environments::EnvironmentSpec;
use crate::{Error, Result, SimplexPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncodingSpec {
    /// Indicators of `events` mutually exclusive, exhaustive events.
    PartitionEvents { events: usize },
    /// `X^n = I(A^n) / N` for `N` possibly overlapping events plus a
    /// remainder component.
    OverlappingEvents { events: usize },
    /// A variable in `[offset, offset + width]`.
    BoundedMean { offset: f64, width: f64 },
    /// Powers `xi^n / N`, `n = 1..N`, of a variable in `[0, 1]`, plus a
    /// remainder component.
    Moments { order: usize },
}

/// Decoded estimate of the next-period quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Probabilities { values: Vec<f64>, clipped: Vec<bool> },
    Mean { value: f64 },
    Moments(MomentEstimate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// `m_n = N * lambda_bar^n`.
    pub moments: Vec<f64>,
    /// `m_2 - m_1^2`, when at least two moments are encoded.
    pub variance: Option<f64>,
    /// Set when the decoded variance is negative, which exact conditional
    /// moments never produce.
    pub negative_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClippedProbabilities {
    pub raw: Vec<f64>,
    pub values: Vec<f64>,
    pub clipped: Vec<bool>,
}

impl EncodingSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EncodingSpec::PartitionEvents { events: 0 }
            | EncodingSpec::OverlappingEvents { events: 0 }
            | EncodingSpec::Moments { order: 0 } => Err(Error::InvalidArgument("encoding needs N >= 1".into())),
            EncodingSpec::BoundedMean { offset, width } if !(offset.is_finite() && width > 0.0) => {
                Err(Error::InvalidArgument(format!("bounded mean needs a positive width, got {width}")))
            }
            _ => Ok(()),
        }
    }

    /// Dimension of the encoded outcome.
    pub fn dimension(&self) -> usize {
        match *self {
            EncodingSpec::PartitionEvents { events } => events,
            EncodingSpec::OverlappingEvents { events } => events + 1,
            EncodingSpec::BoundedMean { .. } => 2,
            EncodingSpec::Moments { order } => order + 1,
        }
    }

    /// The natural decoding of an environment's outcomes, if there is one.
    pub fn for_environment(spec: &EnvironmentSpec) -> Option<Self> {
        use crate::environments::BoundedMode;
        match spec {
            EnvironmentSpec::IidCategorical { probabilities, .. } => {
                Some(EncodingSpec::PartitionEvents { events: probabilities.len() })
            }
            EnvironmentSpec::Markov { emissions, .. } => {
                let vertices = emissions.iter().all(|e| e.iter().all(|&v| v == 0.0 || v == 1.0));
                vertices.then(|| EncodingSpec::PartitionEvents { events: emissions.first().map_or(0, Vec::len) })
            }
            EnvironmentSpec::BoundedVariable { mode: BoundedMode::Mean { offset, width }, .. } => {
                Some(EncodingSpec::BoundedMean { offset: *offset, width: *width })
            }
            EnvironmentSpec::BoundedVariable { mode: BoundedMode::Moments { order }, .. } => {
                Some(EncodingSpec::Moments { order: *order })
            }
            EnvironmentSpec::ProgressiveRevelation { .. } => Some(EncodingSpec::PartitionEvents { events: 2 }),
        }
    }

    pub fn decode(&self, forecast: &SimplexPoint) -> Result<Estimate> {
        Ok(match *self {
            EncodingSpec::PartitionEvents { events } => {
                let values = decode_partition(forecast, events)?;
                let clipped = vec![false; values.len()];
                Estimate::Probabilities { values, clipped }
            }
            EncodingSpec::OverlappingEvents { events } => {
                let p = decode_overlapping(forecast, events)?;
                Estimate::Probabilities { values: p.values, clipped: p.clipped }
            }
            EncodingSpec::BoundedMean { offset, width } => {
                Estimate::Mean { value: decode_bounded_mean(forecast, offset, width)? }
            }
            EncodingSpec::Moments { order } => Estimate::Moments(decode_moments(forecast, order)?),
        })
    }
}

impl Estimate {
    /// Named scalar columns for tabular output.
    pub fn columns(&self) -> Vec<(String, f64)> {
        match self {
            Estimate::Probabilities { values, .. } => {
                values.iter().enumerate().map(|(n, v)| (format!("prob_{}", n + 1), *v)).collect()
            }
            Estimate::Mean { value } => vec![("mean".into(), *value)],
            Estimate::Moments(m) => {
                let mut cols: Vec<(String, f64)> =
                    m.moments.iter().enumerate().map(|(n, v)| (format!("moment_{}", n + 1), *v)).collect();
                if let Some(v) = m.variance {
                    cols.push(("variance".into(), v));
                }
                cols
            }
        }
    }
}

fn check_len(forecast: &SimplexPoint, expected: usize) -> Result<()> {
    crate::simplex::check_dims(expected, forecast.dim())
}

pub fn encode_partition(event: usize, events: usize) -> Result<SimplexPoint> {
    if event >= events {
        return Err(Error::InvalidArgument(format!("event {event} out of range for {events} events")));
    }
    Ok(SimplexPoint::vertex(events, event))
}

pub fn encode_overlapping(occurred: &[bool]) -> Result<SimplexPoint> {
    let n = occurred.len() as f64;
    let mut x: Vec<f64> = occurred.iter().map(|&o| if o { 1.0 / n } else { 0.0 }).collect();
    x.push((1.0 - x.iter().sum::<f64>()).max(0.0));
    SimplexPoint::new(x)
}

pub fn encode_bounded_mean(xi: f64, offset: f64, width: f64) -> Result<SimplexPoint> {
    if !(width > 0.0) || !xi.is_finite() || xi < offset || xi > offset + width {
        return Err(Error::InvalidArgument(format!("{xi} outside [{offset}, {}]", offset + width)));
    }
    let first = ((xi - offset) / width).clamp(0.0, 1.0);
    SimplexPoint::new(vec![first, 1.0 - first])
}

pub fn encode_moments(xi: f64, order: usize) -> Result<SimplexPoint> {
    if order == 0 || !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("cannot encode {xi} with {order} moments")));
    }
    let n = order as f64;
    let mut x: Vec<f64> = (1..=order as i32).map(|k| xi.powi(k) / n).collect();
    x.push((1.0 - x.iter().sum::<f64>()).max(0.0));
    SimplexPoint::new(x)
}

/// The forecast itself, read as conditional probabilities of the events.
pub fn decode_partition(forecast: &SimplexPoint, events: usize) -> Result<Vec<f64>> {
    check_len(forecast, events)?;
    Ok(forecast.as_slice().to_vec())
}

/// `P(A^n) = N * lambda_bar^n`, clipped to `[0, 1]` with a flag.
pub fn decode_overlapping(forecast: &SimplexPoint, events: usize) -> Result<ClippedProbabilities> {
    check_len(forecast, events + 1)?;
    let raw: Vec<f64> = forecast.as_slice()[..events].iter().map(|v| events as f64 * v).collect();
    let clipped: Vec<bool> = raw.iter().map(|&v| v > 1.0).collect();
    let values = raw.iter().map(|v| v.min(1.0)).collect();
    Ok(ClippedProbabilities { raw, values, clipped })
}

/// `a + b * lambda_bar^1`, with `b` the width of the interval.
pub fn decode_bounded_mean(forecast: &SimplexPoint, offset: f64, width: f64) -> Result<f64> {
    check_len(forecast, 2)?;
    Ok(offset + width * forecast[0])
}

pub fn decode_moments(forecast: &SimplexPoint, order: usize) -> Result<MomentEstimate> {
    check_len(forecast, order + 1)?;
    let n = order as f64;
    let moments: Vec<f64> = forecast.as_slice()[..order].iter().map(|v| n * v).collect();
    let variance = (order >= 2).then(|| moments[1] - moments[0] * moments[0]);
    Ok(MomentEstimate { negative_variance: variance.is_some_and(|v| v < 0.0), moments, variance })
}
