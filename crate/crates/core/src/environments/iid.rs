use super::{sample_index, Environment, OutcomeDistribution};
use crate::rng::Stream;
use crate::{Error, Result, SimplexPoint};

/// I.i.d. indicators of a partition: each round exactly one of `N` events
/// occurs, event `n` with probability `p^n`.
pub struct IidCategorical {
    probabilities: SimplexPoint,
    epsilon: f64,
    stream: Stream,
}

impl IidCategorical {
    /// `min_support` is a declared lower bound on every probability; without
    /// it the smallest probability is used, which must be positive.
    pub fn new(probabilities: Vec<f64>, min_support: Option<f64>, stream: Stream) -> Result<Self> {
        let probabilities = SimplexPoint::new(probabilities)?;
        let smallest = probabilities.min_component();
        if smallest <= 0.0 {
            return Err(Error::Environment(
                "every outcome probability must be bounded away from zero".into(),
            ));
        }
        let epsilon = match min_support {
            Some(e) if !(e > 0.0) => {
                return Err(Error::Environment(format!("declared floor {e} must be positive")))
            }
            Some(e) if smallest < e => {
                return Err(Error::Environment(format!(
                    "probability {smallest} is below the declared floor {e}"
                )))
            }
            Some(e) => e,
            None => smallest,
        };
        Ok(Self { probabilities, epsilon, stream })
    }
}

impl Environment for IidCategorical {
    fn dimension(&self) -> usize {
        self.probabilities.dim()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn oracle(&self) -> SimplexPoint {
        self.probabilities.clone()
    }

    fn outcomes(&self) -> Option<OutcomeDistribution> {
        let n = self.dimension();
        let atoms = self
            .probabilities
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, SimplexPoint::vertex(n, i)))
            .collect();
        OutcomeDistribution::new(atoms).ok()
    }

    fn advance(&mut self) -> SimplexPoint {
        let i = sample_index(self.probabilities.as_slice(), &mut self.stream);
        SimplexPoint::vertex(self.dimension(), i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn oracle_is_constant() {
        let mut env = IidCategorical::new(vec![0.6, 0.4], None, substream(3, 0, 0)).unwrap();
        for _ in 0..10 {
            assert_eq!(env.oracle().as_slice(), &[0.6, 0.4]);
            env.advance();
        }
        assert_eq!(env.epsilon(), 0.4);
        let mean = env.outcomes().unwrap().mean();
        assert!((mean[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn fair_coin_frequency_within_binomial_band() {
        let mut env = IidCategorical::new(vec![0.5, 0.5], None, substream(11, 0, 0)).unwrap();
        let draws = 10_000;
        let heads = (0..draws).filter(|_| env.advance()[0] == 1.0).count() as f64;
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((heads - 5_000.0).abs() <= 3.0 * sigma, "heads {heads}");
    }

    #[test]
    fn empirical_mean_matches_oracle() {
        let p = vec![0.2, 0.3, 0.5];
        let mut env = IidCategorical::new(p.clone(), None, substream(5, 0, 0)).unwrap();
        let draws = 100_000;
        let mut counts = [0.0; 3];
        for _ in 0..draws {
            let x = env.advance();
            for n in 0..3 {
                counts[n] += x[n];
            }
        }
        for n in 0..3 {
            let sigma = (p[n] * (1.0 - p[n]) / draws as f64).sqrt();
            assert!((counts[n] / draws as f64 - p[n]).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn degenerate_probabilities_are_rejected() {
        assert!(IidCategorical::new(vec![1.0, 0.0], None, substream(1, 0, 0)).is_err());
        assert!(IidCategorical::new(vec![0.6, 0.4], Some(0.45), substream(1, 0, 0)).is_err());
        assert!(IidCategorical::new(vec![0.6, 0.4], Some(0.0), substream(1, 0, 0)).is_err());
        assert!(IidCategorical::new(vec![0.6, 0.4], Some(0.1), substream(1, 0, 0)).is_ok());
    }
}
