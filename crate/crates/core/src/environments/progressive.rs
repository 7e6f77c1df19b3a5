use rand::Rng;

use super::{FlowEnvironment, OutcomeDistribution};
use crate::rng::Stream;
use crate::{Error, Result, SimplexPoint};

/// A two-outcome round decided by `L` biased coins that are revealed one per
/// sub-step. The outcome is `e_1` when every coin shows heads, `e_2`
/// otherwise; with probability `mix` the round is instead decided by an
/// independent fair coin that is never revealed early, which keeps every
/// conditional probability at least `mix / 2`.
pub struct ProgressiveRevelation {
    coins: usize,
    bias: f64,
    mix: f64,
    heads: Vec<bool>,
    mixed: bool,
    fair_heads: bool,
    stream: Stream,
}

impl ProgressiveRevelation {
    pub fn new(coins: usize, bias: f64, mix: f64, stream: Stream) -> Result<Self> {
        if coins == 0 {
            return Err(Error::Environment("at least one coin is required".into()));
        }
        if !(bias > 0.0 && bias < 1.0) {
            return Err(Error::Environment(format!("coin bias {bias} must lie in (0, 1)")));
        }
        if !(mix > 0.0 && mix <= 1.0) {
            return Err(Error::Environment(format!(
                "mixing probability {mix} must lie in (0, 1]; without it the oracle reaches zero"
            )));
        }
        Ok(Self { coins, bias, mix, heads: vec![true; coins], mixed: false, fair_heads: false, stream })
    }

    /// Probability of `e_1` once the first `revealed` coins are known.
    fn first_probability(&self, revealed: usize) -> f64 {
        let revealed = revealed.min(self.coins);
        let alive = self.heads[..revealed].iter().all(|&h| h);
        let coin_part = if alive { self.bias.powi((self.coins - revealed) as i32) } else { 0.0 };
        (1.0 - self.mix) * coin_part + self.mix * 0.5
    }
}

impl FlowEnvironment for ProgressiveRevelation {
    fn dimension(&self) -> usize {
        2
    }

    fn epsilon(&self) -> f64 {
        self.mix * 0.5
    }

    fn required_substeps(&self) -> Option<usize> {
        Some(self.coins)
    }

    fn begin_round(&mut self, _substeps: usize) {
        for h in self.heads.iter_mut() {
            *h = self.stream.random::<f64>() < self.bias;
        }
        self.mixed = self.stream.random::<f64>() < self.mix;
        self.fair_heads = self.stream.random::<f64>() < 0.5;
    }

    fn substep_oracle(&self, j: usize) -> SimplexPoint {
        let p = self.first_probability(j);
        SimplexPoint::new(vec![p, 1.0 - p]).expect("probability in [0, 1]")
    }

    fn substep_signal(&self, j: usize) -> Vec<f64> {
        self.heads[..j.min(self.coins)].iter().map(|&h| if h { 1.0 } else { 0.0 }).collect()
    }

    fn substep_outcomes(&self, j: usize) -> Option<OutcomeDistribution> {
        let p = self.first_probability(j);
        OutcomeDistribution::new(vec![(p, SimplexPoint::vertex(2, 0)), (1.0 - p, SimplexPoint::vertex(2, 1))]).ok()
    }

    fn finish_round(&mut self) -> SimplexPoint {
        let first = if self.mixed { self.fair_heads } else { self.heads.iter().all(|&h| h) };
        SimplexPoint::vertex(2, if first { 0 } else { 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    /// P(outcome e_1 | first `revealed` coins) by enumerating every coin,
    /// mixing and fair-coin configuration.
    fn enumerate_first_probability(coins: usize, q: f64, mix: f64, revealed_heads: &[bool]) -> f64 {
        let mut joint = 0.0;
        let mut marginal = 0.0;
        for mask in 0..(1u32 << coins) {
            let heads: Vec<bool> = (0..coins).map(|i| mask & (1 << i) != 0).collect();
            if heads[..revealed_heads.len()] != *revealed_heads {
                continue;
            }
            let p_coins: f64 = heads.iter().map(|&h| if h { q } else { 1.0 - q }).product();
            for (mixed, p_mixed) in [(true, mix), (false, 1.0 - mix)] {
                for (fair, p_fair) in [(true, 0.5), (false, 0.5)] {
                    let p = p_coins * p_mixed * p_fair;
                    let first = if mixed { fair } else { heads.iter().all(|&h| h) };
                    marginal += p;
                    if first {
                        joint += p;
                    }
                }
            }
        }
        joint / marginal
    }

    #[test]
    fn round_start_oracle_matches_enumeration() {
        let mut env = ProgressiveRevelation::new(2, 0.9, 0.01, substream(1, 0, 0)).unwrap();
        env.begin_round(2);
        let mu = env.substep_oracle(0);
        let by_hand = 0.99 * 0.81 + 0.01 * 0.5;
        assert!((mu[0] - by_hand).abs() < 1e-15);
        assert!((mu[0] - enumerate_first_probability(2, 0.9, 0.01, &[])).abs() < 1e-12);
    }

    #[test]
    fn oracle_follows_revealed_coins() {
        let mut env = ProgressiveRevelation::new(3, 0.7, 0.05, substream(2, 0, 0)).unwrap();
        for _ in 0..50 {
            env.begin_round(3);
            for j in 0..3 {
                let revealed: Vec<bool> = env.substep_signal(j).iter().map(|&s| s == 1.0).collect();
                assert_eq!(revealed.len(), j);
                let expected = enumerate_first_probability(3, 0.7, 0.05, &revealed);
                assert!((env.substep_oracle(j)[0] - expected).abs() < 1e-12);
                assert!(env.substep_oracle(j).min_component() >= env.epsilon() - 1e-15);
            }
            env.finish_round();
        }
    }

    #[test]
    fn revealed_tail_collapses_to_floor() {
        let mut env = ProgressiveRevelation::new(2, 0.5, 0.02, substream(3, 0, 0)).unwrap();
        loop {
            env.begin_round(2);
            if !env.heads[0] {
                break;
            }
        }
        assert!((env.substep_oracle(1)[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn single_coin_behaves_like_iid_categorical() {
        let (q, mix) = (0.8, 0.1);
        let mut env = ProgressiveRevelation::new(1, q, mix, substream(4, 0, 0)).unwrap();
        let mixed = (1.0 - mix) * q + mix * 0.5;
        let draws = 100_000;
        let mut hits = 0.0;
        for _ in 0..draws {
            env.begin_round(1);
            assert!((env.substep_oracle(0)[0] - mixed).abs() < 1e-15);
            hits += env.finish_round()[0];
        }
        let sigma = (mixed * (1.0 - mixed) / draws as f64).sqrt();
        assert!((hits / draws as f64 - mixed).abs() <= 4.0 * sigma);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ProgressiveRevelation::new(0, 0.5, 0.1, substream(1, 0, 0)).is_err());
        assert!(ProgressiveRevelation::new(2, 1.0, 0.1, substream(1, 0, 0)).is_err());
        assert!(ProgressiveRevelation::new(2, 0.5, 0.0, substream(1, 0, 0)).is_err());
    }
}
