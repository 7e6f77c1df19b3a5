//! Generators of the outcome sequence, each with an exact oracle for the
//! next-period conditional expectation and, where the outcome space is
//! finite, the full conditional distribution.

mod bounded;
mod iid;
mod markov;
mod progressive;

pub use bounded::{BoundedMode, BoundedVariable, XiDistribution};
pub use iid::IidCategorical;
pub use markov::{MarkovEnvironment, MarkovSpec};
pub use progressive::ProgressiveRevelation;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;
use crate::{Error, Result, SimplexPoint};

/// A finitely supported distribution over simplex points.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    atoms: Vec<(f64, SimplexPoint)>,
}

impl OutcomeDistribution {
    pub fn new(atoms: Vec<(f64, SimplexPoint)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::Environment("outcome distribution has no atoms".into()));
        };
        let dim = first.1.dim();
        let mut total = 0.0;
        for (p, x) in &atoms {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::Environment(format!("atom probability {p} is invalid")));
            }
            crate::simplex::check_dims(dim, x.dim())?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Environment(format!("atom probabilities sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, SimplexPoint)] {
        &self.atoms
    }

    /// `sum_atoms p * x`, componentwise.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.atoms[0].1.dim();
        let mut mean = vec![0.0; dim];
        for (p, x) in &self.atoms {
            for (m, &v) in mean.iter_mut().zip(x.as_slice()) {
                *m += p * v;
            }
        }
        mean
    }
}

/// A discrete-time outcome generator.
///
/// `oracle` and `outcomes` describe the conditional law of the outcome that
/// the next call to `advance` will produce.
pub trait Environment: Send {
    fn dimension(&self) -> usize;

    /// Lower bound on every oracle component.
    fn epsilon(&self) -> f64;

    /// State that strategies are allowed to observe, if any.
    fn observable_state(&self) -> Option<usize> {
        None
    }

    fn oracle(&self) -> SimplexPoint;

    /// The conditional outcome distribution, when it is finite.
    fn outcomes(&self) -> Option<OutcomeDistribution>;

    /// Samples the next outcome and moves to the next period.
    fn advance(&mut self) -> SimplexPoint;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn epsilon(&self) -> f64 {
        (**self).epsilon()
    }
    fn observable_state(&self) -> Option<usize> {
        (**self).observable_state()
    }
    fn oracle(&self) -> SimplexPoint {
        (**self).oracle()
    }
    fn outcomes(&self) -> Option<OutcomeDistribution> {
        (**self).outcomes()
    }
    fn advance(&mut self) -> SimplexPoint {
        (**self).advance()
    }
}

/// An outcome generator that may reveal information inside a round.
pub trait FlowEnvironment: Send {
    fn dimension(&self) -> usize;

    fn epsilon(&self) -> f64;

    fn observable_state(&self) -> Option<usize> {
        None
    }

    /// Number of sub-steps the environment's signals are laid out for.
    fn required_substeps(&self) -> Option<usize> {
        None
    }

    /// Draws the randomness of the coming round.
    fn begin_round(&mut self, substeps: usize);

    /// Conditional expectation of the round's outcome given everything
    /// revealed before sub-step `j`.
    fn substep_oracle(&self, j: usize) -> SimplexPoint;

    /// Public information revealed between sub-steps `j - 1` and `j`.
    fn substep_signal(&self, j: usize) -> Vec<f64>;

    fn substep_outcomes(&self, j: usize) -> Option<OutcomeDistribution>;

    /// Reveals the round's outcome.
    fn finish_round(&mut self) -> SimplexPoint;
}

/// Runs a discrete environment under a debit schedule: nothing is revealed
/// inside a round, so the oracle is constant over sub-steps.
pub struct Stepwise<E>(pub E);

impl<E: Environment> FlowEnvironment for Stepwise<E> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }
    fn observable_state(&self) -> Option<usize> {
        self.0.observable_state()
    }
    fn begin_round(&mut self, _substeps: usize) {}
    fn substep_oracle(&self, _j: usize) -> SimplexPoint {
        self.0.oracle()
    }
    fn substep_signal(&self, _j: usize) -> Vec<f64> {
        Vec::new()
    }
    fn substep_outcomes(&self, _j: usize) -> Option<OutcomeDistribution> {
        self.0.outcomes()
    }
    fn finish_round(&mut self) -> SimplexPoint {
        self.0.advance()
    }
}

pub(crate) fn sample_index(probabilities: &[f64], stream: &mut Stream) -> usize {
    let u: f64 = stream.random();
    let mut cumulative = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // rounding left u above the final cumulative sum
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Serializable description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    IidCategorical {
        probabilities: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_support: Option<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
        emissions: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<f64>>,
    },
    BoundedVariable {
        distribution: XiDistribution,
        mode: BoundedMode,
    },
    ProgressiveRevelation {
        coins: usize,
        bias: f64,
        mix: f64,
    },
}

impl EnvironmentSpec {
    /// True for environments that reveal information inside a round and
    /// therefore need the flow engine.
    pub fn requires_flow(&self) -> bool {
        matches!(self, EnvironmentSpec::ProgressiveRevelation { .. })
    }

    pub fn build(&self, stream: Stream) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvironmentSpec::IidCategorical { probabilities, min_support } => {
                Box::new(IidCategorical::new(probabilities.clone(), *min_support, stream)?)
            }
            EnvironmentSpec::Markov { transition, emissions, initial } => {
                let spec = MarkovSpec::new(transition.clone(), emissions.clone(), initial.clone())?;
                Box::new(MarkovEnvironment::new(spec, stream))
            }
            EnvironmentSpec::BoundedVariable { distribution, mode } => {
                Box::new(BoundedVariable::new(distribution.clone(), mode.clone(), stream)?)
            }
            EnvironmentSpec::ProgressiveRevelation { .. } => {
                return Err(Error::Environment(
                    "progressive revelation reveals coins inside a round and needs the flow engine".into(),
                ))
            }
        })
    }

    pub fn build_flow(&self, stream: Stream) -> Result<Box<dyn FlowEnvironment>> {
        Ok(match self {
            EnvironmentSpec::ProgressiveRevelation { coins, bias, mix } => {
                Box::new(ProgressiveRevelation::new(*coins, *bias, *mix, stream)?)
            }
            other => Box::new(Stepwise(other.build(stream)?)),
        })
    }
}
