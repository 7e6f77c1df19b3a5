use nalgebra::{DMatrix, DVector};

use super::{sample_index, Environment, OutcomeDistribution};
use crate::rng::Stream;
use crate::{Error, Result, SimplexPoint};

const ROW_TOLERANCE: f64 = 1e-12;
const STATIONARY_TOLERANCE: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-9;

/// A validated finite Markov chain of world states with a simplex-valued
/// emission per state.
///
/// Construction checks that the chain has a single recurrent class, that the
/// initial law is stationary, that every next-period conditional expectation
/// is bounded away from zero, and that from every recurrent state the
/// emissions of the reachable successors span the outcome space (no
/// non-trivial state-dependent combination of outcome components vanishes).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpec {
    transition: Vec<Vec<f64>>,
    emissions: Vec<SimplexPoint>,
    stationary: Vec<f64>,
    oracles: Vec<SimplexPoint>,
    epsilon: f64,
}

impl MarkovSpec {
    pub fn new(transition: Vec<Vec<f64>>, emissions: Vec<Vec<f64>>, initial: Option<Vec<f64>>) -> Result<Self> {
        let states = transition.len();
        if states == 0 {
            return Err(Error::Environment("Markov chain needs at least one state".into()));
        }
        for (s, row) in transition.iter().enumerate() {
            if row.len() != states {
                return Err(Error::Environment(format!("transition row {s} has {} entries, expected {states}", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Environment(format!("transition row {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Environment(format!("transition row {s} sums to {sum}")));
            }
        }
        if emissions.len() != states {
            return Err(Error::Environment(format!("{} emissions for {states} states", emissions.len())));
        }
        let emissions = emissions.into_iter().map(SimplexPoint::new).collect::<Result<Vec<_>>>()?;
        let dim = emissions[0].dim();
        for e in &emissions {
            crate::simplex::check_dims(dim, e.dim())?;
        }

        let recurrent = recurrent_classes(&transition);
        if recurrent.len() != 1 {
            return Err(Error::Environment(format!(
                "chain is not ergodic: {} recurrent classes",
                recurrent.len()
            )));
        }
        let recurrent_states = &recurrent[0];

        let stationary = match initial {
            Some(pi) => {
                if pi.len() != states {
                    return Err(Error::Environment(format!("initial law has {} entries, expected {states}", pi.len())));
                }
                check_stationary(&transition, &pi)?;
                pi
            }
            None => stationary_distribution(&transition)?,
        };

        let oracles: Vec<SimplexPoint> = (0..states)
            .map(|s| {
                let mut mu = vec![0.0; dim];
                for (p, e) in transition[s].iter().zip(&emissions) {
                    for (m, &x) in mu.iter_mut().zip(e.as_slice()) {
                        *m += p * x;
                    }
                }
                SimplexPoint::new(mu)
            })
            .collect::<Result<_>>()?;
        let epsilon = oracles.iter().map(SimplexPoint::min_component).fold(f64::INFINITY, f64::min);
        if epsilon <= 0.0 {
            return Err(Error::Environment(
                "some conditional expectation component is zero; outcomes must be bounded away from zero".into(),
            ));
        }

        for &s in recurrent_states {
            let successors: Vec<&SimplexPoint> = transition[s]
                .iter()
                .zip(&emissions)
                .filter(|(p, _)| **p > 0.0)
                .map(|(_, e)| e)
                .collect();
            let rows = DMatrix::from_fn(successors.len(), dim, |i, n| successors[i][n]);
            let rank = rows.rank(RANK_TOLERANCE);
            if rank < dim {
                return Err(Error::Environment(format!(
                    "outcome components are conditionally linearly dependent from state {s}: \
                     successor emissions have rank {rank} < {dim}"
                )));
            }
        }

        Ok(Self { transition, emissions, stationary, oracles, epsilon })
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn dimension(&self) -> usize {
        self.emissions[0].dim()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn emission(&self, state: usize) -> &SimplexPoint {
        &self.emissions[state]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `mu(s) = sum_{s'} P(s, s') X(s')`.
    pub fn oracle(&self, state: usize) -> &SimplexPoint {
        &self.oracles[state]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn outcomes(&self, state: usize) -> OutcomeDistribution {
        let atoms = self.transition[state]
            .iter()
            .zip(&self.emissions)
            .filter(|(p, _)| **p > 0.0)
            .map(|(&p, e)| (p, e.clone()))
            .collect();
        OutcomeDistribution::new(atoms).expect("validated transition rows")
    }
}

/// Closed communicating classes, each as a sorted list of states.
fn recurrent_classes(transition: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = transition.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in transition.iter().enumerate() {
        reach[i][i] = true;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let recurrent: Vec<bool> = (0..n).map(|i| (0..n).all(|j| !reach[i][j] || reach[j][i])).collect();
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if recurrent[i] && !assigned[i] {
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                assigned[j] = true;
            }
            classes.push(class);
        }
    }
    classes
}

fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMatrix::from_fn(n, n, |i, j| transition[j][i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Environment("stationary distribution is not unique".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    check_stationary(transition, &pi)?;
    Ok(pi)
}

fn check_stationary(transition: &[Vec<f64>], pi: &[f64]) -> Result<()> {
    if pi.iter().any(|p| !p.is_finite() || *p < 0.0) || (pi.iter().sum::<f64>() - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::Environment("initial law is not a probability vector".into()));
    }
    let n = transition.len();
    for j in 0..n {
        let next: f64 = (0..n).map(|i| pi[i] * transition[i][j]).sum();
        if (next - pi[j]).abs() > STATIONARY_TOLERANCE {
            return Err(Error::Environment(format!(
                "initial law is not stationary: component {j} maps {} to {next}",
                pi[j]
            )));
        }
    }
    Ok(())
}

/// Outcomes emitted by a stationary ergodic Markov chain of world states.
/// The current state is public.
pub struct MarkovEnvironment {
    spec: MarkovSpec,
    state: usize,
    stream: Stream,
}

impl MarkovEnvironment {
    /// The initial state is drawn from the stationary law.
    pub fn new(spec: MarkovSpec, mut stream: Stream) -> Self {
        let state = sample_index(&spec.stationary, &mut stream);
        Self { spec, state, stream }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn spec(&self) -> &MarkovSpec {
        &self.spec
    }
}

impl Environment for MarkovEnvironment {
    fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    fn observable_state(&self) -> Option<usize> {
        Some(self.state)
    }

    fn oracle(&self) -> SimplexPoint {
        self.spec.oracles[self.state].clone()
    }

    fn outcomes(&self) -> Option<OutcomeDistribution> {
        Some(self.spec.outcomes(self.state))
    }

    fn advance(&mut self) -> SimplexPoint {
        self.state = sample_index(&self.spec.transition[self.state], &mut self.stream);
        self.spec.emissions[self.state].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn two_state() -> MarkovSpec {
        MarkovSpec::new(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn oracle_is_transition_weighted_emission() {
        let spec = two_state();
        assert!((spec.oracle(0)[0] - 0.9).abs() < 1e-15 && (spec.oracle(0)[1] - 0.1).abs() < 1e-15);
        assert!((spec.oracle(1)[0] - 0.2).abs() < 1e-15);
        assert!((spec.epsilon() - 0.1).abs() < 1e-15);
        assert!((spec.stationary()[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_chain_is_not_ergodic() {
        let err = MarkovSpec::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None);
        assert!(matches!(err, Err(Error::Environment(m)) if m.contains("not ergodic")));
    }

    #[test]
    fn equal_emissions_violate_linear_independence() {
        let err = MarkovSpec::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.5, 0.5]], None);
        assert!(matches!(err, Err(Error::Environment(m)) if m.contains("linearly dependent from state 0")));
    }

    #[test]
    fn other_invalid_specs() {
        assert!(MarkovSpec::new(vec![vec![0.9, 0.2], vec![0.2, 0.8]], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None).is_err());
        assert!(MarkovSpec::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![1.0, 0.0]], None).is_err());
        // declared initial law that is not stationary
        assert!(MarkovSpec::new(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![0.5, 0.5])
        )
        .is_err());
        assert!(MarkovSpec::new(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![2.0 / 3.0, 1.0 / 3.0])
        )
        .is_ok());
        // a zero oracle component
        assert!(MarkovSpec::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None).is_err());
    }

    #[test]
    fn transient_states_are_allowed() {
        // state 2 is transient; states 0 and 1 form the recurrent class
        let spec = MarkovSpec::new(
            vec![vec![0.7, 0.3, 0.0], vec![0.4, 0.6, 0.0], vec![0.5, 0.25, 0.25]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
            None,
        )
        .unwrap();
        assert!(spec.stationary()[2].abs() < 1e-12);
    }

    #[test]
    fn outcome_atoms_reproduce_oracle() {
        let spec = MarkovSpec::new(
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4]],
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6]],
            None,
        )
        .unwrap();
        for s in 0..3 {
            let mean = spec.outcomes(s).mean();
            for n in 0..3 {
                assert!((mean[n] - spec.oracle(s)[n]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn occupancy_matches_stationary_law() {
        let mut env = MarkovEnvironment::new(two_state(), substream(9, 0, 0));
        let steps = 100_000;
        let mut in_first = 0.0;
        for _ in 0..steps {
            env.advance();
            if env.state() == 0 {
                in_first += 1.0;
            }
        }
        // asymptotic variance of the occupancy fraction for a two-state chain
        // with second eigenvalue 0.7
        let pi: f64 = 2.0 / 3.0;
        let rho = 0.7;
        let sigma = (pi * (1.0 - pi) * (1.0 + rho) / (1.0 - rho) / steps as f64).sqrt();
        assert!((in_first / steps as f64 - pi).abs() <= 4.0 * sigma);
    }

    #[test]
    fn empirical_next_outcome_matches_oracle_per_state() {
        let spec = two_state();
        let samples = 100_000;
        for start in 0..2 {
            let mut env = MarkovEnvironment::new(spec.clone(), substream(21, start as u64, 0));
            let mut hits = 0.0;
            for _ in 0..samples {
                env.state = start;
                hits += env.advance()[0];
            }
            let p = spec.oracle(start)[0];
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((hits / samples as f64 - p).abs() <= 4.0 * sigma);
        }
    }
}
