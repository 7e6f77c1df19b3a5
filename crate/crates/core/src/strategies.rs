//! Reference strategies.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::Stream;
use crate::types::{StrategyDecision, WealthVector};
use crate::{simplex_project, Error, Result, SimplexPoint};

/// Smallest component a full-support strategy emits.
pub const FULL_SUPPORT_FLOOR: f64 = 1e-9;

/// Public information available when a round opens.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub round: usize,
    pub wealth: &'a WealthVector,
    /// The environment's conditional expectation of the coming outcome.
    pub oracle: &'a SimplexPoint,
    pub state: Option<usize>,
    pub last_realized: Option<&'a SimplexPoint>,
    pub last_forecast: Option<&'a SimplexPoint>,
}

/// Information available at a later debit sub-step of a flow round.
#[derive(Debug, Clone, Copy)]
pub struct SubstepView<'a> {
    pub round: usize,
    pub substep: usize,
    pub oracle: &'a SimplexPoint,
    pub signal: &'a [f64],
}

pub trait Strategy: Send {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision>;

    /// Allocation for a later sub-step. Keeps the current one by default.
    fn revise(&mut self, _view: &SubstepView<'_>, current: &SimplexPoint) -> Result<SimplexPoint> {
        Ok(current.clone())
    }
}

/// Fraction of wealth staked each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StakePolicy {
    Constant(f64),
    /// Stake for round `t` is `schedule[t]`; the last entry is held after
    /// the schedule runs out.
    Schedule { schedule: Vec<f64> },
}

impl Default for StakePolicy {
    fn default() -> Self {
        StakePolicy::Constant(1.0)
    }
}

impl StakePolicy {
    pub fn validate(&self) -> Result<()> {
        let values: &[f64] = match self {
            StakePolicy::Constant(v) => std::slice::from_ref(v),
            StakePolicy::Schedule { schedule } => schedule,
        };
        if values.is_empty() {
            return Err(Error::Strategy("stake schedule is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::Strategy(format!("stake fraction {v} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn at(&self, round: usize) -> f64 {
        match self {
            StakePolicy::Constant(v) => *v,
            StakePolicy::Schedule { schedule } => schedule[round.min(schedule.len() - 1)],
        }
    }
}

/// Bets the oracle.
#[derive(Debug, Clone, Default)]
pub struct TruthTeller {
    pub stake: StakePolicy,
}

impl Strategy for TruthTeller {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision> {
        StrategyDecision::new(self.stake.at(view.round), view.oracle.clone())
    }
}

/// Bets the oracle and follows it through every sub-step of a flow round.
#[derive(Debug, Clone, Default)]
pub struct FlowTruthTeller {
    pub stake: StakePolicy,
}

impl Strategy for FlowTruthTeller {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision> {
        StrategyDecision::new(self.stake.at(view.round), view.oracle.clone())
    }

    fn revise(&mut self, view: &SubstepView<'_>, _current: &SimplexPoint) -> Result<SimplexPoint> {
        Ok(view.oracle.clone())
    }
}

/// The oracle perturbed by a random zero-sum vector of norm
/// `c * (t + 1)^(-alpha)`, projected back onto the simplex.
pub struct NoisyTruthTeller {
    c: f64,
    alpha: f64,
    stake: StakePolicy,
    stream: Stream,
}

impl NoisyTruthTeller {
    /// `alpha <= 1/2` makes the squared errors non-summable and is only
    /// accepted with `non_survivor` set.
    pub fn new(c: f64, alpha: f64, non_survivor: bool, stake: StakePolicy, stream: Stream) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Strategy(format!("noise scale {c} must be finite and non-negative")));
        }
        if !alpha.is_finite() || (alpha <= 0.5 && !non_survivor) {
            return Err(Error::Strategy(format!(
                "decay exponent {alpha} must exceed 1/2 unless the strategy is flagged non-survivor"
            )));
        }
        stake.validate()?;
        Ok(Self { c, alpha, stake, stream })
    }

    pub fn magnitude(&self, round: usize) -> f64 {
        self.c * ((round + 1) as f64).powf(-self.alpha)
    }

    fn allocation(&mut self, round: usize, mu: &SimplexPoint) -> Result<SimplexPoint> {
        let magnitude = self.magnitude(round);
        let n = mu.dim();
        if magnitude == 0.0 || n == 1 {
            return Ok(mu.clone());
        }
        let mut direction: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut self.stream)).collect();
        let mean = direction.iter().sum::<f64>() / n as f64;
        direction.iter_mut().for_each(|d| *d -= mean);
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(mu.clone());
        }
        let perturbed: Vec<f64> =
            mu.as_slice().iter().zip(&direction).map(|(m, d)| m + magnitude * d / norm).collect();
        let projected = simplex_project(&perturbed)?;
        // slightly above the exact weight so rounding cannot leave a component below the floor
        let weight = (FULL_SUPPORT_FLOOR / mu.min_component() * (1.0 + 1e-9)).min(1.0);
        projected.mix(mu, weight)
    }
}

impl Strategy for NoisyTruthTeller {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision> {
        let allocation = self.allocation(view.round, view.oracle)?;
        StrategyDecision::new(self.stake.at(view.round), allocation)
    }
}

/// The same allocation every round, optionally with a fixed path of
/// allocations across the sub-steps of a flow round.
#[derive(Debug, Clone)]
pub struct Constant {
    allocation: SimplexPoint,
    path: Option<Vec<SimplexPoint>>,
    stake: StakePolicy,
}

impl Constant {
    pub fn new(allocation: SimplexPoint, stake: StakePolicy) -> Result<Self> {
        Self::with_path(allocation, None, stake)
    }

    /// `path[j]` is used at sub-step `j`; `path[0]` replaces `allocation`
    /// when given.
    pub fn with_path(allocation: SimplexPoint, path: Option<Vec<SimplexPoint>>, stake: StakePolicy) -> Result<Self> {
        stake.validate()?;
        for a in std::iter::once(&allocation).chain(path.iter().flatten()) {
            crate::simplex::check_dims(allocation.dim(), a.dim())?;
            if !a.has_full_support() {
                return Err(Error::Strategy(format!("constant allocation {:?} has a zero component", a.as_slice())));
            }
        }
        if path.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::Strategy("empty allocation path".into()));
        }
        Ok(Self { allocation, path, stake })
    }

    pub fn path_len(&self) -> Option<usize> {
        self.path.as_ref().map(Vec::len)
    }
}

impl Strategy for Constant {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision> {
        let allocation = match &self.path {
            Some(path) => path[0].clone(),
            None => self.allocation.clone(),
        };
        StrategyDecision::new(self.stake.at(view.round), allocation)
    }

    fn revise(&mut self, view: &SubstepView<'_>, current: &SimplexPoint) -> Result<SimplexPoint> {
        match &self.path {
            Some(path) => path
                .get(view.substep)
                .cloned()
                .ok_or_else(|| Error::Schedule(format!("allocation path has no sub-step {}", view.substep))),
            None => Ok(current.clone()),
        }
    }
}

/// Bets the smoothed empirical frequency of past outcomes,
/// `(beta / N + sum_s X_s) / (beta + t)`.
#[derive(Debug, Clone)]
pub struct EmpiricalLearner {
    prior_weight: f64,
    sums: Vec<f64>,
    observed: usize,
    stake: StakePolicy,
}

impl EmpiricalLearner {
    pub fn new(prior_weight: f64, dimension: usize, stake: StakePolicy) -> Result<Self> {
        if !(prior_weight > 0.0 && prior_weight.is_finite()) {
            return Err(Error::Strategy(format!("prior weight {prior_weight} must be positive")));
        }
        if dimension == 0 {
            return Err(Error::Strategy("outcome dimension must be positive".into()));
        }
        stake.validate()?;
        Ok(Self { prior_weight, sums: vec![0.0; dimension], observed: 0, stake })
    }

    pub fn estimate(&self) -> Result<SimplexPoint> {
        let n = self.sums.len() as f64;
        let denom = self.prior_weight + self.observed as f64;
        let estimate = SimplexPoint::new(self.sums.iter().map(|s| (self.prior_weight / n + s) / denom).collect())?;
        if estimate.min_component() >= FULL_SUPPORT_FLOOR {
            return Ok(estimate);
        }
        estimate.mix(&SimplexPoint::uniform(self.sums.len()), (2.0 * n * FULL_SUPPORT_FLOOR).min(1.0))
    }
}

impl Strategy for EmpiricalLearner {
    fn decide(&mut self, view: &RoundView<'_>) -> Result<StrategyDecision> {
        if let Some(x) = view.last_realized {
            crate::simplex::check_dims(self.sums.len(), x.dim())?;
            for (s, v) in self.sums.iter_mut().zip(x.as_slice()) {
                *s += v;
            }
            self.observed += 1;
        }
        StrategyDecision::new(self.stake.at(view.round), self.estimate()?)
    }
}

/// Serializable description of a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    TruthTeller {
        #[serde(default)]
        stake: StakePolicy,
    },
    FlowTruthTeller {
        #[serde(default)]
        stake: StakePolicy,
    },
    NoisyTruthTeller {
        c: f64,
        alpha: f64,
        #[serde(default)]
        non_survivor: bool,
        #[serde(default)]
        stake: StakePolicy,
    },
    Constant {
        allocation: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        stake: StakePolicy,
    },
    EmpiricalLearner {
        prior_weight: f64,
        #[serde(default)]
        stake: StakePolicy,
    },
}

impl StrategySpec {
    /// Number of sub-step allocations the strategy is laid out for, if fixed.
    pub fn path_len(&self) -> Option<usize> {
        match self {
            StrategySpec::Constant { path: Some(p), .. } => Some(p.len()),
            _ => None,
        }
    }

    pub fn build(&self, dimension: usize, stream: Stream) -> Result<Box<dyn Strategy>> {
        Ok(match self {
            StrategySpec::TruthTeller { stake } => {
                stake.validate()?;
                Box::new(TruthTeller { stake: stake.clone() })
            }
            StrategySpec::FlowTruthTeller { stake } => {
                stake.validate()?;
                Box::new(FlowTruthTeller { stake: stake.clone() })
            }
            StrategySpec::NoisyTruthTeller { c, alpha, non_survivor, stake } => {
                Box::new(NoisyTruthTeller::new(*c, *alpha, *non_survivor, stake.clone(), stream)?)
            }
            StrategySpec::Constant { allocation, path, stake } => {
                let allocation = SimplexPoint::new(allocation.clone())?;
                crate::simplex::check_dims(dimension, allocation.dim())?;
                let path = path
                    .as_ref()
                    .map(|p| p.iter().cloned().map(SimplexPoint::new).collect::<Result<Vec<_>>>())
                    .transpose()?;
                Box::new(Constant::with_path(allocation, path, stake.clone())?)
            }
            StrategySpec::EmpiricalLearner { prior_weight, stake } => {
                Box::new(EmpiricalLearner::new(*prior_weight, dimension, stake.clone())?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::sq_distance;
    use proptest::prelude::*;
    use super::Strategy;

    fn pt(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    fn view<'a>(
        round: usize,
        wealth: &'a WealthVector,
        oracle: &'a SimplexPoint,
        last: Option<&'a SimplexPoint>,
    ) -> RoundView<'a> {
        RoundView { round, wealth, oracle, state: None, last_realized: last, last_forecast: None }
    }

    #[test]
    fn truth_teller_bets_oracle() {
        let w = WealthVector::equal(1);
        let mu = pt(&[0.6, 0.4]);
        let d = TruthTeller::default().decide(&view(0, &w, &mu, None)).unwrap();
        assert_eq!(d.allocation, mu);
        assert_eq!(d.stake_fraction, 1.0);
    }

    #[test]
    fn flow_truth_teller_tracks_substep_oracle() {
        let mut s = FlowTruthTeller::default();
        let mu = pt(&[0.65, 0.35]);
        let sub = SubstepView { round: 0, substep: 1, oracle: &mu, signal: &[1.0] };
        assert_eq!(s.revise(&sub, &pt(&[0.55, 0.45])).unwrap(), mu);
        let mut tt = TruthTeller::default();
        assert_eq!(tt.revise(&sub, &pt(&[0.55, 0.45])).unwrap(), pt(&[0.55, 0.45]));
    }

    #[test]
    fn zero_noise_matches_truth_teller() {
        let w = WealthVector::equal(1);
        let mu = pt(&[0.2, 0.3, 0.5]);
        let mut s = NoisyTruthTeller::new(0.0, 1.0, false, StakePolicy::default(), substream(1, 0, 1)).unwrap();
        for t in 0..10 {
            assert_eq!(s.decide(&view(t, &w, &mu, None)).unwrap().allocation, mu);
        }
    }

    #[test]
    fn noisy_parameters_are_checked() {
        let stream = || substream(1, 0, 1);
        assert!(NoisyTruthTeller::new(0.1, 0.5, false, StakePolicy::default(), stream()).is_err());
        assert!(NoisyTruthTeller::new(0.1, 0.25, true, StakePolicy::default(), stream()).is_ok());
        assert!(NoisyTruthTeller::new(-0.1, 1.0, false, StakePolicy::default(), stream()).is_err());
    }

    #[test]
    fn noisy_error_sum_respects_zeta_bound() {
        let w = WealthVector::equal(1);
        let mu = pt(&[0.6, 0.4]);
        let mut s = NoisyTruthTeller::new(0.1, 1.0, false, StakePolicy::default(), substream(9, 0, 2)).unwrap();
        let bound = 0.01 * std::f64::consts::PI.powi(2) / 6.0;
        let mut total = 0.0;
        for t in 0..20_000 {
            let d = s.decide(&view(t, &w, &mu, None)).unwrap();
            assert!(d.allocation.min_component() >= FULL_SUPPORT_FLOOR);
            total += sq_distance(&d.allocation, &mu).unwrap();
            assert!(total <= bound);
        }
        // with two outcomes the projection never clips here, so the sum is
        // the partial zeta sum itself up to the mixing shrinkage
        let partial: f64 = (1..=20_000).map(|t| 0.01 / (t as f64).powi(2)).sum();
        assert!((total - partial).abs() < 1e-8 * partial);
    }

    #[test]
    fn constant_strategy_examples() {
        let w = WealthVector::equal(1);
        let mu = pt(&[0.6, 0.4]);
        let mut s = Constant::new(pt(&[0.4, 0.6]), StakePolicy::default()).unwrap();
        let d = s.decide(&view(3, &w, &mu, None)).unwrap();
        assert!((sq_distance(&d.allocation, &mu).unwrap() - 0.08).abs() < 1e-15);
        assert!(Constant::new(pt(&[0.4, 0.6]), StakePolicy::Constant(0.0)).is_err());
        assert!(Constant::new(pt(&[1.0, 0.0]), StakePolicy::default()).is_err());
    }

    #[test]
    fn constant_path_drives_substeps() {
        let mut s =
            Constant::with_path(pt(&[0.5, 0.5]), Some(vec![pt(&[0.5, 0.5]), pt(&[0.7, 0.3])]), StakePolicy::default())
                .unwrap();
        let mu = pt(&[0.5, 0.5]);
        let sub = SubstepView { round: 0, substep: 1, oracle: &mu, signal: &[] };
        assert_eq!(s.revise(&sub, &mu).unwrap(), pt(&[0.7, 0.3]));
        let sub = SubstepView { round: 0, substep: 2, oracle: &mu, signal: &[] };
        assert!(s.revise(&sub, &mu).is_err());
    }

    #[test]
    fn empirical_learner_examples() {
        let w = WealthVector::equal(1);
        let mu = pt(&[0.5, 0.5]);
        let mut s = EmpiricalLearner::new(1.0, 2, StakePolicy::default()).unwrap();
        assert_eq!(s.decide(&view(0, &w, &mu, None)).unwrap().allocation, pt(&[0.5, 0.5]));
        let x = SimplexPoint::vertex(2, 0);
        assert_eq!(s.decide(&view(1, &w, &mu, Some(&x))).unwrap().allocation, pt(&[0.75, 0.25]));
        assert!(EmpiricalLearner::new(0.0, 2, StakePolicy::default()).is_err());
    }

    #[test]
    fn stake_schedule_holds_last_value() {
        let p = StakePolicy::Schedule { schedule: vec![0.5, 0.8] };
        assert_eq!((p.at(0), p.at(1), p.at(7)), (0.5, 0.8, 0.8));
        assert!(StakePolicy::Schedule { schedule: vec![] }.validate().is_err());
        assert!(StakePolicy::Constant(1.5).validate().is_err());
    }

    #[test]
    fn spec_parses_and_builds() {
        let spec: StrategySpec =
            serde_json::from_str(r#"{"kind":"noisy_truth_teller","c":0.1,"alpha":1.0,"stake":0.9}"#).unwrap();
        assert_eq!(
            spec,
            StrategySpec::NoisyTruthTeller { c: 0.1, alpha: 1.0, non_survivor: false, stake: StakePolicy::Constant(0.9) }
        );
        assert!(spec.build(2, substream(1, 0, 1)).is_ok());
        let spec: StrategySpec = serde_json::from_str(r#"{"kind":"constant","allocation":[0.2,0.3,0.5]}"#).unwrap();
        assert!(spec.build(2, substream(1, 0, 1)).is_err());
        assert!(serde_json::from_str::<StrategySpec>(r#"{"kind":"truth_teller","bogus":1}"#).is_err());
        let spec: StrategySpec =
            serde_json::from_str(r#"{"kind":"truth_teller","stake":{"schedule":[0.5,1.0]}}"#).unwrap();
        let back: StrategySpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
    }

    proptest! {
        #[test]
        fn noisy_decisions_are_reproducible_and_full_support(
            seed in any::<u64>(),
            raw in prop::collection::vec(0.05f64..1.0, 2..5),
            c in 0.0f64..2.0,
        ) {
            let sum: f64 = raw.iter().sum();
            let mu = SimplexPoint::new(raw.iter().map(|v| v / sum).collect()).unwrap();
            let w = WealthVector::equal(1);
            let mut a = NoisyTruthTeller::new(c, 0.25, true, StakePolicy::default(), substream(seed, 0, 1)).unwrap();
            let mut b = NoisyTruthTeller::new(c, 0.25, true, StakePolicy::default(), substream(seed, 0, 1)).unwrap();
            for t in 0..20 {
                let da = a.decide(&view(t, &w, &mu, None)).unwrap();
                let db = b.decide(&view(t, &w, &mu, None)).unwrap();
                prop_assert_eq!(&da, &db);
                prop_assert!(da.allocation.min_component() >= FULL_SUPPORT_FLOOR);
                prop_assert!(sq_distance(&da.allocation, &mu).unwrap() <= a.magnitude(t).powi(2) + 1e-15);
            }
        }

        #[test]
        fn learner_stays_above_floor(outcomes in prop::collection::vec(0usize..3, 0..200), beta in 1e-6f64..10.0) {
            let w = WealthVector::equal(1);
            let mu = SimplexPoint::uniform(3);
            let mut s = EmpiricalLearner::new(beta, 3, StakePolicy::default()).unwrap();
            let mut last: Option<SimplexPoint> = None;
            for (t, &o) in outcomes.iter().enumerate() {
                let d = s.decide(&view(t, &w, &mu, last.as_ref())).unwrap();
                prop_assert!(d.allocation.min_component() >= FULL_SUPPORT_FLOOR);
                last = Some(SimplexPoint::vertex(3, o));
            }
        }
    }
}
