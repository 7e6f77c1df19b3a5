use serde::{Deserialize, Serialize};

use crate::simplex::{check_dims, ACCUMULATED_TOLERANCE};
use crate::{Error, Result, SimplexPoint};

/// Shares below this value are clamped to zero and flagged.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Agents' wealth shares. Total wealth is normalized to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthVector {
    shares: Vec<f64>,
    underflow: Vec<bool>,
}

impl WealthVector {
    /// Validates shares (non-negative, summing to one within `1e-9`) and
    /// renormalizes them.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        let n = shares.len();
        Self::with_flags(shares, vec![false; n])
    }

    /// Builds the initial wealth vector from strictly positive amounts of any
    /// scale.
    pub fn from_initial(amounts: &[f64]) -> Result<Self> {
        if amounts.is_empty() {
            return Err(Error::ZeroMass);
        }
        for (index, &value) in amounts.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        let total: f64 = amounts.iter().sum();
        Self::new(amounts.iter().map(|a| a / total).collect())
    }

    /// Equal shares for `agents` agents.
    pub fn equal(agents: usize) -> Self {
        assert!(agents > 0);
        Self { shares: vec![1.0 / agents as f64; agents], underflow: vec![false; agents] }
    }

    pub(crate) fn with_flags(shares: Vec<f64>, underflow: Vec<bool>) -> Result<Self> {
        check_dims(shares.len(), underflow.len())?;
        for (index, &value) in shares.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        let sum: f64 = shares.iter().sum();
        if sum == 0.0 {
            return Err(Error::ZeroMass);
        }
        if (sum - 1.0).abs() > ACCUMULATED_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        let mut shares = shares;
        let mut underflow = underflow;
        if sum != 1.0 {
            shares.iter_mut().for_each(|s| *s /= sum);
        }
        for (share, flag) in shares.iter_mut().zip(underflow.iter_mut()) {
            if *share < UNDERFLOW_FLOOR && *share > 0.0 {
                *share = 0.0;
                *flag = true;
            }
        }
        Ok(Self { shares, underflow })
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn underflow_flags(&self) -> &[bool] {
        &self.underflow
    }

    pub fn share(&self, agent: usize) -> f64 {
        self.shares[agent]
    }
}

/// One agent's choice for a discrete round: the fraction of wealth staked and
/// how the stake is split across outcome components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDecision {
    pub stake_fraction: f64,
    pub allocation: SimplexPoint,
}

impl StrategyDecision {
    pub fn new(stake_fraction: f64, allocation: SimplexPoint) -> Result<Self> {
        check_stake(stake_fraction)?;
        Ok(Self { stake_fraction, allocation })
    }
}

pub(crate) fn check_stake(stake: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&stake) {
        return Err(Error::Strategy(format!("stake fraction {stake} outside [0, 1]")));
    }
    Ok(())
}

/// An agent's bets over a round: the stake fixed at round start and one
/// allocation per debit sub-step (a single one for discrete rounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBets {
    pub stake_fraction: f64,
    pub allocations: Vec<SimplexPoint>,
}

impl AgentBets {
    pub fn new(stake_fraction: f64, allocations: Vec<SimplexPoint>) -> Result<Self> {
        check_stake(stake_fraction)?;
        if allocations.is_empty() {
            return Err(Error::Strategy("empty allocation path".into()));
        }
        Ok(Self { stake_fraction, allocations })
    }

    /// The decision in force during sub-step `j`.
    pub fn decision_at(&self, j: usize) -> StrategyDecision {
        StrategyDecision { stake_fraction: self.stake_fraction, allocation: self.allocations[j].clone() }
    }
}

impl From<StrategyDecision> for AgentBets {
    fn from(decision: StrategyDecision) -> Self {
        Self { stake_fraction: decision.stake_fraction, allocations: vec![decision.allocation] }
    }
}

/// Masses of the debit function within one round, one per sub-step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DebitSchedule {
    weights: Vec<f64>,
}

impl DebitSchedule {
    /// Weights must be non-negative and sum to one within `1e-12`; they are
    /// renormalized otherwise.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Schedule("at least one sub-step is required".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Schedule(format!("weight {i} is negative or not finite ({w})")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Schedule(format!("weights sum to {sum}, expected 1")));
        }
        let weights = if sum == 1.0 { weights } else { weights.into_iter().map(|w| w / sum).collect() };
        Ok(Self { weights })
    }

    /// `k` equal sub-steps, the step approximation `G(t) = [tk]/k`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Schedule("at least one sub-step is required".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    /// The single-step schedule of the discrete game.
    pub fn single() -> Self {
        Self { weights: vec![1.0] }
    }

    pub fn substeps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl TryFrom<Vec<f64>> for DebitSchedule {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        DebitSchedule::new(weights)
    }
}

impl From<DebitSchedule> for Vec<f64> {
    fn from(schedule: DebitSchedule) -> Self {
        schedule.weights
    }
}

/// Full audit of one settled round.
///
/// `forecast` and `oracle` carry one entry per debit sub-step; discrete
/// rounds have exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub wealth_before: WealthVector,
    pub wealth_after: WealthVector,
    pub bets: Vec<AgentBets>,
    pub forecast_nu: f64,
    pub forecast: Vec<SimplexPoint>,
    pub oracle: Vec<SimplexPoint>,
    pub realized: SimplexPoint,
    /// `ln W_{t+1} - ln W_t` per agent, computed from the payoff ratio.
    pub log_growth: Vec<f64>,
    /// Squared distance between market forecast and oracle, weighted over
    /// sub-steps.
    pub sq_forecast_error: f64,
    /// Deviation of total wealth from one before renormalization.
    pub drift: f64,
}
