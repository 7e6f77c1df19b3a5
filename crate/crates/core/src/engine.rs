//! The discrete-time round: profile validation, the wealth-weighted market
//! forecast and parimutuel settlement.

use std::fmt;

use crate::environments::Environment;
use crate::strategies::{RoundView, Strategy};
use crate::types::{AgentBets, RoundRecord, StrategyDecision, WealthVector};
use crate::{sq_distance, Error, Result, SimplexPoint};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AgentCountMismatch { wealth: usize, decisions: usize },
    DimensionMismatch { agent: usize, expected: usize, actual: usize },
    InvalidStake { agent: usize, value: f64 },
    NoPositiveStaker,
    NoFullSupportStaker,
    ZeroTotalBet { component: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AgentCountMismatch { wealth, decisions } => {
                write!(f, "{wealth} wealth shares but {decisions} decisions")
            }
            Violation::DimensionMismatch { agent, expected, actual } => {
                write!(f, "agent {} allocates over {actual} components, expected {expected}", agent + 1)
            }
            Violation::InvalidStake { agent, value } => {
                write!(f, "agent {} stakes {value}, outside [0, 1]", agent + 1)
            }
            Violation::NoPositiveStaker => write!(f, "no positive staker"),
            Violation::NoFullSupportStaker => {
                write!(f, "no positive staker with a full-support allocation")
            }
            Violation::ZeroTotalBet { component } => {
                write!(f, "component {} has zero total bet", component + 1)
            }
        }
    }
}

/// Outcome of [`validate_profile`]. `ok` holds exactly when `reasons` is
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileValidation {
    pub ok: bool,
    pub reasons: Vec<Violation>,
    /// Whether `sum_k nu^k lambda^{kn} W^k > 0`, per component.
    pub component_bet_positive: Vec<bool>,
}

impl ProfileValidation {
    fn from_reasons(reasons: Vec<Violation>, component_bet_positive: Vec<bool>) -> Self {
        Self { ok: reasons.is_empty(), reasons, component_bet_positive }
    }

    pub fn reasons_text(&self) -> String {
        self.reasons.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
    }

    pub fn into_result(self, round: Option<usize>) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile { round, reasons: self.reasons_text() })
        }
    }
}

/// Checks that some agent with positive wealth stakes a positive fraction on
/// a full-support allocation, which keeps every settlement denominator and
/// that agent's wealth positive.
pub fn validate_profile(wealth: &WealthVector, decisions: &[StrategyDecision]) -> ProfileValidation {
    if wealth.len() != decisions.len() {
        return ProfileValidation::from_reasons(
            vec![Violation::AgentCountMismatch { wealth: wealth.len(), decisions: decisions.len() }],
            Vec::new(),
        );
    }
    let dim = decisions.first().map_or(0, |d| d.allocation.dim());
    let mut reasons = Vec::new();
    for (agent, d) in decisions.iter().enumerate() {
        if d.allocation.dim() != dim {
            reasons.push(Violation::DimensionMismatch { agent, expected: dim, actual: d.allocation.dim() });
        }
        if !(0.0..=1.0).contains(&d.stake_fraction) {
            reasons.push(Violation::InvalidStake { agent, value: d.stake_fraction });
        }
    }
    if !reasons.is_empty() {
        return ProfileValidation::from_reasons(reasons, Vec::new());
    }

    let mut component_bets = vec![0.0; dim];
    for (d, &w) in decisions.iter().zip(wealth.shares()) {
        for (total, &l) in component_bets.iter_mut().zip(d.allocation.as_slice()) {
            *total += d.stake_fraction * l * w;
        }
    }
    let component_bet_positive: Vec<bool> = component_bets.iter().map(|&b| b > 0.0).collect();

    let stakers: Vec<&StrategyDecision> = decisions
        .iter()
        .zip(wealth.shares())
        .filter(|(d, &w)| w > 0.0 && d.stake_fraction > 0.0)
        .map(|(d, _)| d)
        .collect();
    if stakers.is_empty() {
        reasons.push(Violation::NoPositiveStaker);
    } else {
        if !stakers.iter().any(|d| d.allocation.has_full_support()) {
            reasons.push(Violation::NoFullSupportStaker);
        }
        for (component, positive) in component_bet_positive.iter().enumerate() {
            if !positive {
                reasons.push(Violation::ZeroTotalBet { component });
            }
        }
    }
    ProfileValidation::from_reasons(reasons, component_bet_positive)
}

/// Total stake `nu_bar = sum_m nu^m W^m` and per-component bets
/// `D^n = sum_m nu^m lambda^{mn} W^m`.
pub(crate) fn pooled_bets(wealth: &[f64], stakes: &[f64], allocations: &[&SimplexPoint]) -> (f64, Vec<f64>) {
    let dim = allocations[0].dim();
    let mut pool = 0.0;
    let mut bets = vec![0.0; dim];
    for ((&w, &nu), lambda) in wealth.iter().zip(stakes).zip(allocations) {
        pool += nu * w;
        for (b, &l) in bets.iter_mut().zip(lambda.as_slice()) {
            *b += nu * l * w;
        }
    }
    (pool, bets)
}

pub(crate) fn forecast_from_bets(pool: f64, bets: &[f64]) -> Result<SimplexPoint> {
    if pool <= 0.0 {
        return Err(Error::ZeroStake);
    }
    SimplexPoint::new(bets.iter().map(|b| b / pool).collect())
}

/// The wealth-weighted strategy `(nu_bar, lambda_bar)`; `lambda_bar` is the
/// market forecast, equal to the share of the wagered pool placed on each
/// component.
pub fn market_forecast(wealth: &WealthVector, decisions: &[StrategyDecision]) -> Result<(f64, SimplexPoint)> {
    check_shapes(wealth, decisions)?;
    let stakes: Vec<f64> = decisions.iter().map(|d| d.stake_fraction).collect();
    let allocations: Vec<&SimplexPoint> = decisions.iter().map(|d| &d.allocation).collect();
    let (pool, bets) = pooled_bets(wealth.shares(), &stakes, &allocations);
    Ok((pool, forecast_from_bets(pool, &bets)?))
}

fn check_shapes(wealth: &WealthVector, decisions: &[StrategyDecision]) -> Result<()> {
    if decisions.is_empty() || wealth.len() != decisions.len() {
        return Err(Error::DimensionMismatch { expected: wealth.len(), actual: decisions.len() });
    }
    let dim = decisions[0].allocation.dim();
    for d in decisions {
        crate::simplex::check_dims(dim, d.allocation.dim())?;
    }
    Ok(())
}

/// Result of settling one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub wealth: WealthVector,
    /// `ln(nu^m sum_n X^n lambda^{mn} / lambda_bar^n + 1 - nu^m)` per agent.
    pub log_growth: Vec<f64>,
    /// `sum_m W'^m - 1` before renormalization.
    pub drift: f64,
}

/// Settles a discrete round: the staked pool is split across components in
/// proportion to the realized outcome, and each component's share is paid
/// out pro rata to the money bet on it. Unstaked wealth is returned.
pub fn settle_round(
    wealth: &WealthVector,
    decisions: &[StrategyDecision],
    realized: &SimplexPoint,
) -> Result<Settlement> {
    validate_profile(wealth, decisions).into_result(None)?;
    crate::simplex::check_dims(decisions[0].allocation.dim(), realized.dim())?;

    let shares = wealth.shares();
    let stakes: Vec<f64> = decisions.iter().map(|d| d.stake_fraction).collect();
    let allocations: Vec<&SimplexPoint> = decisions.iter().map(|d| &d.allocation).collect();
    let (pool, bets) = pooled_bets(shares, &stakes, &allocations);
    let x = realized.as_slice();

    let mut next = Vec::with_capacity(shares.len());
    let mut log_growth = Vec::with_capacity(shares.len());
    for ((&w, &nu), lambda) in shares.iter().zip(&stakes).zip(&allocations) {
        let lambda = lambda.as_slice();
        let mut payout = 0.0;
        let mut relative = 0.0;
        for n in 0..x.len() {
            if x[n] == 0.0 {
                continue;
            }
            payout += x[n] * (nu * lambda[n] * w / bets[n]);
            relative += x[n] * (lambda[n] * pool / bets[n]);
        }
        next.push(pool * payout + (1.0 - nu) * w);
        log_growth.push((nu * relative + 1.0 - nu).ln());
    }
    finish_settlement(wealth, next, log_growth)
}

pub(crate) fn finish_settlement(wealth: &WealthVector, next: Vec<f64>, log_growth: Vec<f64>) -> Result<Settlement> {
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("settled wealth"));
    }
    if log_growth.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("log growth"));
    }
    let drift = next.iter().sum::<f64>() - 1.0;
    let wealth = WealthVector::with_flags(next, wealth.underflow_flags().to_vec())?;
    Ok(Settlement { wealth, log_growth, drift })
}

/// Runs `rounds` discrete rounds, handing each record to `visit` as soon as
/// it is settled.
///
/// Per round the order is fixed: the oracle is queried, strategies decide,
/// the profile is validated, the forecast is formed, the environment samples
/// the outcome, and the round is settled.
pub fn run_discrete_with<F>(
    environment: &mut dyn Environment,
    strategies: &mut [Box<dyn Strategy>],
    wealth0: WealthVector,
    rounds: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(RoundRecord) -> Result<()>,
{
    if rounds == 0 {
        return Err(Error::InvalidArgument("at least one round is required".into()));
    }
    if strategies.len() != wealth0.len() {
        return Err(Error::DimensionMismatch { expected: wealth0.len(), actual: strategies.len() });
    }
    let floor = environment.epsilon();
    let mut wealth = wealth0;
    let mut last_realized: Option<SimplexPoint> = None;
    let mut last_forecast: Option<SimplexPoint> = None;

    for round in 0..rounds {
        let oracle = environment.oracle();
        check_floor(round, &oracle, floor)?;
        let view = RoundView {
            round,
            wealth: &wealth,
            oracle: &oracle,
            state: environment.observable_state(),
            last_realized: last_realized.as_ref(),
            last_forecast: last_forecast.as_ref(),
        };
        let decisions = strategies
            .iter_mut()
            .map(|s| s.decide(&view))
            .collect::<Result<Vec<_>>>()?;
        validate_profile(&wealth, &decisions).into_result(Some(round))?;
        let (forecast_nu, forecast) = market_forecast(&wealth, &decisions)?;
        let realized = environment.advance();
        let settlement = settle_round(&wealth, &decisions, &realized)?;
        let sq_forecast_error = sq_distance(&forecast, &oracle)?;

        last_realized = Some(realized.clone());
        last_forecast = Some(forecast.clone());
        let wealth_before = std::mem::replace(&mut wealth, settlement.wealth.clone());
        visit(RoundRecord {
            round,
            wealth_before,
            wealth_after: settlement.wealth,
            bets: decisions.into_iter().map(AgentBets::from).collect(),
            forecast_nu,
            forecast: vec![forecast],
            oracle: vec![oracle],
            realized,
            log_growth: settlement.log_growth,
            sq_forecast_error,
            drift: settlement.drift,
        })?;
    }
    Ok(())
}

/// Runs `rounds` discrete rounds and collects every record.
pub fn run_discrete(
    environment: &mut dyn Environment,
    strategies: &mut [Box<dyn Strategy>],
    wealth0: WealthVector,
    rounds: usize,
) -> Result<Vec<RoundRecord>> {
    let mut records = Vec::with_capacity(rounds);
    run_discrete_with(environment, strategies, wealth0, rounds, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}

pub(crate) fn check_floor(round: usize, oracle: &SimplexPoint, floor: f64) -> Result<()> {
    // relative slack for the rounding in closed-form oracles
    let limit = floor * (1.0 - 1e-12);
    for (component, &value) in oracle.as_slice().iter().enumerate() {
        if value < limit {
            return Err(Error::OracleBelowFloor { round, component, value, floor });
        }
    }
    Ok(())
}
