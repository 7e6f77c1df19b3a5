//! Rounds with sub-step debiting. The stake of each agent is fixed at round
//! start and converted into bets over the sub-steps of a [`DebitSchedule`],
//! following an allocation path that may react to information revealed
//! inside the round. With a single sub-step this is the discrete game.

use crate::engine::{check_floor, finish_settlement, forecast_from_bets, pooled_bets, validate_profile, Settlement};
use crate::environments::FlowEnvironment;
use crate::strategies::{RoundView, Strategy, SubstepView};
use crate::types::{AgentBets, DebitSchedule, RoundRecord, StrategyDecision, WealthVector};
use crate::{sq_distance, Error, Result, SimplexPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRoundPlan {
    pub schedule: DebitSchedule,
    pub bets: Vec<AgentBets>,
}

impl FlowRoundPlan {
    pub fn new(schedule: DebitSchedule, bets: Vec<AgentBets>) -> Result<Self> {
        let k = schedule.substeps();
        for (agent, b) in bets.iter().enumerate() {
            if b.allocations.len() != k {
                return Err(Error::Schedule(format!(
                    "agent {} has an allocation path of length {}, schedule has {k} sub-steps",
                    agent + 1,
                    b.allocations.len()
                )));
            }
            crate::types::check_stake(b.stake_fraction)?;
        }
        Ok(Self { schedule, bets })
    }

    pub fn substeps(&self) -> usize {
        self.schedule.substeps()
    }

    /// The profile of decisions in force during sub-step `j`.
    pub fn decisions_at(&self, j: usize) -> Vec<StrategyDecision> {
        self.bets.iter().map(|b| b.decision_at(j)).collect()
    }

    fn validate(&self, wealth: &WealthVector, round: Option<usize>) -> Result<()> {
        for j in 0..self.substeps() {
            validate_profile(wealth, &self.decisions_at(j)).into_result(round)?;
        }
        Ok(())
    }

    fn pooled_at(&self, wealth: &WealthVector, j: usize) -> (f64, Vec<f64>) {
        let stakes: Vec<f64> = self.bets.iter().map(|b| b.stake_fraction).collect();
        let allocations: Vec<&SimplexPoint> = self.bets.iter().map(|b| &b.allocations[j]).collect();
        pooled_bets(wealth.shares(), &stakes, &allocations)
    }
}

/// Market forecast for every sub-step, from round-start wealth and stakes.
pub fn forecast_process(wealth: &WealthVector, plan: &FlowRoundPlan) -> Result<Vec<(f64, SimplexPoint)>> {
    if plan.bets.len() != wealth.len() {
        return Err(Error::DimensionMismatch { expected: wealth.len(), actual: plan.bets.len() });
    }
    plan.validate(wealth, None)?;
    (0..plan.substeps())
        .map(|j| {
            let (pool, bets) = plan.pooled_at(wealth, j);
            Ok((pool, forecast_from_bets(pool, &bets)?))
        })
        .collect()
}

/// Settles a round whose bets were placed over several sub-steps. Sub-step
/// `j` carries mass `w_j` of the staked pool and is paid out like a discrete
/// round on its own bets.
pub fn settle_flow_round(wealth: &WealthVector, plan: &FlowRoundPlan, realized: &SimplexPoint) -> Result<Settlement> {
    if plan.bets.len() != wealth.len() {
        return Err(Error::DimensionMismatch { expected: wealth.len(), actual: plan.bets.len() });
    }
    plan.validate(wealth, None)?;
    let dim = plan.bets[0].allocations[0].dim();
    crate::simplex::check_dims(dim, realized.dim())?;

    let weights = plan.schedule.weights();
    let pooled: Vec<(f64, Vec<f64>)> = (0..plan.substeps()).map(|j| plan.pooled_at(wealth, j)).collect();
    let pool = pooled[0].0;
    let x = realized.as_slice();

    let mut next = Vec::with_capacity(wealth.len());
    let mut log_growth = Vec::with_capacity(wealth.len());
    for (bets, &w) in plan.bets.iter().zip(wealth.shares()) {
        let nu = bets.stake_fraction;
        let mut payout = 0.0;
        let mut relative = 0.0;
        for n in 0..dim {
            if x[n] == 0.0 {
                continue;
            }
            let mut share = 0.0;
            let mut ratio = 0.0;
            for (j, (_, component_bets)) in pooled.iter().enumerate() {
                let lambda = bets.allocations[j][n];
                share += weights[j] * (nu * lambda * w / component_bets[n]);
                ratio += weights[j] * (lambda * pool / component_bets[n]);
            }
            payout += x[n] * share;
            relative += x[n] * ratio;
        }
        next.push(pool * payout + (1.0 - nu) * w);
        log_growth.push((nu * relative + 1.0 - nu).ln());
    }
    finish_settlement(wealth, next, log_growth)
}

/// Runs `rounds` flow rounds under `schedule`, handing each record to
/// `visit`.
///
/// At round start the environment draws the round's randomness, strategies
/// choose stakes and first allocations against the round-start oracle, and
/// then revise their allocation at each later sub-step after the
/// environment's signal for that sub-step. The recorded forecast error is
/// `sum_j w_j |lambda_bar_j - mu_j|^2`.
pub fn run_flow_with<F>(
    environment: &mut dyn FlowEnvironment,
    strategies: &mut [Box<dyn Strategy>],
    wealth0: WealthVector,
    schedule: &DebitSchedule,
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
    let k = schedule.substeps();
    if let Some(required) = environment.required_substeps() {
        if required != k {
            return Err(Error::Schedule(format!("environment requires {required} sub-steps, schedule has {k}")));
        }
    }
    let floor = environment.epsilon();
    let mut wealth = wealth0;
    let mut last_realized: Option<SimplexPoint> = None;
    let mut last_forecast: Option<SimplexPoint> = None;

    for round in 0..rounds {
        environment.begin_round(k);
        let mut oracles = Vec::with_capacity(k);
        let first_oracle = environment.substep_oracle(0);
        check_floor(round, &first_oracle, floor)?;
        let view = RoundView {
            round,
            wealth: &wealth,
            oracle: &first_oracle,
            state: environment.observable_state(),
            last_realized: last_realized.as_ref(),
            last_forecast: last_forecast.as_ref(),
        };
        let decisions = strategies
            .iter_mut()
            .map(|s| s.decide(&view))
            .collect::<Result<Vec<_>>>()?;
        let mut paths: Vec<AgentBets> = decisions.into_iter().map(AgentBets::from).collect();
        oracles.push(first_oracle);

        for j in 1..k {
            let oracle = environment.substep_oracle(j);
            check_floor(round, &oracle, floor)?;
            let signal = environment.substep_signal(j);
            let sub_view = SubstepView { round, substep: j, oracle: &oracle, signal: &signal };
            for (strategy, bets) in strategies.iter_mut().zip(paths.iter_mut()) {
                let current = bets.allocations[j - 1].clone();
                bets.allocations.push(strategy.revise(&sub_view, &current)?);
            }
            oracles.push(oracle);
        }

        let plan = FlowRoundPlan::new(schedule.clone(), paths)?;
        plan.validate(&wealth, Some(round))?;
        let forecasts = forecast_process(&wealth, &plan)?;
        let realized = environment.finish_round();
        let settlement = settle_flow_round(&wealth, &plan, &realized)?;

        let mut sq_forecast_error = 0.0;
        for ((w, (_, forecast)), oracle) in schedule.weights().iter().zip(&forecasts).zip(&oracles) {
            sq_forecast_error += w * sq_distance(forecast, oracle)?;
        }
        let forecast_nu = forecasts[0].0;
        let forecast: Vec<SimplexPoint> = forecasts.into_iter().map(|(_, f)| f).collect();

        last_realized = Some(realized.clone());
        last_forecast = forecast.last().cloned();
        let wealth_before = std::mem::replace(&mut wealth, settlement.wealth.clone());
        visit(RoundRecord {
            round,
            wealth_before,
            wealth_after: settlement.wealth,
            bets: plan.bets,
            forecast_nu,
            forecast,
            oracle: oracles,
            realized,
            log_growth: settlement.log_growth,
            sq_forecast_error,
            drift: settlement.drift,
        })?;
    }
    Ok(())
}

/// Runs `rounds` flow rounds and collects every record.
pub fn run_flow(
    environment: &mut dyn FlowEnvironment,
    strategies: &mut [Box<dyn Strategy>],
    wealth0: WealthVector,
    schedule: &DebitSchedule,
    rounds: usize,
) -> Result<Vec<RoundRecord>> {
    let mut records = Vec::with_capacity(rounds);
    run_flow_with(environment, strategies, wealth0, schedule, rounds, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}
