//! Run diagnostics: accumulated forecast error, the KL compensator of each
//! agent, exact conditional drift of `ln W + U`, log-wealth slopes and
//! survival verdicts.

use serde::{Deserialize, Serialize};

use crate::engine::settle_round;
use crate::environments::{Environment, OutcomeDistribution};
use crate::types::{RoundRecord, StrategyDecision, WealthVector};
use crate::{sq_distance, Error, Result, SimplexPoint};

/// Tolerance of the drift certificate.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-10;

/// Shortest window accepted by [`log_wealth_slope`].
pub const MIN_SLOPE_WINDOW: usize = 100;

/// `nu * KL(mu || lambda)`.
pub fn kl_increment(nu: f64, mu: &SimplexPoint, lambda: &SimplexPoint) -> Result<f64> {
    crate::simplex::check_dims(mu.dim(), lambda.dim())?;
    let mut kl = 0.0;
    for (n, (&m, &l)) in mu.as_slice().iter().zip(lambda.as_slice()).enumerate() {
        if l <= 0.0 {
            return Err(Error::ZeroComponent { index: n });
        }
        if m > 0.0 {
            kl += m * (m / l).ln();
        }
    }
    Ok(nu * kl.max(0.0))
}

/// Per-run series, grown one settled round at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    /// Running sum of squared market forecast errors, starting at 0.
    pub cum_sq_error: Vec<f64>,
    /// `ln W_t^m` per agent, accumulated from payoff ratios.
    pub log_wealth: Vec<Vec<f64>>,
    /// Wealth share per agent.
    pub wealth: Vec<Vec<f64>>,
    /// `U_t^m`; infinite once an agent bets zero on a component.
    pub kl_compensator: Vec<Vec<f64>>,
    /// Running `sum_t |lambda_t^m - mu_t|^2` per agent.
    pub sq_error: Vec<Vec<f64>>,
}

impl DiagnosticsSeries {
    pub fn new(wealth0: &WealthVector) -> Self {
        let m = wealth0.len();
        Self {
            cum_sq_error: vec![0.0],
            log_wealth: wealth0.shares().iter().map(|w| vec![w.ln()]).collect(),
            wealth: wealth0.shares().iter().map(|&w| vec![w]).collect(),
            kl_compensator: vec![vec![0.0]; m],
            sq_error: vec![vec![0.0]; m],
        }
    }

    pub fn rounds(&self) -> usize {
        self.cum_sq_error.len() - 1
    }

    pub fn agents(&self) -> usize {
        self.wealth.len()
    }

    /// `Z_t^m = ln W_t^m + U_t^m`.
    pub fn z_value(&self, agent: usize) -> Vec<f64> {
        self.log_wealth[agent].iter().zip(&self.kl_compensator[agent]).map(|(l, u)| l + u).collect()
    }

    /// Appends a settled round. `weights` are the debit masses of the
    /// round's sub-steps, `[1.0]` for discrete rounds.
    pub fn push(&mut self, record: &RoundRecord, weights: &[f64]) -> Result<()> {
        crate::simplex::check_dims(self.agents(), record.bets.len())?;
        crate::simplex::check_dims(weights.len(), record.oracle.len())?;
        let last = self.cum_sq_error[self.rounds()];
        self.cum_sq_error.push(last + record.sq_forecast_error);
        for (m, bets) in record.bets.iter().enumerate() {
            crate::simplex::check_dims(weights.len(), bets.allocations.len())?;
            let mut kl = 0.0;
            let mut err = 0.0;
            for ((w, lambda), mu) in weights.iter().zip(&bets.allocations).zip(&record.oracle) {
                kl += w * kl_increment(bets.stake_fraction, mu, lambda).unwrap_or(f64::INFINITY);
                err += w * sq_distance(lambda, mu)?;
            }
            push_increment(&mut self.kl_compensator[m], kl);
            push_increment(&mut self.sq_error[m], err);
            push_increment(&mut self.log_wealth[m], record.log_growth[m]);
            self.wealth[m].push(record.wealth_after.share(m));
        }
        Ok(())
    }
}

fn push_increment(series: &mut Vec<f64>, increment: f64) {
    let last = *series.last().expect("series starts non-empty");
    series.push(last + increment);
}

/// Exact conditional expectation of one round's `Z` increment for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `E[ln W_{t+1} - ln W_t | F_t]`.
    pub expected_log_growth: f64,
    /// `nu * KL(mu || lambda)`.
    pub compensator_increment: f64,
    pub expected_increment: f64,
    pub holds: bool,
}

/// Computes `E[Z_{t+1} - Z_t | F_t]` for `tracked` by settling the round
/// once per atom of `outcomes`.
pub fn submartingale_increment(
    outcomes: &OutcomeDistribution,
    mu: &SimplexPoint,
    wealth: &WealthVector,
    decisions: &[StrategyDecision],
    tracked: usize,
) -> Result<Certificate> {
    let decision = decisions
        .get(tracked)
        .ok_or_else(|| Error::InvalidArgument(format!("no agent {tracked} in a profile of {}", decisions.len())))?;
    let compensator_increment = kl_increment(decision.stake_fraction, mu, &decision.allocation)?;
    let mut expected_log_growth = 0.0;
    for (p, x) in outcomes.atoms() {
        if *p == 0.0 {
            continue;
        }
        expected_log_growth += p * settle_round(wealth, decisions, x)?.log_growth[tracked];
    }
    let expected_increment = expected_log_growth + compensator_increment;
    Ok(Certificate {
        expected_log_growth,
        compensator_increment,
        expected_increment,
        holds: expected_increment >= -CERTIFICATE_TOLERANCE,
    })
}

/// [`submartingale_increment`] at the environment's current state.
pub fn submartingale_check(
    environment: &dyn Environment,
    wealth: &WealthVector,
    decisions: &[StrategyDecision],
    tracked: usize,
) -> Result<Certificate> {
    let outcomes = environment.outcomes().ok_or(Error::NotEnumerable)?;
    submartingale_increment(&outcomes, &environment.oracle(), wealth, decisions, tracked)
}

/// Least-squares slope of `log_wealth[t]` over `t` in `[start, end]`.
pub fn log_wealth_slope(log_wealth: &[f64], start: usize, end: usize) -> Result<f64> {
    if end >= log_wealth.len() || end < start + MIN_SLOPE_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "slope window [{start}, {end}] needs at least {MIN_SLOPE_WINDOW} rounds inside [0, {}]",
            log_wealth.len().saturating_sub(1)
        )));
    }
    let window = &log_wealth[start..=end];
    let n = window.len() as f64;
    let t_mean = (start + end) as f64 / 2.0;
    let y_mean = window.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in window.iter().enumerate() {
        let dt = (start + i) as f64 - t_mean;
        num += dt * (y - y_mean);
        den += dt * dt;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Survived,
    Extinct,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Survived => "SURVIVED",
            Verdict::Extinct => "EXTINCT",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictThresholds {
    pub survival_floor: f64,
    pub extinction_threshold: f64,
    /// Trailing fraction of the run whose minimum decides survival.
    pub tail_fraction: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self { survival_floor: 1e-3, extinction_threshold: 1e-6, tail_fraction: 0.5 }
    }
}

impl VerdictThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.survival_floor > 0.0 && self.survival_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!("survival floor {} outside (0, 1]", self.survival_floor)));
        }
        if !(self.extinction_threshold >= 0.0 && self.extinction_threshold < self.survival_floor) {
            return Err(Error::InvalidArgument(format!(
                "extinction threshold {} must lie in [0, survival floor)",
                self.extinction_threshold
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("tail fraction {} outside (0, 1]", self.tail_fraction)));
        }
        Ok(())
    }
}

/// Minimum of a wealth series over its trailing `tail_fraction`.
pub fn tail_min(wealth: &[f64], tail_fraction: f64) -> f64 {
    let len = wealth.len();
    let tail = ((len as f64 * tail_fraction).ceil() as usize).clamp(1, len.max(1));
    wealth[len - tail..].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Verdict for one agent's wealth-share series.
pub fn survival_verdict(wealth: &[f64], thresholds: &VerdictThresholds) -> Verdict {
    if wealth.is_empty() {
        return Verdict::Inconclusive;
    }
    if tail_min(wealth, thresholds.tail_fraction) >= thresholds.survival_floor {
        Verdict::Survived
    } else if wealth[wealth.len() - 1] <= thresholds.extinction_threshold {
        Verdict::Extinct
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSettings {
    /// Number of dyadic windows ending at the final round.
    pub windows: usize,
    /// Bound on the final window's increment.
    pub delta: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { windows: 2, delta: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub start: usize,
    pub end: usize,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub total: f64,
    pub windows: Vec<TailWindow>,
    pub pass: bool,
}

/// Increments of `cum_sq_error` over `[T/2^k, T/2^(k-1)]`, oldest first.
/// Passes when each window's increment is below the one before (or both
/// are zero) and the last is below `delta`.
pub fn convergence_report(cum_sq_error: &[f64], settings: &ConvergenceSettings) -> ConvergenceReport {
    let rounds = cum_sq_error.len().saturating_sub(1);
    let total = cum_sq_error.last().copied().unwrap_or(0.0);
    let mut windows = Vec::with_capacity(settings.windows);
    let mut end = rounds;
    for _ in 0..settings.windows {
        let start = end / 2;
        if start == end {
            break;
        }
        windows.push(TailWindow { start, end, increment: cum_sq_error[end] - cum_sq_error[start] });
        end = start;
    }
    windows.reverse();
    let decaying = windows
        .windows(2)
        .all(|w| w[1].increment < w[0].increment || (w[0].increment == 0.0 && w[1].increment == 0.0));
    let pass = windows.len() == settings.windows
        && decaying
        && windows.last().is_some_and(|w| w.increment < settings.delta);
    ConvergenceReport { total, windows, pass }
}
