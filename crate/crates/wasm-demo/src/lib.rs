//! Browser bindings for the market simulator. Every export takes and
//! returns JSON strings so the page needs no generated glue beyond
//! wasm-bindgen's string passing.

use parimarket::engine::{market_forecast, settle_round, validate_profile};
use parimarket::estimators::EncodingSpec;
use parimarket::harness::{run_replica_with, ExperimentConfig};
use parimarket::{SimplexPoint, StrategyDecision, WealthVector};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest number of rounds a browser run may request.
pub const MAX_ROUNDS: usize = 200_000;

#[derive(Serialize)]
struct Trace {
    rounds: Vec<usize>,
    log_wealth: Vec<Vec<f64>>,
    forecast: Vec<Vec<f64>>,
    oracle: Vec<Vec<f64>>,
    cum_sq_error: Vec<f64>,
    verdicts: Vec<String>,
    metrics: Vec<(String, f64)>,
}

fn error_json(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

/// Runs replica 0 of an experiment config and returns its trajectories
/// downsampled to at most `points` rounds.
pub fn simulate(config_json: &str, points: usize) -> Result<String, String> {
    let config = ExperimentConfig::from_json(config_json).map_err(|e| e.to_string())?;
    if config.rounds > MAX_ROUNDS {
        return Err(format!("rounds: at most {MAX_ROUNDS} in the browser"));
    }
    let stride = config.rounds.div_ceil(points.max(2) - 1).max(1);
    let last = config.rounds - 1;
    let mut trace = Trace {
        rounds: Vec::new(),
        log_wealth: Vec::new(),
        forecast: Vec::new(),
        oracle: Vec::new(),
        cum_sq_error: Vec::new(),
        verdicts: Vec::new(),
        metrics: Vec::new(),
    };
    let outcome = run_replica_with(&config, 0, |record, _| {
        if record.round % stride == 0 || record.round == last {
            trace.rounds.push(record.round);
            trace.forecast.push(record.forecast.last().expect("sub-step").as_slice().to_vec());
            trace.oracle.push(record.oracle.last().expect("sub-step").as_slice().to_vec());
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    // series index t holds the state after t rounds
    let after = |r: &usize| r + 1;
    trace.cum_sq_error = trace.rounds.iter().map(|r| outcome.series.cum_sq_error[after(r)]).collect();
    trace.log_wealth = outcome
        .series
        .log_wealth
        .iter()
        .map(|lw| trace.rounds.iter().map(|r| lw[after(r)]).collect())
        .collect();
    trace.verdicts = outcome.summary.verdicts.iter().map(|v| v.as_str().to_string()).collect();
    trace.metrics = outcome.summary.metrics;
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Profile {
    wealth: Vec<f64>,
    bets: Vec<Bet>,
    outcome: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Bet {
    stake: f64,
    allocation: Vec<f64>,
}

/// Settles one round for a hand-built profile. Invalid profiles come back
/// with `valid: false` and the reasons instead of an error.
pub fn settle(profile_json: &str) -> Result<String, String> {
    let profile: Profile = serde_json::from_str(profile_json).map_err(|e| e.to_string())?;
    let wealth = WealthVector::from_initial(&profile.wealth).map_err(|e| e.to_string())?;
    let decisions = profile
        .bets
        .into_iter()
        .map(|b| StrategyDecision::new(b.stake, SimplexPoint::new(b.allocation)?))
        .collect::<parimarket::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let outcome = SimplexPoint::new(profile.outcome).map_err(|e| e.to_string())?;

    let check = validate_profile(&wealth, &decisions);
    if !check.ok {
        return Ok(json!({ "valid": false, "reasons": check.reasons_text() }).to_string());
    }
    let (nu, forecast) = market_forecast(&wealth, &decisions).map_err(|e| e.to_string())?;
    let settled = settle_round(&wealth, &decisions, &outcome).map_err(|e| e.to_string())?;
    Ok(json!({
        "valid": true,
        "forecast_nu": nu,
        "forecast": forecast.as_slice(),
        "wealth_before": wealth.shares(),
        "wealth_after": settled.wealth.shares(),
        "log_growth": settled.log_growth,
    })
    .to_string())
}

/// Decodes a market forecast under an encoding.
pub fn decode(encoding_json: &str, forecast: &[f64]) -> Result<String, String> {
    let encoding: EncodingSpec = serde_json::from_str(encoding_json).map_err(|e| e.to_string())?;
    encoding.validate().map_err(|e| e.to_string())?;
    let forecast = SimplexPoint::new(forecast.to_vec()).map_err(|e| e.to_string())?;
    let estimate = encoding.decode(&forecast).map_err(|e| e.to_string())?;
    serde_json::to_string(&estimate).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(config_json: &str, points: usize) -> String {
    simulate(config_json, points).unwrap_or_else(error_json)
}

#[wasm_bindgen(js_name = settle)]
pub fn settle_js(profile_json: &str) -> String {
    settle(profile_json).unwrap_or_else(error_json)
}

#[wasm_bindgen(js_name = decode)]
pub fn decode_js(encoding_json: &str, forecast: &[f64]) -> String {
    decode(encoding_json, forecast).unwrap_or_else(error_json)
}
