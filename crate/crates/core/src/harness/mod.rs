//! Seeded Monte Carlo experiments: config parsing, replica execution, and
//! JSONL/CSV/JSON output.
//!
//! An output directory holds `config.json` (the effective config, minus
//! the output directory itself),
//! `replica_NNN.jsonl` (one round record per line, with the decoded
//! estimate under `estimate`), `summary.csv` (one row per replica) and
//! `aggregate.json`.

mod config;
mod summary;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

pub use config::{
    AgentSpec, DiagnosticsConfig, EngineSpec, ExperimentConfig, OutputConfig, Overrides, DEFAULT_SUBSTEPS,
    SCHEMA_VERSION,
};
pub use summary::{
    aggregate, read_summary_csv, write_summary_csv, AggregateReport, MetricStats, ReplicaSummary, VerdictFractions,
};

use crate::diagnostics::{convergence_report, log_wealth_slope, survival_verdict, tail_min, DiagnosticsSeries};
use crate::engine::run_discrete_with;
use crate::estimators::Estimate;
use crate::flow::run_flow_with;
use crate::rng::StreamFactory;
use crate::strategies::Strategy;
use crate::{Error, Result, RoundRecord};

/// Everything a replica produces besides its record stream.
#[derive(Debug, Clone)]
pub struct ReplicaOutcome {
    pub series: DiagnosticsSeries,
    pub summary: ReplicaSummary,
}

#[derive(Serialize)]
struct OutputLine<'a> {
    #[serde(flatten)]
    record: &'a RoundRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<&'a Estimate>,
}

/// Runs one replica of a validated config, handing every record and its
/// decoded estimate to `on_record`.
pub fn run_replica_with<F>(config: &ExperimentConfig, replica: usize, mut on_record: F) -> Result<ReplicaOutcome>
where
    F: FnMut(&RoundRecord, Option<&Estimate>) -> Result<()>,
{
    let streams = StreamFactory::new(config.seed, replica as u64);
    let wealth0 = config.initial_wealth()?;
    let mut series = DiagnosticsSeries::new(&wealth0);
    let encoding = config.encoding();
    let window_start = config.rounds - config.estimate_window();
    let mut estimate_sums: Vec<(String, f64)> = Vec::new();
    let mut last_wealth = wealth0.clone();

    let schedule = config.schedule()?;
    let weights = schedule.as_ref().map_or_else(|| vec![1.0], |s| s.weights().to_vec());
    let mut visit = |record: RoundRecord| -> Result<()> {
        series.push(&record, &weights)?;
        let estimate = match &encoding {
            Some(enc) => Some(enc.decode(record.forecast.last().expect("at least one sub-step"))?),
            None => None,
        };
        if record.round >= window_start {
            if let Some(est) = &estimate {
                let cols = est.columns();
                if estimate_sums.is_empty() {
                    estimate_sums = cols.iter().map(|(n, _)| (n.clone(), 0.0)).collect();
                }
                estimate_sums.iter_mut().zip(cols).for_each(|(s, (_, v))| s.1 += v);
            }
        }
        on_record(&record, estimate.as_ref())?;
        last_wealth = record.wealth_after;
        Ok(())
    };

    match &schedule {
        None => {
            let mut environment = config.environment.build(streams.environment())?;
            let dimension = environment.dimension();
            let mut strategies = build_strategies(config, dimension, &streams)?;
            run_discrete_with(environment.as_mut(), &mut strategies, wealth0, config.rounds, &mut visit)?;
        }
        Some(schedule) => {
            let mut environment = config.environment.build_flow(streams.environment())?;
            let dimension = environment.dimension();
            let mut strategies = build_strategies(config, dimension, &streams)?;
            run_flow_with(environment.as_mut(), &mut strategies, wealth0, schedule, config.rounds, &mut visit)?;
        }
    }

    let window_len = (config.rounds - window_start) as f64;
    let summary = summarize(config, replica, &series, &last_wealth, estimate_sums, window_len);
    Ok(ReplicaOutcome { series, summary })
}

fn build_strategies(config: &ExperimentConfig, dimension: usize, streams: &StreamFactory) -> Result<Vec<Box<dyn Strategy>>> {
    config
        .agents
        .iter()
        .enumerate()
        .map(|(m, a)| a.strategy.build(dimension, streams.agent(m)))
        .collect()
}

fn summarize(
    config: &ExperimentConfig,
    replica: usize,
    series: &DiagnosticsSeries,
    last_wealth: &crate::WealthVector,
    estimate_sums: Vec<(String, f64)>,
    window_len: f64,
) -> ReplicaSummary {
    let diag = &config.diagnostics;
    let report = convergence_report(&series.cum_sq_error, &diag.convergence);
    let mut metrics = vec![("cum_sq_error".to_string(), report.total)];
    for k in 0..diag.convergence.windows {
        let value = report.windows.get(k).map_or(f64::NAN, |w| w.increment);
        metrics.push((format!("window_{}_increment", k + 1), value));
    }
    let slope_window = config.slope_window();
    let mut verdicts = Vec::with_capacity(series.agents());
    for m in 0..series.agents() {
        let id = m + 1;
        let wealth = &series.wealth[m];
        let slope = slope_window
            .and_then(|(a, b)| log_wealth_slope(&series.log_wealth[m], a, b).ok())
            .unwrap_or(f64::NAN);
        metrics.push((format!("final_wealth_{id}"), wealth[wealth.len() - 1]));
        metrics.push((format!("tail_min_{id}"), tail_min(wealth, diag.verdict.tail_fraction)));
        metrics.push((format!("slope_{id}"), slope));
        metrics.push((format!("sq_error_{id}"), *series.sq_error[m].last().expect("non-empty")));
        metrics.push((format!("kl_compensator_{id}"), *series.kl_compensator[m].last().expect("non-empty")));
        metrics.push((format!("underflow_{id}"), if last_wealth.underflow_flags()[m] { 1.0 } else { 0.0 }));
        verdicts.push(survival_verdict(wealth, &diag.verdict));
    }
    metrics.extend(estimate_sums.into_iter().map(|(n, s)| (format!("estimate_{n}"), s / window_len)));
    ReplicaSummary { config_hash: config.hash(), replica, convergence_pass: report.pass, verdicts, metrics }
}

/// Runs every replica without writing records, returning the summaries in
/// replica order.
pub fn simulate(config: &ExperimentConfig, parallel: bool) -> Result<Vec<ReplicaSummary>> {
    config.validate()?;
    for_each_replica(config, parallel, |r| Ok(run_replica_with(config, r, |_, _| Ok(()))?.summary))
}

fn for_each_replica<T, F>(config: &ExperimentConfig, parallel: bool, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..config.replicas).into_par_iter().map(job).collect();
    }
    let _ = parallel;
    (0..config.replicas).map(job).collect()
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_replica(config: &ExperimentConfig, replica: usize, dir: &Path) -> Result<ReplicaSummary> {
    let path = dir.join(format!("replica_{replica:03}.jsonl"));
    let mut out = BufWriter::new(File::create(&path).map_err(|e| io_error(&path, e))?);
    let thin = config.output.thin;
    let last = config.rounds - 1;
    let outcome = run_replica_with(config, replica, |record, estimate| {
        if record.round % thin == 0 || record.round == last {
            serde_json::to_writer(&mut out, &OutputLine { record, estimate }).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| io_error(&path, e))?;
        }
        Ok(())
    })?;
    out.flush().map_err(|e| io_error(&path, e))?;
    Ok(outcome.summary)
}

/// Runs the experiment and writes every artifact into the configured
/// output directory. Output bytes do not depend on `parallel`.
pub fn run_experiment(config: &ExperimentConfig, parallel: bool) -> Result<AggregateReport> {
    config.validate()?;
    let dir = config
        .output
        .dir
        .as_deref()
        .ok_or_else(|| Error::config("output.dir", "an output directory is required"))?;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let config_path = dir.join("config.json");
    let mut recorded = config.clone();
    recorded.output.dir = None;
    fs::write(&config_path, recorded.to_json() + "\n").map_err(|e| io_error(&config_path, e))?;

    let summaries = for_each_replica(config, parallel, |r| write_replica(config, r, dir))?;

    let summary_path = dir.join("summary.csv");
    let file = File::create(&summary_path).map_err(|e| io_error(&summary_path, e))?;
    write_summary_csv(BufWriter::new(file), &summaries)?;

    let report = aggregate(&summaries)?;
    write_aggregate(dir, &report)?;
    Ok(report)
}

pub fn write_aggregate(dir: &Path, report: &AggregateReport) -> Result<()> {
    let path = dir.join("aggregate.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

/// Re-aggregates the summary table of a finished run.
pub fn report(dir: &Path) -> Result<AggregateReport> {
    let path = dir.join("summary.csv");
    let file = File::open(&path).map_err(|e| io_error(&path, e))?;
    aggregate(&read_summary_csv(file)?)
}
