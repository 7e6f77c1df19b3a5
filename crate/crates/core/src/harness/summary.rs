use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Verdict;
use crate::{Error, Result};

/// One replica's row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub config_hash: String,
    pub replica: usize,
    pub convergence_pass: bool,
    /// One verdict per agent.
    pub verdicts: Vec<Verdict>,
    /// Named scalar metrics in a fixed order.
    pub metrics: Vec<(String, f64)>,
}

impl ReplicaSummary {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn header(&self) -> Vec<String> {
        let mut header = vec!["config_hash".to_string(), "replica".into(), "convergence_pass".into()];
        header.extend((1..=self.verdicts.len()).map(|m| format!("verdict_{m}")));
        header.extend(self.metrics.iter().map(|(n, _)| n.clone()));
        header
    }

    fn row(&self) -> Vec<String> {
        let mut row = vec![self.config_hash.clone(), self.replica.to_string(), self.convergence_pass.to_string()];
        row.extend(self.verdicts.iter().map(|v| v.as_str().to_string()));
        row.extend(self.metrics.iter().map(|(_, v)| v.to_string()));
        row
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_summary_csv<W: Write>(writer: W, summaries: &[ReplicaSummary]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    if let Some(first) = summaries.first() {
        csv.write_record(first.header()).map_err(csv_error)?;
    }
    for s in summaries {
        csv.write_record(s.row()).map_err(csv_error)?;
    }
    csv.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<ReplicaSummary>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let bad = |line: usize, what: &str| Error::Io(format!("summary row {line}: {what}"));
    let mut summaries = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let mut summary = ReplicaSummary {
            config_hash: String::new(),
            replica: 0,
            convergence_pass: false,
            verdicts: Vec::new(),
            metrics: Vec::new(),
        };
        for (name, value) in header.iter().zip(record.iter()) {
            match name.as_str() {
                "config_hash" => summary.config_hash = value.to_string(),
                "replica" => summary.replica = value.parse().map_err(|_| bad(line, "bad replica index"))?,
                "convergence_pass" => {
                    summary.convergence_pass = value.parse().map_err(|_| bad(line, "bad convergence flag"))?
                }
                n if n.starts_with("verdict_") => summary.verdicts.push(
                    serde_json::from_value(serde_json::Value::String(value.to_string()))
                        .map_err(|_| bad(line, "bad verdict"))?,
                ),
                n => summary
                    .metrics
                    .push((n.to_string(), value.parse().map_err(|_| bad(line, &format!("bad value for {n}")))?)),
            }
        }
        summaries.push(summary);
    }
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation; zero for a single replica.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFractions {
    /// One-based agent index.
    pub agent: usize,
    pub survived: f64,
    pub extinct: f64,
    pub inconclusive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config_hash: String,
    pub replicas: usize,
    pub convergence_pass_fraction: f64,
    pub verdicts: Vec<VerdictFractions>,
    pub metrics: Vec<MetricStats>,
}

fn stats(name: &str, values: &mut [f64]) -> MetricStats {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MetricStats {
        name: name.to_string(),
        mean,
        std,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Merges replica summaries. The result does not depend on their order.
pub fn aggregate(summaries: &[ReplicaSummary]) -> Result<AggregateReport> {
    let first = summaries.first().ok_or_else(|| Error::InvalidArgument("no replica summaries to aggregate".into()))?;
    let names: Vec<&str> = first.metrics.iter().map(|(n, _)| n.as_str()).collect();
    for s in summaries {
        if s.config_hash != first.config_hash {
            return Err(Error::InvalidArgument(format!(
                "summaries come from different configs ({} and {})",
                first.config_hash, s.config_hash
            )));
        }
        if s.verdicts.len() != first.verdicts.len() || !s.metrics.iter().map(|(n, _)| n.as_str()).eq(names.iter().copied())
        {
            return Err(Error::InvalidArgument(format!("replica {} has different columns", s.replica)));
        }
    }
    let n = summaries.len() as f64;
    let fraction = |count: usize| count as f64 / n;
    let metrics = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut values: Vec<f64> = summaries.iter().map(|s| s.metrics[i].1).collect();
            stats(name, &mut values)
        })
        .collect();
    let verdicts = (0..first.verdicts.len())
        .map(|m| {
            let count = |v: Verdict| summaries.iter().filter(|s| s.verdicts[m] == v).count();
            VerdictFractions {
                agent: m + 1,
                survived: fraction(count(Verdict::Survived)),
                extinct: fraction(count(Verdict::Extinct)),
                inconclusive: fraction(count(Verdict::Inconclusive)),
            }
        })
        .collect();
    Ok(AggregateReport {
        config_hash: first.config_hash.clone(),
        replicas: summaries.len(),
        convergence_pass_fraction: fraction(summaries.iter().filter(|s| s.convergence_pass).count()),
        verdicts,
        metrics,
    })
}
