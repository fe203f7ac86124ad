//! Per-trial records, their aggregates, and result files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use reptest::stats::{mean_var, rate_std_error};
use reptest::Verdict;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One row of the results CSV. Paired experiments fill the `_b` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Fingerprint of the trial's derived stream.
    pub seed: u64,
    pub group: String,
    pub verdict: Option<Verdict>,
    pub verdict_b: Option<Verdict>,
    pub statistic: Option<f64>,
    pub statistic_b: Option<f64>,
    pub threshold: Option<f64>,
}

impl TrialRecord {
    pub fn new(trial: u64, seed: u64, group: impl Into<String>) -> Self {
        TrialRecord {
            trial,
            seed,
            group: group.into(),
            verdict: None,
            verdict_b: None,
            statistic: None,
            statistic_b: None,
            threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let (mean, variance) = mean_var(xs);
        Some(Summary {
            count: xs.len(),
            mean,
            variance,
            std_error: (variance / xs.len() as f64).sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rate: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Rate {
    fn of(hits: usize, count: usize) -> Option<Self> {
        (count > 0).then(|| {
            let rate = hits as f64 / count as f64;
            Rate {
                rate,
                std_error: rate_std_error(rate, count),
                count,
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub trials: usize,
    pub accept: Option<Rate>,
    pub disagreement: Option<Rate>,
    pub statistic: Option<Summary>,
    pub statistic_b: Option<Summary>,
}

/// Aggregates per group, plus the pooled group `"*"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub groups: BTreeMap<String, GroupAggregate>,
}

fn aggregate_group(records: &[&TrialRecord]) -> GroupAggregate {
    let verdicts: Vec<Verdict> = records.iter().filter_map(|r| r.verdict).collect();
    let accepted = verdicts.iter().filter(|v| v.accepted()).count();
    let pairs: Vec<(Verdict, Verdict)> = records.iter().filter_map(|r| Some((r.verdict?, r.verdict_b?))).collect();
    let disagree = pairs.iter().filter(|(a, b)| a != b).count();
    let stat: Vec<f64> = records.iter().filter_map(|r| r.statistic).collect();
    let stat_b: Vec<f64> = records.iter().filter_map(|r| r.statistic_b).collect();
    GroupAggregate {
        trials: records.len(),
        accept: Rate::of(accepted, verdicts.len()),
        disagreement: Rate::of(disagree, pairs.len()),
        statistic: Summary::of(&stat),
        statistic_b: Summary::of(&stat_b),
    }
}

impl Aggregate {
    /// Records are sorted by trial index first, so the input order never matters.
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut sorted: Vec<&TrialRecord> = records.iter().collect();
        sorted.sort_by(|a, b| (a.trial, &a.group).cmp(&(b.trial, &b.group)));
        let mut by_group: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
        for r in &sorted {
            by_group.entry(r.group.clone()).or_default().push(r);
        }
        let mut groups: BTreeMap<String, GroupAggregate> = by_group.iter().map(|(g, rs)| (g.clone(), aggregate_group(rs))).collect();
        if by_group.len() > 1 {
            groups.insert("*".into(), aggregate_group(&sorted));
        }
        Aggregate { groups }
    }

    pub fn pooled(&self) -> Option<&GroupAggregate> {
        self.groups.get("*").or_else(|| self.groups.values().next())
    }
}

/// Everything one experiment produces.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub kind: String,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    /// Plot-ready CSV for experiments whose output is not per trial.
    #[serde(skip)]
    pub table: Option<String>,
    /// Experiment-specific values for the sidecar.
    pub details: serde_json::Value,
}

pub fn records_csv(records: &[TrialRecord]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_records(path: &Path) -> CliResult<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Validation(format!("cannot read records {}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

/// `results.csv` gets the sidecar `results.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut s = out.as_os_str().to_owned();
        s.push(".aggregate.json");
        PathBuf::from(s)
    } else {
        out.with_extension("json")
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path.display(), e))
}

/// Writes the main CSV and the JSON sidecar. Wall-clock goes only into the sidecar.
pub fn write_result(result: &ExperimentResult, out: &Path, wall_clock_secs: f64) -> CliResult<PathBuf> {
    let body = match &result.table {
        Some(t) => t.clone(),
        None => records_csv(&result.records)?,
    };
    write_file(out, &body)?;
    let mut sidecar = serde_json::to_value(result)?;
    sidecar["wall_clock_secs"] = serde_json::json!(wall_clock_secs);
    let path = sidecar_path(out);
    write_file(&path, &serde_json::to_string_pretty(&sidecar)?)?;
    Ok(path)
}
