//! Experiment harness for the replicable testers: configs, seeded trial
//! orchestration, calibration and result files.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod results;
pub mod samples;

pub use calibrate::{run_calibration, Calibration, Constants};
pub use config::{ExperimentConfig, ExperimentSpec, Expectations, SCHEMA_VERSION};
pub use error::{CliError, CliResult};
pub use experiment::run_experiment;
pub use results::{Aggregate, ExperimentResult, TrialRecord};

/// Every violated bound, checked against each group.
pub fn check_expectations(expect: &Expectations, aggregate: &Aggregate) -> Vec<String> {
    let mut failures = Vec::new();
    for (group, agg) in &aggregate.groups {
        if let Some(acc) = &agg.accept {
            if let Some(lo) = expect.min_accept_rate.filter(|&lo| acc.rate < lo) {
                failures.push(format!("{group}: accept rate {} < {lo}", acc.rate));
            }
            if let Some(hi) = expect.max_accept_rate.filter(|&hi| acc.rate > hi) {
                failures.push(format!("{group}: accept rate {} > {hi}", acc.rate));
            }
        }
        if let (Some(d), Some(hi)) = (&agg.disagreement, expect.max_disagreement) {
            if d.rate > hi {
                failures.push(format!("{group}: disagreement {} > {hi}", d.rate));
            }
        }
    }
    failures
}
