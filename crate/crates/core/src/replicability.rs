//! Paired-run replicability: both runs share the internal stream and see
//! independent samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{Role, RngStream};
use crate::stats::rate_std_error;
use crate::tester::{ReplicableTester, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicabilityEstimate {
    pub disagreement: f64,
    pub std_error: f64,
    pub pairs: usize,
}

/// The two verdicts of every pair, in pair order. Pair `k` builds its
/// instance from `instance(stream)` (a clone for a fixed instance, a fresh
/// draw for a meta-distribution), fixes one internal stream, and runs the
/// tester on two independent sample streams.
pub fn replicability_pairs<I, T, F>(tester: &T, instance: F, pairs: usize, rng: &RngStream) -> Result<Vec<(Verdict, Verdict)>>
where
    T: ReplicableTester<I>,
    F: Fn(&RngStream) -> Result<I> + Sync,
    I: Send,
{
    (0..pairs as u64)
        .into_par_iter()
        .map(|k| {
            let trial = rng.trial(k);
            let input = instance(&trial.derive(Role::Instance))?;
            let internal = trial.derive(Role::Internal);
            let a = tester.run(&input, &internal, &trial.derive(Role::Sample1))?;
            let b = tester.run(&input, &internal, &trial.derive(Role::Sample2))?;
            Ok((a, b))
        })
        .collect()
}

/// Disagreement rate over `pairs` paired executions (see [`replicability_pairs`]).
pub fn measure_replicability<I, T, F>(tester: &T, instance: F, pairs: usize, rng: &RngStream) -> Result<ReplicabilityEstimate>
where
    T: ReplicableTester<I>,
    F: Fn(&RngStream) -> Result<I> + Sync,
    I: Send,
{
    if pairs == 0 {
        return Err(invalid("pairs", "must be at least 1"));
    }
    let disagree = replicability_pairs(tester, instance, pairs, rng)?
        .iter()
        .filter(|(a, b)| a != b)
        .count();
    let rate = disagree as f64 / pairs as f64;
    Ok(ReplicabilityEstimate {
        disagreement: rate,
        std_error: rate_std_error(rate, pairs),
        pairs,
    })
}
