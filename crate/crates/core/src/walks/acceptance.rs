use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hard_instances::{draw_uniformity_hard, UniformityHardParams};
use crate::measure::NonNegativeMeasure;
use crate::rng::{Role, RngStream};
use crate::sampling::sample_counts_poissonized;
use crate::stats::{mean_var, rate_std_error};
use crate::tester::{CountTester, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceEstimate {
    pub rate: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// `Pr_{T ~ PoiS(m, p)}[A(T) = Accept]` with the tester's internal stream
/// held fixed. Trial `k` draws its counts from `samples.trial(k)`.
pub fn acceptance_probability(
    tester: &dyn CountTester,
    p: &NonNegativeMeasure,
    m: f64,
    trials: usize,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<AcceptanceEstimate> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let accepted = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let counts = sample_counts_poissonized(p, m, &mut samples.trial(k).rng());
            tester.decide(&counts, internal).map(|v| (v == Verdict::Accept) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let rate = accepted as f64 / trials as f64;
    Ok(AcceptanceEstimate {
        rate,
        std_error: rate_std_error(rate, trials),
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSpec {
    pub n: usize,
    pub epsilon: f64,
    /// Expected sample count of the Poissonized input.
    pub m: f64,
    pub xi_grid: Vec<f64>,
    pub draws_per_xi: usize,
    pub trials: usize,
    /// Replicability level of the tester under study, if known. The report
    /// records whether `ρ ≤ 1/ln² n` holds.
    #[serde(default)]
    pub tester_rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub xi: f64,
    pub mean_acceptance: f64,
    /// Standard deviation of the per-instance acceptance estimates.
    pub dispersion: f64,
    /// Fraction of instances whose acceptance is more than ¼ from the mean.
    pub deviation_fraction: f64,
    pub instances: usize,
    pub precondition_met: Option<bool>,
}

/// For each `ξ`, draws `p ~ M_ξ` repeatedly and estimates the acceptance
/// probability on each instance with one shared internal stream.
pub fn concentration_experiment(
    tester: &dyn CountTester,
    spec: &ConcentrationSpec,
    rng: &RngStream,
) -> Result<Vec<ConcentrationRow>> {
    if spec.draws_per_xi == 0 || spec.trials == 0 {
        return Err(invalid("draws_per_xi", "draws and trials must be positive"));
    }
    let internal = rng.derive(Role::Internal);
    let precondition_met = spec.tester_rho.map(|r| r <= 1.0 / (spec.n as f64).ln().powi(2));
    spec.xi_grid
        .iter()
        .enumerate()
        .map(|(g, &xi)| {
            let params = UniformityHardParams::new(spec.n, spec.epsilon, xi)?;
            let accs: Vec<f64> = (0..spec.draws_per_xi as u64)
                .map(|j| {
                    let stream = rng.derive(Role::Instance).trial(g as u64).trial(j);
                    let p = draw_uniformity_hard(&params, &stream);
                    acceptance_probability(tester, &p, spec.m, spec.trials, &internal, &stream.derive(Role::Sample1))
                        .map(|e| e.rate)
                })
                .collect::<Result<_>>()?;
            let (mean, var) = mean_var(&accs);
            let far = accs.iter().filter(|&&a| (a - mean).abs() > 0.25).count();
            Ok(ConcentrationRow {
                xi,
                mean_acceptance: mean,
                dispersion: var.sqrt(),
                deviation_fraction: far as f64 / accs.len() as f64,
                instances: accs.len(),
                precondition_met,
            })
        })
        .collect()
}

/// Concentration rows as CSV.
pub fn concentration_csv(rows: &[ConcentrationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| invalid("csv", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tester::ConstantTester;
    use crate::uniformity::{UniformityConfig, UniformityTester};

    #[test]
    fn constant_testers() {
        let u = NonNegativeMeasure::uniform(20).unwrap();
        let s = RngStream::new(1);
        let acc = acceptance_probability(&ConstantTester(Verdict::Accept), &u, 50.0, 100, &s, &s).unwrap();
        let rej = acceptance_probability(&ConstantTester(Verdict::Reject), &u, 50.0, 100, &s, &s).unwrap();
        assert_eq!((acc.rate, rej.rate), (1.0, 0.0));
    }

    #[test]
    fn dispersion_zero_when_trivial() {
        let spec = ConcentrationSpec {
            n: 50,
            epsilon: 0.2,
            m: 100.0,
            xi_grid: vec![0.0, 0.1, 0.2],
            draws_per_xi: 5,
            trials: 20,
            tester_rho: None,
        };
        let rows = concentration_experiment(&ConstantTester(Verdict::Accept), &spec, &RngStream::new(2)).unwrap();
        assert!(rows.iter().all(|r| r.dispersion == 0.0 && r.deviation_fraction == 0.0));

        let cfg = UniformityConfig::new(50, 0.2, 0.2).unwrap();
        let spec = ConcentrationSpec {
            xi_grid: vec![0.0],
            ..spec
        };
        let rows = concentration_experiment(&UniformityTester(cfg), &spec, &RngStream::new(3)).unwrap();
        // Every instance is the uniform measure and trials reuse the same sample streams.
        assert_eq!(rows[0].dispersion, 0.0);
        assert!(concentration_csv(&rows).unwrap().starts_with("xi,"));
    }
}
