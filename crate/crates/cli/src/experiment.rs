//! Running experiments from a validated config.

use rayon::prelude::*;
use reptest::closeness::{rep_closeness_test, ClosenessTester};
use reptest::independence::{averaged_stats, draw_sample_sets, rep_independence_test, IndependenceTester, StatsParams};
use reptest::replicability::replicability_pairs;
use reptest::sampling::{DistributionSampler, PairSampler};
use reptest::uniformity::{rep_uniformity_test, UniformityTester};
use reptest::walks::{concentration_csv, concentration_experiment, estimate_mixing, ConcentrationSpec, CoordKernel, FiniteKernel, PairKernel};
use reptest::hard_instances::ClosenessHardParams;
use reptest::{Role, RngStream, Verdict};
use serde_json::json;

use crate::calibrate::run_calibration;
use crate::config::{ExperimentConfig, ExperimentSpec, InitialSet, MixingSpec, TesterSpec, VarianceTarget, WalkSpec};
use crate::error::{CliError, CliResult};
use crate::instances::{Instance1d, PairInstance};
use crate::results::{Aggregate, ExperimentResult, TrialRecord};

/// Runs trials `0..trials` in parallel and returns their records in trial order.
pub fn run_trials<F>(trials: usize, root: &RngStream, f: F) -> CliResult<Vec<TrialRecord>>
where
    F: Fn(u64, &RngStream) -> CliResult<TrialRecord> + Sync,
{
    (0..trials as u64).into_par_iter().map(|k| f(k, &root.trial(k))).collect()
}

fn group_of(xi: Option<f64>) -> String {
    match xi {
        Some(x) => format!("xi={x}"),
        None => "all".into(),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentResult> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let trials = cfg.trials;
    let (records, table, details): Output = match &cfg.experiment {
        ExperimentSpec::ClosenessAcceptance { tester, instance } => {
            let instance = instance.load()?;
            let records = run_trials(trials, &root, |k, s| {
                let d = instance.draw(&s.derive(Role::Instance))?;
                let p = DistributionSampler::new(&d.value.0)?;
                let q = DistributionSampler::new(&d.value.1)?;
                let out = rep_closeness_test(&p, &q, tester, &s.derive(Role::Internal), &s.derive(Role::Sample1))?;
                Ok(TrialRecord {
                    verdict: Some(out.verdict),
                    statistic: Some(out.z as f64),
                    statistic_b: d.xi,
                    threshold: Some(out.threshold),
                    ..TrialRecord::new(k, s.fingerprint(), "all")
                })
            })?;
            let m = tester.sample_size()?;
            let floor = reptest::closeness::soundness_floor(m, tester.n, tester.epsilon, tester.c2);
            let details = json!({
                "m": m,
                "soundness_floor": floor,
                "columns": {"statistic": "Z", "statistic_b": "xi"},
            });
            (records, None, details)
        }
        ExperimentSpec::UniformityAcceptance { tester, instance } => {
            let instance = instance.load()?;
            let records = run_trials(trials, &root, |k, s| {
                let d = instance.draw(&s.derive(Role::Instance))?;
                let p = DistributionSampler::new(&d.value)?;
                let out = rep_uniformity_test(&p, tester, &s.derive(Role::Internal), &s.derive(Role::Sample1))?;
                Ok(TrialRecord {
                    verdict: Some(out.verdict),
                    statistic: Some(out.z),
                    statistic_b: d.xi,
                    threshold: Some(out.threshold),
                    ..TrialRecord::new(k, s.fingerprint(), "all")
                })
            })?;
            let details = json!({
                "m": tester.sample_size()?,
                "raw_gap": tester.raw_gap()?,
                "columns": {"statistic": "Z", "statistic_b": "xi"},
            });
            (records, None, details)
        }
        ExperimentSpec::IndependenceAcceptance { tester, instance } => {
            let sampler = PairSampler::new(&instance.load()?.measure()?)?;
            let records = run_trials(trials, &root, |k, s| {
                let out = rep_independence_test(&sampler, tester, &s.derive(Role::Internal), &s.derive(Role::Sample1))?;
                Ok(TrialRecord {
                    verdict: Some(out.verdict),
                    statistic: Some(out.n_hat),
                    statistic_b: out.z_hat,
                    threshold: Some(out.z_threshold),
                    ..TrialRecord::new(k, s.fingerprint(), "all")
                })
            })?;
            let m = tester.sample_size()?;
            let details = json!({
                "m": m,
                "gap_scale": tester.gap_scale(m),
                "collision_scale": tester.collision_scale(m),
                "columns": {"statistic": "N median", "statistic_b": "Z_a median", "threshold": "Z threshold"},
            });
            (records, None, details)
        }
        ExperimentSpec::Replicability { tester, xi_grid } => (replicability(tester, xi_grid.as_deref(), trials, &root)?, None, json!({})),
        ExperimentSpec::VarianceAudit { target } => variance_audit(target, trials, &root)?,
        ExperimentSpec::Mixing(spec) => {
            let (table, details) = mixing(spec)?;
            (Vec::new(), Some(table), details)
        }
        ExperimentSpec::Concentration {
            tester,
            m,
            xi_grid,
            draws_per_xi,
            acceptance_trials,
        } => {
            let spec = ConcentrationSpec {
                n: tester.n,
                epsilon: tester.epsilon,
                m: *m,
                xi_grid: xi_grid.clone(),
                draws_per_xi: *draws_per_xi,
                trials: *acceptance_trials,
                tester_rho: Some(tester.rho),
            };
            let rows = concentration_experiment(&UniformityTester(*tester), &spec, &root)?;
            (Vec::new(), Some(concentration_csv(&rows)?), json!({ "rows": rows }))
        }
        ExperimentSpec::Calibration(spec) => {
            let cal = run_calibration(spec, trials, &root)?;
            (Vec::new(), Some(cal.table_csv()?), serde_json::to_value(&cal)?)
        }
    };
    Ok(ExperimentResult {
        kind: cfg.kind().into(),
        seed: cfg.seed,
        trials,
        aggregate: Aggregate::from_records(&records),
        records,
        table,
        details,
    })
}

/// Paired runs per grid point, with records `(group, pair)` flattened in order.
fn replicability(tester: &TesterSpec, xi_grid: Option<&[f64]>, pairs: usize, root: &RngStream) -> CliResult<Vec<TrialRecord>> {
    let points: Vec<Option<f64>> = match xi_grid {
        Some(g) => g.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };
    let mut records = Vec::new();
    for (g, &xi) in points.iter().enumerate() {
        let stream = if xi_grid.is_some() { root.trial(g as u64) } else { root.clone() };
        let verdicts: Vec<(Verdict, Verdict)> = match tester {
            TesterSpec::Closeness { config, instance } => {
                let instance = with_xi_pair(&instance.load()?, xi)?;
                replicability_pairs(
                    &ClosenessTester(*config),
                    |s| {
                        let d = instance.draw(s).map_err(core_only)?;
                        Ok((DistributionSampler::new(&d.value.0)?, DistributionSampler::new(&d.value.1)?))
                    },
                    pairs,
                    &stream,
                )?
            }
            TesterSpec::Uniformity { config, instance } => {
                let instance = with_xi(&instance.load()?, xi)?;
                replicability_pairs(
                    &UniformityTester(*config),
                    |s| DistributionSampler::new(&instance.draw(s).map_err(core_only)?.value),
                    pairs,
                    &stream,
                )?
            }
            TesterSpec::Independence { config, instance } => {
                if xi.is_some() {
                    return Err(CliError::Validation("xi_grid needs a hard instance".into()));
                }
                let sampler = PairSampler::new(&instance.load()?.measure()?)?;
                replicability_pairs(&IndependenceTester(*config), |_| Ok(sampler.clone()), pairs, &stream)?
            }
        };
        let base = (g * pairs) as u64;
        records.extend(verdicts.into_iter().enumerate().map(|(k, (a, b))| TrialRecord {
            verdict: Some(a),
            verdict_b: Some(b),
            ..TrialRecord::new(base + k as u64, stream.trial(k as u64).fingerprint(), group_of(xi))
        }));
    }
    Ok(records)
}

/// Instance errors inside core closures can only be core errors once files are loaded.
fn core_only(e: CliError) -> reptest::Error {
    match e {
        CliError::Core(e) => e,
        other => reptest::Error::InvalidParameter {
            name: "instance",
            reason: other.to_string(),
        },
    }
}

fn with_xi(instance: &Instance1d, xi: Option<f64>) -> CliResult<Instance1d> {
    match (instance, xi) {
        (_, None) => Ok(instance.clone()),
        (Instance1d::HardUniformity { n, epsilon, .. }, Some(x)) => Ok(Instance1d::HardUniformity {
            n: *n,
            epsilon: *epsilon,
            xi: Some(x),
        }),
        _ => Err(CliError::Validation("xi_grid needs a hard instance".into())),
    }
}

fn with_xi_pair(instance: &PairInstance, xi: Option<f64>) -> CliResult<PairInstance> {
    match (instance, xi) {
        (_, None) => Ok(instance.clone()),
        (PairInstance::HardCloseness { n, m, epsilon, .. }, Some(x)) => Ok(PairInstance::HardCloseness {
            n: *n,
            m: *m,
            epsilon: *epsilon,
            xi: Some(x),
        }),
        _ => Err(CliError::Validation("xi_grid needs a hard instance".into())),
    }
}

type Output = (Vec<TrialRecord>, Option<String>, serde_json::Value);

fn variance_audit(target: &VarianceTarget, trials: usize, root: &RngStream) -> CliResult<Output> {
    match target {
        VarianceTarget::Closeness { config, instance } => {
            let p = DistributionSampler::new(&instance.load()?.draw(&root.derive(Role::Instance))?.value)?;
            let records = run_trials(trials, root, |k, s| {
                let out = rep_closeness_test(&p, &p, config, &s.derive(Role::Internal), &s.derive(Role::Sample1))?;
                Ok(TrialRecord {
                    statistic: Some(out.z as f64),
                    ..TrialRecord::new(k, s.fingerprint(), "all")
                })
            })?;
            let m = config.sample_size()?;
            let details = json!({
                "m": m,
                "variance_bound": 4.0 * m as f64,
                "mean_bound": config.c1 * (m as f64).sqrt(),
                "columns": {"statistic": "Z"},
            });
            Ok((records, None, details))
        }
        VarianceTarget::Independence { config, instance } => {
            let sampler = PairSampler::new(&instance.load()?.measure()?)?;
            let params = StatsParams::from_config(config)?;
            let records = run_trials(trials, root, |k, s| {
                let (s_p, s_q) = draw_sample_sets(&sampler, params.set_size(), &s.derive(Role::Sample1))?;
                let avg = averaged_stats(&s_p, &s_q, &params, config.k_avg, true, &s.derive(Role::Internal));
                Ok(TrialRecord {
                    statistic: Some(avg.z_a),
                    statistic_b: Some(avg.n_a),
                    ..TrialRecord::new(k, s.fingerprint(), "all")
                })
            })?;
            let agg = Aggregate::from_records(&records);
            let all = agg.pooled().expect("trials ≥ 1");
            let (z, n) = (all.statistic.as_ref().expect("z"), all.statistic_b.as_ref().expect("n"));
            let log3 = ((config.n1 * config.n2) as f64).ln().powi(3);
            let details = json!({
                "m": params.m,
                "collision_scale": config.collision_scale(params.m),
                "log3": log3,
                "var_z_over_n": z.variance / n.mean,
                "var_n_over_n": n.variance / n.mean,
                "columns": {"statistic": "Z_a", "statistic_b": "N_a"},
            });
            Ok((records, None, details))
        }
    }
}

/// Kernel and initial laws for a walk spec.
pub fn walk_kernel(spec: &MixingSpec) -> CliResult<(FiniteKernel, Vec<(String, Vec<f64>)>)> {
    let (kernel, poisson) = match &spec.walk {
        WalkSpec::Coordinate { m, n, xi, truncation } => {
            let mut k = CoordKernel::new(*m, *n, *xi)?;
            if let Some(a) = truncation {
                k = k.with_truncation(*a);
            }
            (k.truncated()?, Some(k.poisson_initials()))
        }
        WalkSpec::Pair { n, m, epsilon, xi } => (PairKernel::new(ClosenessHardParams::new(*n, *m, *epsilon, *xi)?).truncated()?, None),
    };
    let initials = match (spec.initials, poisson) {
        (InitialSet::Poisson, Some(p)) => p,
        (InitialSet::Poisson, None) => return Err(CliError::Validation("Poisson initials exist only for the coordinate walk".into())),
        (InitialSet::PointMasses, _) | (InitialSet::All, None) => kernel.point_masses(),
        (InitialSet::All, Some(mut p)) => {
            p.extend(kernel.point_masses());
            p
        }
    };
    Ok((kernel, initials))
}

fn mixing(spec: &MixingSpec) -> CliResult<(String, serde_json::Value)> {
    let (kernel, initials) = walk_kernel(spec)?;
    let report = estimate_mixing(&kernel, &initials, spec.deltas[0], spec.horizon, spec.metric)?;
    let taus: Vec<_> = spec
        .deltas
        .iter()
        .map(|&d| json!({"delta": d, "tau": report.tau_for(d), "crossing_time": report.crossing_time(d)}))
        .collect();
    let details = json!({
        "states": kernel.size(),
        "absolute_gap": report.gap_estimate,
        "metric": report.metric,
        "tau": taus,
        "worst_curve": report.tv_curve,
    });
    Ok((report.to_csv()?, details))
}
