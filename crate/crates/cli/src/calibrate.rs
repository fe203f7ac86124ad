//! Grid searches for the testers' calibration constants.
//!
//! Each search runs the tester at one parameter point over a grid of
//! candidate constants and keeps the first candidate (in grid order) under
//! which every check passes. A check passes only when the estimate clears its
//! bound by three standard errors: rates must reach 0.9 and disagreement
//! must stay below `ρ/2`, leaving headroom for the acceptance runs.

use std::path::Path;

use rayon::prelude::*;
use reptest::closeness::{rep_closeness_test, ClosenessConfig, ClosenessTester, DEFAULT_C1};
use reptest::hard_instances::{draw_meta_hc, draw_uniformity_hard, UniformityHardParams};
use reptest::independence::{averaged_stats, draw_sample_sets, IndependenceConfig, KAvg, StatsParams};
use reptest::replicability::measure_replicability;
use reptest::sampling::{DistributionSampler, PairSampler};
use reptest::stats::{mean_var, rate_std_error};
use reptest::uniformity::{rep_uniformity_test, UniformityConfig, UniformityTester, DEFAULT_C1_U};
use reptest::{Measure2d, NonNegativeMeasure, Role, RngStream};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessConstants {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityConstants {
    pub c1_u: f64,
    pub c2_u: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConstants {
    pub c_n: f64,
    pub c_i1: f64,
    pub c_i2: f64,
    /// Fitted `c` in `Var(·)/E[N_a] ≤ c·ln³(n1·n2)`.
    #[serde(default)]
    pub variance_c: Option<f64>,
}

/// The constants file read by `--constants`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default)]
    pub closeness: Option<ClosenessConstants>,
    #[serde(default)]
    pub uniformity: Option<UniformityConstants>,
    #[serde(default)]
    pub independence: Option<IndependenceConstants>,
}

impl Constants {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read constants {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("constants {}: {e}", path.display())))
    }
}

fn d_c1() -> f64 {
    DEFAULT_C1
}

fn d_c1_u() -> f64 {
    DEFAULT_C1_U
}

fn d_one() -> f64 {
    1.0
}

fn d_ind_scale() -> f64 {
    reptest::independence::DEFAULT_M_SCALE
}

fn d_margin() -> f64 {
    2.0
}

/// Factor by which observed extremes must clear the independence thresholds.
const HEADROOM: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family", deny_unknown_fields)]
pub enum CalibrationSpec {
    /// Searches `C2` with `C1` fixed.
    Closeness {
        n: usize,
        epsilon: f64,
        rho: f64,
        #[serde(default = "d_c1")]
        c1: f64,
        #[serde(default = "d_one")]
        m_scale: f64,
        grid: Vec<f64>,
    },
    /// Searches `C2_u` with `C1_u` fixed.
    Uniformity {
        n: usize,
        epsilon: f64,
        rho: f64,
        #[serde(default = "d_c1_u")]
        c1_u: f64,
        #[serde(default = "d_one")]
        m_scale: f64,
        grid: Vec<f64>,
    },
    /// Picks `C_N`, `C_I1`, `C_I2` from the grid and fits the variance constant.
    Independence {
        n1: usize,
        n2: usize,
        epsilon: f64,
        rho: f64,
        #[serde(default = "d_ind_scale")]
        m_scale: f64,
        grid: Vec<f64>,
        /// Safety factor on the fitted variance constant.
        #[serde(default = "d_margin")]
        margin: f64,
    },
}

impl CalibrationSpec {
    pub fn validate(&self) -> CliResult<()> {
        let grid = match self {
            CalibrationSpec::Closeness { grid, .. } | CalibrationSpec::Uniformity { grid, .. } | CalibrationSpec::Independence { grid, .. } => grid,
        };
        if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(CliError::Validation("calibration grid must be non-empty and positive".into()));
        }
        match self {
            CalibrationSpec::Closeness { n, epsilon, rho, .. } => {
                ClosenessConfig::new(*n, *epsilon, *rho)?;
            }
            CalibrationSpec::Uniformity { n, epsilon, rho, .. } => {
                UniformityConfig::new(*n, *epsilon, *rho)?;
            }
            CalibrationSpec::Independence { n1, n2, epsilon, rho, margin, .. } => {
                IndependenceConfig::new(*n1, *n2, *epsilon, *rho)?;
                if !(*margin >= 1.0) {
                    return Err(CliError::Validation("margin must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// One evaluated check at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub candidate: f64,
    pub check: String,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: Constants,
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    pub fn table_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn min_rate(candidate: f64, check: &str, hits: usize, trials: usize, bound: f64) -> CalibrationRow {
    let rate = hits as f64 / trials as f64;
    let se = rate_std_error(rate, trials);
    CalibrationRow {
        candidate,
        check: check.into(),
        estimate: rate,
        std_error: se,
        bound,
        pass: rate - 3.0 * se >= bound,
    }
}

fn max_rate(candidate: f64, check: &str, rate: f64, se: f64, bound: f64) -> CalibrationRow {
    CalibrationRow {
        candidate,
        check: check.into(),
        estimate: rate,
        std_error: se,
        bound,
        pass: rate + 3.0 * se <= bound,
    }
}

fn count_verdicts<F>(trials: usize, root: &RngStream, accept: bool, f: F) -> CliResult<usize>
where
    F: Fn(&RngStream) -> reptest::Result<reptest::Verdict> + Sync,
{
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|k| f(&root.trial(k)).map(|v| (v.accepted() == accept) as usize))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits)
}

fn half_support(n: usize) -> reptest::Result<NonNegativeMeasure> {
    let half = n.div_ceil(2);
    NonNegativeMeasure::new((0..n).map(|i| if i < half { 1.0 / half as f64 } else { 0.0 }).collect())
}

fn finish(rows: Vec<CalibrationRow>, grid: &[f64], pick: impl Fn(f64) -> Constants) -> CliResult<Calibration> {
    for &g in grid {
        let here: Vec<&CalibrationRow> = rows.iter().filter(|r| r.candidate == g).collect();
        if !here.is_empty() && here.iter().all(|r| r.pass) {
            return Ok(Calibration { constants: pick(g), rows });
        }
    }
    Err(CliError::Core(reptest::Error::Miscalibrated(
        "no grid candidate passed every calibration check".into(),
    )))
}

/// Runs the grid search with `trials` Monte Carlo trials per check.
pub fn run_calibration(spec: &CalibrationSpec, trials: usize, root: &RngStream) -> CliResult<Calibration> {
    spec.validate()?;
    match spec {
        CalibrationSpec::Closeness {
            n,
            epsilon,
            rho,
            c1,
            m_scale,
            grid,
        } => closeness(*n, *epsilon, *rho, *c1, *m_scale, grid, trials, root),
        CalibrationSpec::Uniformity {
            n,
            epsilon,
            rho,
            c1_u,
            m_scale,
            grid,
        } => uniformity(*n, *epsilon, *rho, *c1_u, *m_scale, grid, trials, root),
        CalibrationSpec::Independence {
            n1,
            n2,
            epsilon,
            rho,
            m_scale,
            grid,
            margin,
        } => independence(*n1, *n2, *epsilon, *rho, *m_scale, grid, *margin, trials, root),
    }
}

#[allow(clippy::too_many_arguments)]
fn closeness(n: usize, epsilon: f64, rho: f64, c1: f64, m_scale: f64, grid: &[f64], trials: usize, root: &RngStream) -> CliResult<Calibration> {
    let uniform = DistributionSampler::new(&NonNegativeMeasure::uniform(n)?)?;
    let zipf = DistributionSampler::new(&NonNegativeMeasure::zipf(n, 1.0)?)?;
    let far = DistributionSampler::new(&half_support(n)?)?;
    let m_hc = (n / 5).max(1);
    let mut rows = Vec::new();
    for (gi, &c2) in grid.iter().enumerate() {
        let cfg = ClosenessConfig {
            m_scale,
            ..ClosenessConfig::new(n, epsilon, rho)?
        };
        let Ok(cfg) = cfg.with_constants(c1, c2) else {
            rows.push(CalibrationRow {
                candidate: c2,
                check: "floor-exceeds-8-c1-sqrt-m".into(),
                estimate: 0.0,
                std_error: 0.0,
                bound: 0.0,
                pass: false,
            });
            continue;
        };
        let g = root.trial(gi as u64);
        let run = |p: &DistributionSampler, q: &DistributionSampler, s: &RngStream| {
            rep_closeness_test(p, q, &cfg, &s.derive(Role::Internal), &s.derive(Role::Sample1)).map(|o| o.verdict)
        };
        let cases: [(&str, &DistributionSampler, &DistributionSampler, bool); 3] =
            [("accept-uniform", &uniform, &uniform, true), ("accept-zipf", &zipf, &zipf, true), ("reject-far", &uniform, &far, false)];
        for (ci, (name, p, q, accept)) in cases.into_iter().enumerate() {
            let hits = count_verdicts(trials, &g.derive(Role::Sample1).trial(ci as u64), accept, |s| run(p, q, s))?;
            rows.push(min_rate(c2, name, hits, trials, 0.9));
        }
        let tester = ClosenessTester(cfg);
        let rep = g.derive(Role::Sample2);
        for (ci, (name, p, q)) in [("replicability-uniform", &uniform, &uniform), ("replicability-far", &uniform, &far)].into_iter().enumerate() {
            let est = measure_replicability(&tester, |_| Ok((p.clone(), q.clone())), trials, &rep.trial(ci as u64))?;
            rows.push(max_rate(c2, name, est.disagreement, est.std_error, rho / 2.0));
        }
        let est = measure_replicability(
            &tester,
            |s| {
                let inst = draw_meta_hc(n, m_hc, epsilon, s)?;
                Ok((DistributionSampler::new(&inst.p)?, DistributionSampler::new(&inst.q)?))
            },
            trials,
            &rep.trial(2),
        )?;
        rows.push(max_rate(c2, "replicability-hard", est.disagreement, est.std_error, rho / 2.0));
    }
    finish(rows, grid, |c2| Constants {
        closeness: Some(ClosenessConstants { c1, c2 }),
        ..Constants::default()
    })
}

#[allow(clippy::too_many_arguments)]
fn uniformity(n: usize, epsilon: f64, rho: f64, c1_u: f64, m_scale: f64, grid: &[f64], trials: usize, root: &RngStream) -> CliResult<Calibration> {
    let uniform = DistributionSampler::new(&NonNegativeMeasure::uniform(n)?)?;
    // At l1 distance exactly ε: the hardest far instance the gap must separate.
    let edge = draw_uniformity_hard(&UniformityHardParams::new(n, epsilon, epsilon)?, &root.derive(Role::Instance));
    let far = DistributionSampler::new(&edge)?;
    let mut rows = Vec::new();
    for (gi, &c2_u) in grid.iter().enumerate() {
        let cfg = UniformityConfig {
            c1_u,
            c2_u,
            m_scale,
            ..UniformityConfig::new(n, epsilon, rho)?
        };
        cfg.validate()?;
        let g = root.trial(gi as u64);
        let run = |p: &DistributionSampler, s: &RngStream| rep_uniformity_test(p, &cfg, &s.derive(Role::Internal), &s.derive(Role::Sample1)).map(|o| o.verdict);
        let hits = count_verdicts(trials, &g.derive(Role::Sample1).trial(0), true, |s| run(&uniform, s))?;
        rows.push(min_rate(c2_u, "accept-uniform", hits, trials, 0.9));
        let hits = count_verdicts(trials, &g.derive(Role::Sample1).trial(1), false, |s| run(&far, s))?;
        rows.push(min_rate(c2_u, "reject-far", hits, trials, 0.9));
        let tester = UniformityTester(cfg);
        for (ci, (name, p)) in [("replicability-uniform", &uniform), ("replicability-far", &far)].into_iter().enumerate() {
            let est = measure_replicability(&tester, |_| Ok(p.clone()), trials, &g.derive(Role::Sample2).trial(ci as u64))?;
            rows.push(max_rate(c2_u, name, est.disagreement, est.std_error, rho / 2.0));
        }
    }
    finish(rows, grid, |c2_u| Constants {
        uniformity: Some(UniformityConstants { c1_u, c2_u }),
        ..Constants::default()
    })
}

/// `Z_a` and `N_a` on fresh sample sets, one pair per trial.
fn averaged_samples(sampler: &PairSampler, params: &StatsParams, k_avg: KAvg, trials: usize, root: &RngStream) -> CliResult<Vec<(f64, f64)>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = root.trial(k);
            let (s_p, s_q) = draw_sample_sets(sampler, params.set_size(), &s.derive(Role::Sample1))?;
            let avg = averaged_stats(&s_p, &s_q, params, k_avg, true, &s.derive(Role::Internal));
            Ok((avg.z_a, avg.n_a))
        })
        .collect()
}

/// Uniform on `{(i, i mod n2)}`: the column is a function of the row.
fn functional_dependence(n1: usize, n2: usize) -> reptest::Result<Measure2d> {
    let mut masses = vec![0.0; n1 * n2];
    for i in 0..n1 {
        masses[i * n2 + i % n2] = 1.0 / n1 as f64;
    }
    Measure2d::new(n1, n2, masses)
}

#[allow(clippy::too_many_arguments)]
fn independence(
    n1: usize,
    n2: usize,
    epsilon: f64,
    rho: f64,
    m_scale: f64,
    grid: &[f64],
    margin: f64,
    trials: usize,
    root: &RngStream,
) -> CliResult<Calibration> {
    let cfg = IndependenceConfig {
        m_scale,
        ..IndependenceConfig::new(n1, n2, epsilon, rho)?
    };
    let params = StatsParams::from_config(&cfg)?;
    let (g_scale, n_scale) = (cfg.gap_scale(params.m), cfg.collision_scale(params.m));
    let null = averaged_samples(&PairSampler::new(&Measure2d::uniform(n1, n2)?)?, &params, cfg.k_avg, trials, &root.trial(0))?;
    let far = averaged_samples(&PairSampler::new(&functional_dependence(n1, n2)?)?, &params, cfg.k_avg, trials, &root.trial(1))?;
    let (z0, n0): (Vec<f64>, Vec<f64>) = null.into_iter().unzip();
    let z1: Vec<f64> = far.into_iter().map(|p| p.0).collect();
    let (mean_n, var_n) = mean_var(&n0);
    let (_, var_z) = mean_var(&z0);
    let max_n = n0.iter().copied().fold(f64::MIN, f64::max);
    let max_z0 = z0.iter().copied().fold(f64::MIN, f64::max);
    let min_z1 = z1.iter().copied().fold(f64::MAX, f64::min);
    let log3 = ((n1 * n2) as f64).ln().powi(3);

    let mut rows = Vec::new();
    for &c in grid {
        rows.push(CalibrationRow {
            candidate: c,
            check: "c_n: mean null N below c_n scale".into(),
            estimate: mean_n,
            std_error: (var_n / n0.len() as f64).sqrt(),
            bound: c * n_scale,
            pass: mean_n <= c * n_scale,
        });
        rows.push(CalibrationRow {
            candidate: c,
            check: "c_n: max null N below lowest threshold".into(),
            estimate: max_n,
            std_error: 0.0,
            bound: 2.0 * c * n_scale,
            pass: HEADROOM * max_n <= 2.0 * c * n_scale,
        });
        rows.push(CalibrationRow {
            candidate: c,
            check: "c_i1: max null Z below lowest threshold".into(),
            estimate: max_z0,
            std_error: 0.0,
            bound: c * g_scale,
            pass: HEADROOM * max_z0 <= c * g_scale,
        });
        rows.push(CalibrationRow {
            candidate: c,
            check: "c_i2: min far Z above highest threshold".into(),
            estimate: min_z1,
            std_error: 0.0,
            bound: c * g_scale,
            pass: min_z1 > HEADROOM * c * g_scale,
        });
    }
    let first = |prefix: &str| {
        grid.iter()
            .copied()
            .find(|&c| rows.iter().filter(|r| r.candidate == c && r.check.starts_with(prefix)).all(|r| r.pass))
    };
    let c_n = first("c_n:");
    let c_i1 = first("c_i1:");
    // The widest admissible threshold band: the largest passing grid value.
    let c_i2 = grid
        .iter()
        .copied()
        .filter(|&c| c > c_i1.unwrap_or(f64::INFINITY) && rows.iter().any(|r| r.candidate == c && r.check.starts_with("c_i2:") && r.pass))
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))));
    let (Some(c_n), Some(c_i1), Some(c_i2)) = (c_n, c_i1, c_i2) else {
        return Err(CliError::Core(reptest::Error::Miscalibrated(format!(
            "independence grid has no admissible constants (c_n {c_n:?}, c_i1 {c_i1:?}, c_i2 {c_i2:?})"
        ))));
    };
    let ratio = (var_z / mean_n).max(var_n / mean_n);
    Ok(Calibration {
        constants: Constants {
            independence: Some(IndependenceConstants {
                c_n,
                c_i1,
                c_i2,
                variance_c: Some(margin * ratio / log3),
            }),
            ..Constants::default()
        },
        rows,
    })
}
