//! Replicable independence testing.
//!
//! [`independence_run`] is one execution of the flattened closeness statistic
//! between samples of `p` and of its product of marginals. The averaged
//! statistics `Z_a` and `N_a` are means of many runs on fixed sample sets,
//! and [`rep_independence_test`] thresholds them in two stages.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closeness::{ceil_to_u64, check_positive, check_unit};
use crate::error::{invalid, Error, Result};
use crate::rng::{Role, RngStream};
use crate::sampling::{bernoulli_indices, poisson, product_of_marginals_sample, PairSource};
use crate::stats::{mean_var, median};
use crate::tester::{threshold_verdict, ReplicableTester, Verdict};

pub const DEFAULT_C_N: f64 = 1.5;
pub const DEFAULT_C_I1: f64 = 1.0;
pub const DEFAULT_C_I2: f64 = 4.0;
pub const DEFAULT_K_AVG: usize = 200;
pub const DEFAULT_MEDIAN_REPS: usize = 3;
pub const DEFAULT_M_SCALE: f64 = 0.03;
/// Fitted `c` in `Var(Z_a)/E[N_a], Var(N_a)/E[N_a] ≤ c·ln³(n1·n2)` at desk scale.
pub const VARIANCE_FIT_C: f64 = 0.002;

/// How many re-randomized runs go into one averaged statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum KAvg {
    Fixed { runs: usize },
    /// `K = ceil(c_k · v̂ / target²)` from a pilot pass, clamped to `[pilot, max]`.
    Adaptive { pilot: usize, c_k: f64, target: f64, max: usize },
}

impl Default for KAvg {
    fn default() -> Self {
        KAvg::Fixed { runs: DEFAULT_K_AVG }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub n1: usize,
    pub n2: usize,
    pub epsilon: f64,
    pub rho: f64,
    #[serde(default = "d_cn")]
    pub c_n: f64,
    #[serde(default = "d_ci1")]
    pub c_i1: f64,
    #[serde(default = "d_ci2")]
    pub c_i2: f64,
    #[serde(default)]
    pub k_avg: KAvg,
    #[serde(default = "d_reps")]
    pub median_reps: usize,
    #[serde(default = "d_scale")]
    pub m_scale: f64,
}

fn d_cn() -> f64 {
    DEFAULT_C_N
}
fn d_ci1() -> f64 {
    DEFAULT_C_I1
}
fn d_ci2() -> f64 {
    DEFAULT_C_I2
}
fn d_reps() -> usize {
    DEFAULT_MEDIAN_REPS
}
fn d_scale() -> f64 {
    DEFAULT_M_SCALE
}

impl IndependenceConfig {
    pub fn new(n1: usize, n2: usize, epsilon: f64, rho: f64) -> Result<Self> {
        let cfg = IndependenceConfig {
            n1,
            n2,
            epsilon,
            rho,
            c_n: DEFAULT_C_N,
            c_i1: DEFAULT_C_I1,
            c_i2: DEFAULT_C_I2,
            k_avg: KAvg::default(),
            median_reps: DEFAULT_MEDIAN_REPS,
            m_scale: DEFAULT_M_SCALE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n2 == 0 || self.n1 < self.n2 {
            return Err(invalid("n1", format!("need n1 >= n2 >= 1, got {} x {}", self.n1, self.n2)));
        }
        check_unit("epsilon", self.epsilon)?;
        check_unit("rho", self.rho)?;
        check_positive("c_n", self.c_n)?;
        check_positive("c_i1", self.c_i1)?;
        check_positive("m_scale", self.m_scale)?;
        if self.c_i1 >= self.c_i2 {
            return Err(invalid("c_i2", format!("need c_i1 < c_i2, got {} and {}", self.c_i1, self.c_i2)));
        }
        if self.median_reps == 0 {
            return Err(invalid("median_reps", "must be at least 1"));
        }
        match self.k_avg {
            KAvg::Fixed { runs } if runs == 0 => return Err(invalid("k_avg", "must be at least 1")),
            KAvg::Adaptive { pilot, c_k, target, max } => {
                if pilot < 2 || max < pilot {
                    return Err(invalid("k_avg", "need 2 <= pilot <= max"));
                }
                check_positive("k_avg.c_k", c_k)?;
                check_positive("k_avg.target", target)?;
            }
            _ => {}
        }
        StatsParams::from_config(self).map(|_| ())
    }

    pub fn sample_size(&self) -> Result<u64> {
        independence_sample_size(self.n1, self.n2, self.epsilon, self.rho, self.m_scale)
    }

    /// `G = min(εm, m²ε²/(n1·n2), m^{3/2}ε²/√(n1·n2))`.
    pub fn gap_scale(&self, m: u64) -> f64 {
        let (m, n) = (m as f64, (self.n1 * self.n2) as f64);
        let e2 = self.epsilon * self.epsilon;
        (self.epsilon * m).min(m * m * e2 / n).min(m.powf(1.5) * e2 / n.sqrt())
    }

    /// `max(m²/(n1·n2), m/n2)`.
    pub fn collision_scale(&self, m: u64) -> f64 {
        let m = m as f64;
        (m * m / (self.n1 * self.n2) as f64).max(m / self.n2 as f64)
    }
}

/// The bracketed sum in the sample bound, before the log factor and scale.
pub fn independence_sample_bound(n1: usize, n2: usize, epsilon: f64, rho: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    a.powf(2.0 / 3.0) * b.powf(1.0 / 3.0) * rho.powf(-2.0 / 3.0) * epsilon.powf(-4.0 / 3.0)
        + (a * b).sqrt() / (rho * epsilon * epsilon)
        + 1.0 / (epsilon * epsilon * rho * rho)
}

/// `ceil(m_scale · ln(n1·n2) · bound)`.
pub fn independence_sample_size(n1: usize, n2: usize, epsilon: f64, rho: f64, m_scale: f64) -> Result<u64> {
    let log = ((n1 as f64) * (n2 as f64)).ln();
    ceil_to_u64(m_scale * log * independence_sample_bound(n1, n2, epsilon, rho))
}

/// Parameters of a single statistic run. Building one directly skips the
/// `|S| = 100m` precondition, which is how tiny instances are exercised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsParams {
    pub m: u64,
    pub alpha: f64,
    pub beta: f64,
    pub n1: usize,
    pub n2: usize,
    /// Replaces the `Poi(m)` truncation lengths.
    #[serde(default)]
    pub forced_lengths: Option<(usize, usize)>,
}

impl StatsParams {
    pub fn from_config(cfg: &IndependenceConfig) -> Result<Self> {
        let m = cfg.sample_size()?;
        if m == 0 {
            return Err(invalid("m_scale", "sample size rounds to zero"));
        }
        let alpha = (cfg.n1 as f64 / (100.0 * m as f64)).min(0.01);
        let beta = cfg.n2 as f64 / (100.0 * m as f64);
        if beta >= 1.0 {
            return Err(invalid("m_scale", format!("beta = {beta} >= 1")));
        }
        Ok(StatsParams {
            m,
            alpha,
            beta,
            n1: cfg.n1,
            n2: cfg.n2,
            forced_lengths: None,
        })
    }

    pub fn set_size(&self) -> usize {
        100 * self.m as usize
    }

    fn check_sets(&self, sp: usize, sq: usize) -> Result<()> {
        let want = self.set_size();
        for len in [sp, sq] {
            if len != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Abort {
    TooManyRemovedP,
    TooManyRemovedQ,
    ShortP,
    ShortQ,
}

/// One run: the statistic and the non-singleton count of the truncated
/// flattened union. Both are 0 on abort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub z: i64,
    pub non_singleton: usize,
    pub abort: Option<Abort>,
}

impl RunOutcome {
    fn aborted(a: Abort) -> Self {
        RunOutcome {
            z: 0,
            non_singleton: 0,
            abort: Some(a),
        }
    }
}

/// Closeness statistic with explicit marks: `Σ_i |p0−q0| + |p1−q1| − |p0−p1| − |q0−q1|`
/// over the support of both sets.
pub fn closeness_stat_with_marks<T: Ord + Clone>(s_p: &[T], marks_p: &[bool], s_q: &[T], marks_q: &[bool]) -> i64 {
    assert_eq!(s_p.len(), marks_p.len());
    assert_eq!(s_q.len(), marks_q.len());
    let mut tagged: Vec<(T, usize)> = Vec::with_capacity(s_p.len() + s_q.len());
    tagged.extend(s_p.iter().cloned().zip(marks_p.iter().map(|&b| b as usize)));
    tagged.extend(s_q.iter().cloned().zip(marks_q.iter().map(|&b| 2 + b as usize)));
    tagged.sort_unstable();
    let mut z = 0i64;
    let mut i = 0;
    while i < tagged.len() {
        let mut c = [0i64; 4];
        let mut j = i;
        while j < tagged.len() && tagged[j].0 == tagged[i].0 {
            c[tagged[j].1] += 1;
            j += 1;
        }
        z += (c[0] - c[2]).abs() + (c[1] - c[3]).abs() - (c[0] - c[1]).abs() - (c[2] - c[3]).abs();
        i = j;
    }
    z
}

/// Marks each sample with an independent fair bit from `rng`, then evaluates
/// the closeness statistic.
pub fn closeness_stat_marked<T: Ord + Clone>(s_p: &[T], s_q: &[T], rng: &RngStream) -> i64 {
    let mut r = rng.rng();
    let mp: Vec<bool> = (0..s_p.len()).map(|_| r.random()).collect();
    let mq: Vec<bool> = (0..s_q.len()).map(|_| r.random()).collect();
    closeness_stat_with_marks(s_p, &mp, s_q, &mq)
}

/// Flattened element `(row, row-sub, col, col-sub)`.
type FlatKey = (u32, u32, u32, u32);

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// First `count` positions of `range` not listed in the sorted `removed`.
fn first_unremoved(range: std::ops::Range<usize>, removed: &[usize], count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut k = removed.partition_point(|&x| x < range.start);
    for pos in range {
        if out.len() == count {
            break;
        }
        if k < removed.len() && removed[k] == pos {
            k += 1;
            continue;
        }
        out.push(pos);
    }
    out
}

/// Divider keys grouped by value: sorted `(value, key)`.
fn divider_keys<R: Rng>(positions: &[usize], value: impl Fn(usize) -> usize, rng: &mut R) -> Vec<(usize, f64)> {
    let mut keys: Vec<(usize, f64)> = positions.iter().map(|&i| (value(i), rng.random::<f64>())).collect();
    keys.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys
}

fn sub_index(keys: &[(usize, f64)], value: usize, key: f64) -> u32 {
    let lo = keys.partition_point(|k| k.0 < value);
    let hi = keys.partition_point(|k| k.0 < value || (k.0 == value && k.1 < key));
    (hi - lo) as u32
}

/// One execution of the statistic on the union `S_p ++ S_q`, with no size
/// precondition.
///
/// Each sample independently becomes a row divider with probability α and a
/// column divider with probability β. A uniform order per axis is realized by
/// i.i.d. uniform keys on the dividers and on the samples that survive
/// truncation; the remaining samples cannot affect any sub-index.
pub fn independence_run(s_p: &[(usize, usize)], s_q: &[(usize, usize)], params: &StatsParams, rng: &RngStream) -> RunOutcome {
    let (np, total) = (s_p.len(), s_p.len() + s_q.len());
    let at = |i: usize| if i < np { s_p[i] } else { s_q[i - np] };
    let mut flat = rng.derive(Role::Flatten).rng();
    let fx = bernoulli_indices(total, params.alpha, &mut flat);
    let fy = bernoulli_indices(total, params.beta, &mut flat);
    let removed = sorted_union(&fx, &fy);
    let removed_p = removed.partition_point(|&i| i < np);
    let removed_q = removed.len() - removed_p;
    if removed_p > 10 * params.n1 {
        return RunOutcome::aborted(Abort::TooManyRemovedP);
    }
    if removed_q > 10 * params.n2 {
        return RunOutcome::aborted(Abort::TooManyRemovedQ);
    }
    let (l, l2) = match params.forced_lengths {
        Some(v) => v,
        None => {
            let mut r = rng.derive(Role::Split).rng();
            (poisson(params.m as f64, &mut r) as usize, poisson(params.m as f64, &mut r) as usize)
        }
    };
    if l > np - removed_p {
        return RunOutcome::aborted(Abort::ShortP);
    }
    if l2 > s_q.len() - removed_q {
        return RunOutcome::aborted(Abort::ShortQ);
    }
    let kept_p = first_unremoved(0..np, &removed, l);
    let kept_q = first_unremoved(np..total, &removed, l2);

    let row_keys = divider_keys(&fx, |i| at(i).0, &mut flat);
    let col_keys = divider_keys(&fy, |i| at(i).1, &mut flat);
    let mut flatten = |i: usize| -> FlatKey {
        let (r, c) = at(i);
        let (kx, ky) = (flat.random::<f64>(), flat.random::<f64>());
        (r as u32, sub_index(&row_keys, r, kx), c as u32, sub_index(&col_keys, c, ky))
    };
    let fp: Vec<FlatKey> = kept_p.iter().map(|&i| flatten(i)).collect();
    let fq: Vec<FlatKey> = kept_q.iter().map(|&i| flatten(i)).collect();

    let z = closeness_stat_marked(&fp, &fq, &rng.derive(Role::Marking));
    let mut union = fp;
    union.extend(fq);
    RunOutcome {
        z,
        non_singleton: crate::flattening::non_singleton_count(&union),
        abort: None,
    }
}

/// The statistic `Z` of a single run.
pub fn independence_stats(s_p: &[(usize, usize)], s_q: &[(usize, usize)], params: &StatsParams, rng: &RngStream) -> Result<i64> {
    params.check_sets(s_p.len(), s_q.len())?;
    Ok(independence_run(s_p, s_q, params, rng).z)
}

/// Means of `Z` and `N` over re-randomized runs on fixed sample sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedStats {
    pub z_a: f64,
    pub n_a: f64,
    /// Standard errors of the two means.
    pub z_se: f64,
    pub n_se: f64,
    pub runs: usize,
    pub aborts: usize,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    z: i128,
    z2: i128,
    n: u128,
    n2: u128,
    aborts: usize,
    runs: usize,
}

impl Sums {
    fn add(mut self, o: RunOutcome) -> Self {
        let z = o.z as i128;
        let n = o.non_singleton as u128;
        self.z += z;
        self.z2 += z * z;
        self.n += n;
        self.n2 += n * n;
        self.aborts += o.abort.is_some() as usize;
        self.runs += 1;
        self
    }

    fn merge(self, o: Sums) -> Self {
        Sums {
            z: self.z + o.z,
            z2: self.z2 + o.z2,
            n: self.n + o.n,
            n2: self.n2 + o.n2,
            aborts: self.aborts + o.aborts,
            runs: self.runs + o.runs,
        }
    }

    fn finish(self) -> AveragedStats {
        let k = self.runs as f64;
        let se = |s: f64, s2: f64| {
            if self.runs < 2 {
                return 0.0;
            }
            let mean = s / k;
            let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
            (var / k).sqrt()
        };
        AveragedStats {
            z_a: self.z as f64 / k,
            n_a: self.n as f64 / k,
            z_se: se(self.z as f64, self.z2 as f64),
            n_se: se(self.n as f64, self.n2 as f64),
            runs: self.runs,
            aborts: self.aborts,
        }
    }
}

fn run_range(s_p: &[(usize, usize)], s_q: &[(usize, usize)], params: &StatsParams, rng: &RngStream, range: std::ops::Range<u64>) -> Sums {
    range
        .into_par_iter()
        .map(|k| independence_run(s_p, s_q, params, &rng.trial(k)))
        .fold(Sums::default, Sums::add)
        .reduce(Sums::default, Sums::merge)
}

/// Averages `runs` executions; run `k` uses `rng.trial(k)`. Sums are exact
/// integers, so the result does not depend on scheduling.
pub fn averaged_stats_fixed(s_p: &[(usize, usize)], s_q: &[(usize, usize)], params: &StatsParams, runs: usize, rng: &RngStream) -> AveragedStats {
    run_range(s_p, s_q, params, rng, 0..runs as u64).finish()
}

/// Averaged statistics with the repetition count chosen by `k_avg`. In
/// adaptive mode the pilot sizes the run count from the variance of `Z` when
/// `use_z` is set, and of `N` otherwise.
pub fn averaged_stats(
    s_p: &[(usize, usize)],
    s_q: &[(usize, usize)],
    params: &StatsParams,
    k_avg: KAvg,
    use_z: bool,
    rng: &RngStream,
) -> AveragedStats {
    match k_avg {
        KAvg::Fixed { runs } => averaged_stats_fixed(s_p, s_q, params, runs, rng),
        KAvg::Adaptive { pilot, c_k, target, max } => {
            let head = run_range(s_p, s_q, params, rng, 0..pilot as u64);
            let est = head.finish();
            let se = if use_z { est.z_se } else { est.n_se };
            let var = se * se * pilot as f64;
            let k = ((c_k * var / (target * target)).ceil() as usize).clamp(pilot, max);
            head.merge(run_range(s_p, s_q, params, rng, pilot as u64..k as u64)).finish()
        }
    }
}

pub fn estimate_z_a(s_p: &[(usize, usize)], s_q: &[(usize, usize)], cfg: &IndependenceConfig, rng: &RngStream) -> Result<f64> {
    let params = StatsParams::from_config(cfg)?;
    params.check_sets(s_p.len(), s_q.len())?;
    Ok(averaged_stats(s_p, s_q, &params, cfg.k_avg, true, rng).z_a)
}

pub fn estimate_n_a(s_p: &[(usize, usize)], s_q: &[(usize, usize)], cfg: &IndependenceConfig, rng: &RngStream) -> Result<f64> {
    let params = StatsParams::from_config(cfg)?;
    params.check_sets(s_p.len(), s_q.len())?;
    Ok(averaged_stats(s_p, s_q, &params, cfg.k_avg, false, rng).n_a)
}

/// Draws `S_p` (from `p`) and `S_q` (from the product of its marginals).
pub fn draw_sample_sets(p: &dyn PairSource, size: usize, rng: &RngStream) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let mut rp = rng.derive(Role::Sample1).rng();
    let mut rq = rng.derive(Role::Sample2).rng();
    let s_p = p.draw_many(size, &mut rp)?;
    let s_q = (0..size)
        .map(|_| product_of_marginals_sample(p, &mut rq))
        .collect::<Result<Vec<_>>>()?;
    Ok((s_p, s_q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Collisions,
    Statistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceOutcome {
    pub verdict: Verdict,
    /// Stage that rejected, if any.
    pub rejected_at: Option<Stage>,
    pub m: u64,
    pub n_hat: f64,
    pub n_threshold: f64,
    pub z_hat: Option<f64>,
    pub z_threshold: f64,
}

fn stage_median(
    p: &dyn PairSource,
    params: &StatsParams,
    cfg: &IndependenceConfig,
    stage: u64,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<f64> {
    let use_z = stage == 2;
    let mut values = Vec::with_capacity(cfg.median_reps);
    for rep in 0..cfg.median_reps as u64 {
        let (s_p, s_q) = draw_sample_sets(p, params.set_size(), &samples.trial(stage).trial(rep))?;
        let avg = averaged_stats(&s_p, &s_q, params, cfg.k_avg, use_z, &internal.derive(Role::Internal).trial(stage).trial(rep));
        values.push(if use_z { avg.z_a } else { avg.n_a });
    }
    Ok(median(&values))
}

/// Stage thresholds `(r·max(m²/(n1n2), m/n2), r'·G)` drawn from the internal stream.
pub fn independence_thresholds(cfg: &IndependenceConfig, m: u64, internal: &RngStream) -> (f64, f64) {
    let th = internal.derive(Role::Threshold);
    let r: f64 = th.trial(1).rng().random_range(2.0 * cfg.c_n..=100.0 * cfg.c_n);
    let r2: f64 = th.trial(2).rng().random_range(cfg.c_i1..=cfg.c_i2);
    (r * cfg.collision_scale(m), r2 * cfg.gap_scale(m))
}

pub fn rep_independence_test(
    p: &dyn PairSource,
    cfg: &IndependenceConfig,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<IndependenceOutcome> {
    if p.shape() != (cfg.n1, cfg.n2) {
        return Err(invalid("p", format!("shape {:?} does not match {} x {}", p.shape(), cfg.n1, cfg.n2)));
    }
    let params = StatsParams::from_config(cfg)?;
    let (n_threshold, z_threshold) = independence_thresholds(cfg, params.m, internal);
    let n_hat = stage_median(p, &params, cfg, 1, internal, samples)?;
    let mut out = IndependenceOutcome {
        verdict: Verdict::Reject,
        rejected_at: Some(Stage::Collisions),
        m: params.m,
        n_hat,
        n_threshold,
        z_hat: None,
        z_threshold,
    };
    if threshold_verdict(n_hat, n_threshold) == Verdict::Reject {
        return Ok(out);
    }
    let z_hat = stage_median(p, &params, cfg, 2, internal, samples)?;
    out.z_hat = Some(z_hat);
    out.verdict = threshold_verdict(z_hat, z_threshold);
    out.rejected_at = (out.verdict == Verdict::Reject).then_some(Stage::Statistic);
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct IndependenceTester(pub IndependenceConfig);

impl<P: PairSource> ReplicableTester<P> for IndependenceTester {
    fn run(&self, input: &P, internal: &RngStream, samples: &RngStream) -> Result<Verdict> {
        Ok(rep_independence_test(input, &self.0, internal, samples)?.verdict)
    }
}

/// Variance of `stat` over trials divided by the mean of `collisions`.
pub fn variance_ratio(stat: &[f64], collisions: &[f64]) -> f64 {
    let (_, v) = mean_var(stat);
    let (mean_n, _) = mean_var(collisions);
    v / mean_n
}
