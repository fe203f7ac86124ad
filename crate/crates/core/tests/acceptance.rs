//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p reptest --test acceptance -- 3 7` runs only criteria 3 and 7.

mod common;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use reptest::closeness::{rep_closeness_test, ClosenessConfig, ClosenessTester};
use reptest::flattening::{flatten_1d, max_subbin_count, FlattenAssignment};
use reptest::hard_instances::{
    draw_meta_hc, draw_uniformity_hard, ClosenessHardParams, UniformityHardParams,
};
use reptest::independence::{
    averaged_stats, averaged_stats_fixed, draw_sample_sets, rep_independence_test, IndependenceConfig, StatsParams,
    VARIANCE_FIT_C,
};
use reptest::replicability::measure_replicability;
use reptest::sampling::{DistributionSampler, PairSampler};
use reptest::stats::{chi_square_gof, linear_fit, mean_var, rate_std_error};
use reptest::uniformity::{UniformityConfig, UniformityTester};
use reptest::walks::{
    closeness_pair_transition, coord_rw_step, coord_stationary, coord_transition, estimate_mixing, CoordKernel,
    DistanceMetric, FiniteKernel, MixingReport, PairKernel,
};
use reptest::{tv_distance, Measure2d, NonNegativeMeasure, Result, Role, RngStream};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rate(trials: usize, hit: impl Fn(u64) -> Result<bool> + Sync) -> Result<f64> {
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|k| hit(k).map(|h| h as usize))
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / trials as f64)
}

fn half_support(n: usize) -> Result<NonNegativeMeasure> {
    NonNegativeMeasure::new((0..n).map(|i| if i < n / 2 { 2.0 / n as f64 } else { 0.0 }).collect())
}

fn sampler(p: &NonNegativeMeasure) -> Result<DistributionSampler> {
    DistributionSampler::new(p)
}

fn closeness_correctness() -> Result<Outcome> {
    let t0 = Instant::now();
    let n = 500;
    let cfg = ClosenessConfig::new(n, 0.3, 0.1)?;
    let root = RngStream::new(1);
    let uniform = NonNegativeMeasure::uniform(n)?;
    let half = half_support(n)?;
    let tv = tv_distance(&uniform, &half)?;
    let cases = [
        ("uniform", sampler(&uniform)?, sampler(&uniform)?, true),
        ("zipf", sampler(&NonNegativeMeasure::zipf(n, 1.0)?)?, sampler(&NonNegativeMeasure::zipf(n, 1.0)?)?, true),
        ("far", sampler(&uniform)?, sampler(&half)?, false),
    ];
    let mut pass = tv >= cfg.epsilon;
    let mut parts = Vec::new();
    for (g, (name, p, q, accept)) in cases.iter().enumerate() {
        let r = rate(200, |k| {
            let t = root.trial(g as u64).trial(k);
            let v = rep_closeness_test(p, q, &cfg, &t.derive(Role::Internal), &t.derive(Role::Sample1))?.verdict;
            Ok(v.accepted() == *accept)
        })?;
        pass &= r >= 0.9;
        parts.push(format!("{name} {}={r:.3}", if *accept { "accept" } else { "reject" }));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs <= 120.0;
    outcome(pass, format!("{}, far dTV={tv:.2}, {secs:.1}s (limit 120s)", parts.join(", ")))
}

fn closeness_replicability() -> Result<Outcome> {
    let t0 = Instant::now();
    let n = 500;
    let cfg = ClosenessConfig::new(n, 0.3, 0.1)?;
    let tester = ClosenessTester(cfg);
    let root = RngStream::new(2);
    let uniform = sampler(&NonNegativeMeasure::uniform(n)?)?;
    let half = sampler(&half_support(n)?)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut check = |name: &str, rate: f64, pairs: usize| {
        let se = rate_std_error(rate, pairs);
        let ok = rate <= cfg.rho + 3.0 * se;
        pass &= ok;
        parts.push(format!("{name} {rate:.3}"));
    };
    let same = measure_replicability(&tester, |_| Ok((uniform.clone(), uniform.clone())), 500, &root.trial(0))?;
    check("uniform", same.disagreement, 500);
    let far = measure_replicability(&tester, |_| Ok((uniform.clone(), half.clone())), 500, &root.trial(1))?;
    check("far", far.disagreement, 500);
    // H_C at n=500 with m=100 heavy buckets; 10 draws of 50 pairs each.
    let mut disagree = 0.0;
    for i in 0..10u64 {
        let inst = draw_meta_hc(n, 100, cfg.epsilon, &root.derive(Role::Instance).trial(i))?;
        let (p, q) = (sampler(&inst.p)?, sampler(&inst.q)?);
        let est = measure_replicability(&tester, |_| Ok((p.clone(), q.clone())), 50, &root.trial(2).trial(i))?;
        disagree += est.disagreement * 50.0;
    }
    check("H_C", disagree / 500.0, 500);
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs <= 300.0;
    outcome(pass, format!("disagreement {} (bound rho={} + 3se), {secs:.1}s (limit 300s)", parts.join(", "), cfg.rho))
}

/// `Z` over 2000 trials on `p = q`, for uniform and Zipf at each `n`.
fn null_statistics() -> Result<Vec<(String, ClosenessConfig, u64, Vec<f64>)>> {
    let root = RngStream::new(3);
    let mut out = Vec::new();
    for (g, n) in [100usize, 500].into_iter().enumerate() {
        let cfg = ClosenessConfig::new(n, 0.3, 0.1)?;
        let m = cfg.sample_size()?;
        for (h, (name, p)) in [("uniform", NonNegativeMeasure::uniform(n)?), ("zipf", NonNegativeMeasure::zipf(n, 1.0)?)]
            .into_iter()
            .enumerate()
        {
            let s = sampler(&p)?;
            let base = root.trial(g as u64).trial(h as u64);
            let zs = (0..2000u64)
                .into_par_iter()
                .map(|k| {
                    let t = base.trial(k);
                    Ok(rep_closeness_test(&s, &s, &cfg, &t.derive(Role::Internal), &t.derive(Role::Sample1))?.z as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            out.push((format!("{name} n={n}"), cfg, m, zs));
        }
    }
    Ok(out)
}

fn variance_bound(stats: &[(String, ClosenessConfig, u64, Vec<f64>)]) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, _, m, zs) in stats {
        let (_, var) = mean_var(zs);
        let bound = 4.8 * *m as f64;
        pass &= var <= bound;
        parts.push(format!("{name} Var={var:.0}/{bound:.0}"));
    }
    outcome(pass, parts.join(", "))
}

fn completeness_mean(stats: &[(String, ClosenessConfig, u64, Vec<f64>)]) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg, m, zs) in stats {
        let (mean, var) = mean_var(zs);
        let se = (var / zs.len() as f64).sqrt();
        let bound = cfg.c1 * (*m as f64).sqrt();
        pass &= mean <= bound + 3.0 * se;
        parts.push(format!("{name} mean={mean:.1}/{bound:.1}+3*{se:.1}"));
    }
    outcome(pass, parts.join(", "))
}

fn heavy_bin() -> Result<Outcome> {
    let (n, alpha) = (200f64, 0.1);
    let bound = 20.0 / alpha * n.ln();
    let samples = vec![0usize; 2000];
    let root = RngStream::new(5);
    let mut worst = 0;
    let mut within = 0;
    for k in 0..1000 {
        let a = FlattenAssignment::random(samples.len(), alpha, &mut root.trial(k).rng());
        let max = max_subbin_count(&flatten_1d(&samples, &a)?);
        worst = worst.max(max);
        within += (max as f64 <= bound) as usize;
    }
    let frac = within as f64 / 1000.0;
    outcome(frac >= 0.99, format!("{frac:.3} of trials within {bound:.1}, largest sub-bin {worst}"))
}

fn singleton_fact() -> Result<Outcome> {
    let t0 = Instant::now();
    let mut r = RngStream::new(6).rng();
    let mut mismatches = 0;
    let mut checked = 0;
    while checked < 50 {
        let k = r.random_range(2..=12usize);
        let np = r.random_range(1..k);
        let d = r.random_range(2..=6usize);
        let union: Vec<usize> = (0..k).map(|_| r.random_range(0..d)).collect();
        let singles: Vec<usize> = (0..k).filter(|&i| union.iter().filter(|&&x| x == union[i]).count() == 1).collect();
        let Some(&drop) = singles.first() else { continue };
        let split = |v: &[usize], np: usize| (v[..np].to_vec(), v[np..].to_vec());
        let (sp, sq) = split(&union, np);
        let before = common::marking_sum(&sp, &sq);
        let mut rest = union.clone();
        rest.remove(drop);
        let (sp2, sq2) = split(&rest, if drop < np { np - 1 } else { np });
        let after = common::marking_sum(&sp2, &sq2);
        // Averages over 2^k and 2^{k-1} markings.
        mismatches += (before != 2 * after) as usize;
        checked += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs <= 60.0,
        format!("{mismatches} mismatches on {checked} instances, {secs:.2}s (limit 60s)"),
    )
}

fn averaged_estimators() -> Result<Outcome> {
    let params = StatsParams {
        m: 2,
        alpha: 0.25,
        beta: 0.3,
        n1: 3,
        n2: 3,
        forced_lengths: None,
    };
    let instances: [(&[(usize, usize)], &[(usize, usize)]); 3] = [
        (&[(0, 0), (0, 0), (1, 1)], &[(0, 1), (1, 0), (0, 0)]),
        (&[(0, 0), (0, 1), (1, 1), (0, 0)], &[(1, 0), (0, 1), (2, 2)]),
        (&[(2, 1), (2, 1)], &[(2, 1), (0, 1), (2, 0)]),
    ];
    let root = RngStream::new(7);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (sp, sq)) in instances.iter().enumerate() {
        let (ez, en) = common::exact_averaged(sp, sq, &params);
        let est = averaged_stats_fixed(sp, sq, &params, 100_000, &root.trial(i as u64));
        let dz = (est.z_a - ez).abs() / est.z_se;
        let dn = (est.n_a - en).abs() / est.n_se;
        pass &= dz <= 3.0 && dn <= 3.0;
        parts.push(format!("#{i} Z {:.4}/{ez:.4} ({dz:.1}se) N {:.4}/{en:.4} ({dn:.1}se)", est.z_a, est.n_a));
    }
    outcome(pass, parts.join(", "))
}

struct NullRun {
    label: String,
    cfg: IndependenceConfig,
    m: u64,
    z: Vec<f64>,
    n: Vec<f64>,
}

/// `Z_a` and `N_a` on 500 fresh product sample sets per grid.
fn independence_null_runs() -> Result<Vec<NullRun>> {
    let root = RngStream::new(8);
    let mut out = Vec::new();
    for (g, (n1, n2)) in [(20usize, 10usize), (40, 20)].into_iter().enumerate() {
        let cfg = IndependenceConfig::new(n1, n2, 0.35, 0.2)?;
        let params = StatsParams::from_config(&cfg)?;
        let source = PairSampler::new(&Measure2d::uniform(n1, n2)?)?;
        let runs = (0..500u64)
            .into_par_iter()
            .map(|k| {
                let t = root.trial(g as u64).trial(k);
                let (sp, sq) = draw_sample_sets(&source, params.set_size(), &t.derive(Role::Sample1))?;
                let a = averaged_stats(&sp, &sq, &params, cfg.k_avg, true, &t.derive(Role::Internal));
                Ok((a.z_a, a.n_a))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(NullRun {
            label: format!("{n1}x{n2}"),
            cfg,
            m: params.m,
            z: runs.iter().map(|r| r.0).collect(),
            n: runs.iter().map(|r| r.1).collect(),
        });
    }
    Ok(out)
}

fn product_collisions(runs: &[NullRun]) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let (mean, _) = mean_var(&r.n);
        let bound = r.cfg.c_n * r.cfg.collision_scale(r.m);
        pass &= mean <= bound;
        parts.push(format!("{} E[N]={mean:.1}/{bound:.1}", r.label));
    }
    outcome(pass, format!("C_N={}: {}", runs[0].cfg.c_n, parts.join(", ")))
}

fn variance_by_collisions(runs: &[NullRun]) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let (mean_n, var_n) = mean_var(&r.n);
        let (_, var_z) = mean_var(&r.z);
        let bound = VARIANCE_FIT_C * ((r.cfg.n1 * r.cfg.n2) as f64).ln().powi(3);
        let (rz, rn) = (var_z / mean_n, var_n / mean_n);
        pass &= rz <= bound && rn <= bound;
        parts.push(format!("{} VarZ/EN={rz:.3} VarN/EN={rn:.3} bound={bound:.3}", r.label));
    }
    outcome(pass, format!("c={VARIANCE_FIT_C}: {}", parts.join(", ")))
}

fn independence_correctness() -> Result<Outcome> {
    let t0 = Instant::now();
    let root = RngStream::new(10);
    let cases = [
        ("uniform 40x20 accept", Measure2d::uniform(40, 20)?, true),
        ("diagonal 20x20 reject", Measure2d::diagonal(20)?, false),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (g, (name, p, accept)) in cases.iter().enumerate() {
        let cfg = IndependenceConfig::new(p.rows(), p.cols(), 0.35, 0.2)?;
        let source = PairSampler::new(p)?;
        let r = rate(100, |k| {
            let t = root.trial(g as u64).trial(k);
            let v = rep_independence_test(&source, &cfg, &t.derive(Role::Internal), &t.derive(Role::Sample1))?.verdict;
            Ok(v.accepted() == *accept)
        })?;
        pass &= r >= 2.0 / 3.0;
        parts.push(format!("{name}={r:.2}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs <= 900.0;
    outcome(pass, format!("{}, {secs:.1}s (limit 900s)", parts.join(", ")))
}

/// Worst row-sum error, `|Σπ − 1|`, and worst relative detailed-balance error.
struct KernelErrors {
    row: f64,
    pi: f64,
    balance: f64,
}

fn coord_errors(k: &CoordKernel) -> KernelErrors {
    const TAIL: u64 = 400;
    let row = (0..=50u64)
        .map(|a| ((0..=TAIL).map(|b| coord_transition(a, b, k)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let pi = ((0..=TAIL).map(|a| coord_stationary(a, k)).sum::<f64>() - 1.0).abs();
    let mut balance: f64 = 0.0;
    for a in 0..=50u64 {
        for b in 0..=50u64 {
            let lhs = k.ln_stationary(a) + k.ln_transition(a, b);
            let rhs = k.ln_stationary(b) + k.ln_transition(b, a);
            balance = balance.max((lhs - rhs).abs());
        }
    }
    KernelErrors { row, pi, balance }
}

fn pair_errors(k: &PairKernel) -> KernelErrors {
    const TAIL: u64 = 120;
    let coords = [0u64, 1, 2, 3, 5, 8, 13, 20, 33, 50];
    let states: Vec<(u64, u64)> = coords.iter().flat_map(|&a| coords.iter().map(move |&b| (a, b))).collect();
    let row = states
        .iter()
        .map(|&s| {
            let total: f64 = (0..=TAIL).flat_map(|c| (0..=TAIL).map(move |d| (c, d))).map(|t| closeness_pair_transition(s, t, k)).sum();
            (total - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let pi = ((0..=TAIL).flat_map(|c| (0..=TAIL).map(move |d| (c, d))).map(|t| k.ln_stationary(t).exp()).sum::<f64>() - 1.0).abs();
    let mut balance: f64 = 0.0;
    for &s in &states {
        for &t in &states {
            let lhs = k.ln_stationary(s) + k.ln_transition(s, t);
            let rhs = k.ln_stationary(t) + k.ln_transition(t, s);
            balance = balance.max((lhs - rhs).abs());
        }
    }
    KernelErrors { row, pi, balance }
}

fn kernel_exactness() -> Result<Outcome> {
    let n = 100u64;
    let mut worst = KernelErrors { row: 0.0, pi: 0.0, balance: 0.0 };
    let mut take = |e: KernelErrors| {
        worst.row = worst.row.max(e.row);
        worst.pi = worst.pi.max(e.pi);
        worst.balance = worst.balance.max(e.balance);
    };
    for ratio in [0.1, 1.0, 2.0] {
        for xi in [0.0, 0.1, 0.24] {
            take(coord_errors(&CoordKernel::new((ratio * n as f64) as u64, n, xi)?));
        }
    }
    let coord = KernelErrors { ..worst };
    worst = KernelErrors { row: 0.0, pi: 0.0, balance: 0.0 };
    let mut take = |e: KernelErrors| {
        worst.row = worst.row.max(e.row);
        worst.pi = worst.pi.max(e.pi);
        worst.balance = worst.balance.max(e.balance);
    };
    for m in [10usize, 40] {
        for xi in [0.0, 0.1, 0.24] {
            take(pair_errors(&PairKernel::new(ClosenessHardParams::new(n as usize, m, 0.24, xi)?)));
        }
    }
    let pair = worst;
    let ok = |e: &KernelErrors| e.row <= 1e-9 && e.pi <= 1e-9 && e.balance <= 1e-10;
    outcome(
        ok(&coord) && ok(&pair),
        format!(
            "coordinate row={:.1e} pi={:.1e} balance={:.1e}; pair row={:.1e} pi={:.1e} balance={:.1e}",
            coord.row, coord.pi, coord.balance, pair.row, pair.pi, pair.balance
        ),
    )
}

fn coordinate_mixing() -> Result<Outcome> {
    let k = CoordKernel::new(100, 1000, 0.2)?;
    let fk = k.truncated()?;
    let poisson = estimate_mixing(&fk, &k.poisson_initials(), 0.04, 20, DistanceMetric::L1)?;
    let tau04 = poisson.tau_for(0.04);
    let mut all = k.poisson_initials();
    all.extend(fk.point_masses());
    let report = estimate_mixing(&fk, &all, 0.04, 20, DistanceMetric::L1)?;
    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    let xs: Vec<f64> = deltas.iter().map(|d: &f64| (1.0 / d).ln()).collect();
    let taus: Vec<Option<usize>> = deltas.iter().map(|&d| report.tau_for(d)).collect();
    let Some(ys) = taus.iter().map(|t| t.map(|t| t as f64)).collect::<Option<Vec<f64>>>() else {
        return outcome(false, format!("tau(0.04)={tau04:?}; some tau beyond the horizon: {taus:?}"));
    };
    let fit = linear_fit(&xs, &ys);
    let crossings: Vec<f64> = deltas.iter().filter_map(|&d| report.crossing_time(d)).collect();
    let cfit = linear_fit(&xs, &crossings);
    let pass = tau04.is_some_and(|t| t <= 2) && fit.slope.is_finite() && fit.r_squared >= 0.95;
    outcome(
        pass,
        format!(
            "tau(0.04)={tau04:?} (Poisson initials); tau over all initials {ys:?}: slope={:.3} R^2={:.3} (need 0.95); interpolated crossing times {:?}: R^2={:.4}",
            fit.slope,
            fit.r_squared,
            crossings.iter().map(|c| (c * 100.0).round() / 100.0).collect::<Vec<_>>(),
            cfit.r_squared
        ),
    )
}

fn product_mixing() -> Result<Outcome> {
    let coords = [
        CoordKernel::new(10, 100, 0.0)?.with_truncation(7),
        CoordKernel::new(10, 100, 0.2)?.with_truncation(7),
        CoordKernel::new(20, 100, 0.1)?.with_truncation(7),
    ];
    let kernels: Vec<FiniteKernel> = coords.iter().map(|c| c.truncated()).collect::<Result<_>>()?;
    let states = kernels.iter().map(|k| k.size()).max().unwrap_or(0);
    let product = kernels[0].tensor(&kernels[1]).tensor(&kernels[2]);
    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    let horizon = 30;
    let prod = estimate_mixing(&product, &product.point_masses(), deltas[0], horizon, DistanceMetric::L1)?;
    let singles: Vec<MixingReport> = kernels
        .iter()
        .map(|k| estimate_mixing(k, &k.point_masses(), deltas[0], horizon, DistanceMetric::L1))
        .collect::<Result<_>>()?;
    let mut pass = states <= 15;
    let mut parts = Vec::new();
    for &d in &deltas {
        let lhs = prod.tau_for(d);
        let rhs = singles.iter().map(|r| r.tau_for(d / 3.0)).collect::<Option<Vec<_>>>().map(|v| v.into_iter().max().unwrap_or(0));
        pass &= matches!((lhs, rhs), (Some(a), Some(b)) if a <= b);
        parts.push(format!("d={d:.0e}: {lhs:?}<={rhs:?}"));
    }
    let gap = product.absolute_gap();
    let min_gap = kernels.iter().map(|k| k.absolute_gap()).fold(f64::INFINITY, f64::min);
    pass &= (gap - min_gap).abs() <= 1e-9;
    outcome(
        pass,
        format!(
            "{states} states per coordinate, {} in the product; tau_prod(d) <= max_i tau_i(d/3): {}; gap {gap:.6} vs min {min_gap:.6}",
            product.size(),
            parts.join(", ")
        ),
    )
}

fn sampler_agreement() -> Result<Outcome> {
    let k = CoordKernel::new(100, 1000, 0.2)?;
    let steps = 1_000_000u64;
    let cells = 20u64;
    let root = RngStream::new(14);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, start) in [0u64, 1, 3].into_iter().enumerate() {
        let mut r = root.trial(i as u64).rng();
        let mut observed = vec![0u64; cells as usize + 1];
        for _ in 0..steps {
            let b = coord_rw_step(start, &k, &mut r).min(cells);
            observed[b as usize] += 1;
        }
        let mut expected: Vec<f64> = (0..cells).map(|b| steps as f64 * coord_transition(start, b, &k)).collect();
        expected.push(steps as f64 - expected.iter().sum::<f64>());
        let p = chi_square_gof(&observed, &expected, 5.0);
        pass &= p >= 1e-3;
        parts.push(format!("start {start}: p={p:.3}"));
    }
    outcome(pass, parts.join(", "))
}

fn undersampled_uniformity() -> Result<Outcome> {
    let (n, epsilon, rho) = (2000, 0.25, 0.1);
    let base = UniformityConfig::new(n, epsilon, rho)?;
    let bound = base.sample_size()?;
    let m = (0.05 * bound as f64).ceil() as u64;
    let tester = UniformityTester(base.with_override(Some(m))?);
    let root = RngStream::new(15);
    let pairs = 400;
    let mut rows = Vec::new();
    for g in 0..=10u64 {
        let xi = 0.025 * g as f64;
        let params = UniformityHardParams::new(n, epsilon, xi)?;
        let est = measure_replicability(&tester, |s| DistributionSampler::new(&draw_uniformity_hard(&params, s)), pairs, &root.trial(g))?;
        rows.push((xi, est.disagreement));
    }
    let hits: Vec<f64> = rows.iter().filter(|r| r.1 >= rho).map(|r| r.0).collect();
    let table: Vec<String> = rows.iter().map(|(xi, d)| format!("{xi:.3}:{d:.3}")).collect();
    let span = match (hits.first(), hits.last()) {
        (Some(a), Some(b)) => format!("disagreement >= {rho} on xi in [{a:.3}, {b:.3}]"),
        _ => format!("no grid point reaches {rho}"),
    };
    outcome(!hits.is_empty(), format!("m={m} of {bound}; {span}; xi:disagreement {}", table.join(" ")))
}

type Criterion<'a> = (u32, &'static str, Box<dyn FnOnce() -> Result<Outcome> + 'a>);

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let closeness_nulls = std::cell::OnceCell::new();
    let independence_nulls = std::cell::OnceCell::new();
    let nulls = || closeness_nulls.get_or_init(null_statistics).as_ref().map_err(|e| e.clone());
    let ind = || independence_nulls.get_or_init(independence_null_runs).as_ref().map_err(|e| e.clone());
    let criteria: Vec<Criterion> = vec![
        (1, "closeness correctness", Box::new(closeness_correctness)),
        (2, "closeness replicability", Box::new(closeness_replicability)),
        (3, "closeness variance bound", Box::new(|| variance_bound(nulls()?))),
        (4, "closeness completeness mean", Box::new(|| completeness_mean(nulls()?))),
        (5, "heavy bins are split", Box::new(heavy_bin)),
        (6, "singletons do not contribute", Box::new(singleton_fact)),
        (7, "averaged estimators match enumeration", Box::new(averaged_estimators)),
        (8, "product non-singleton bound", Box::new(|| product_collisions(ind()?))),
        (9, "variance by collisions", Box::new(|| variance_by_collisions(ind()?))),
        (10, "independence correctness", Box::new(independence_correctness)),
        (11, "kernel exactness", Box::new(kernel_exactness)),
        (12, "coordinate mixing", Box::new(coordinate_mixing)),
        (13, "product-walk mixing", Box::new(product_mixing)),
        (14, "sampler matches kernel", Box::new(sampler_agreement)),
        (15, "under-sampled uniformity is not replicable", Box::new(undersampled_uniformity)),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !wanted(id) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let status = if pass { "PASS" } else { "FAIL" };
        println!("{status} [{id:>2}] {name}: {detail} [{:.1}s]", t0.elapsed().as_secs_f64());
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
