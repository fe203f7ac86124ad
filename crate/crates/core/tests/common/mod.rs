//! Exhaustive oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use reptest::flattening::non_singleton_count;
use reptest::independence::{closeness_stat_with_marks, StatsParams};
use reptest::sampling::poisson_pmf;

/// `Σ Z` over all `2^k` markings of the `k = |s_p| + |s_q|` samples.
pub fn marking_sum<T: Ord + Clone>(s_p: &[T], s_q: &[T]) -> i64 {
    let k = s_p.len() + s_q.len();
    assert!(k < 31);
    (0u32..1 << k)
        .map(|mask| {
            let bits: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            closeness_stat_with_marks(s_p, &bits[..s_p.len()], s_q, &bits[s_p.len()..])
        })
        .sum()
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expected contribution of one element seen `a` times in `S_p` and `b` times
/// in `S_q`, over fair marks.
pub fn element_expectation(a: u64, b: u64) -> f64 {
    let mut e = 0.0;
    for i in 0..=a {
        for j in 0..=b {
            let (i2, j2) = (a - i, b - j);
            let v = (i as i64 - j as i64).abs() + (i2 as i64 - j2 as i64).abs() - (i as i64 - i2 as i64).abs() - (j as i64 - j2 as i64).abs();
            e += choose(a, i) * choose(b, j) * v as f64;
        }
    }
    e / 2f64.powi((a + b) as i32)
}

/// `E[Z]` over markings, summed element by element.
pub fn marked_expectation<T: Ord + Clone>(s_p: &[T], s_q: &[T]) -> f64 {
    let mut tagged: Vec<(T, bool)> = s_p.iter().cloned().map(|x| (x, true)).chain(s_q.iter().cloned().map(|x| (x, false))).collect();
    tagged.sort();
    let mut e = 0.0;
    let mut i = 0;
    while i < tagged.len() {
        let (mut a, mut b) = (0, 0);
        let mut j = i;
        while j < tagged.len() && tagged[j].0 == tagged[i].0 {
            if tagged[j].1 {
                a += 1;
            } else {
                b += 1;
            }
            j += 1;
        }
        e += element_expectation(a, b);
        i = j;
    }
    e
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// One rank vector per relative order of the positions sharing a value.
/// Only these relative orders reach the sub-bin indices, and a uniform
/// permutation makes them equally likely.
pub fn group_orders(values: &[usize]) -> Vec<Vec<usize>> {
    let mut distinct: Vec<usize> = values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut orders = vec![vec![usize::MAX; values.len()]];
    let mut next_rank = 0;
    for v in distinct {
        let group: Vec<usize> = (0..values.len()).filter(|&i| values[i] == v).collect();
        let perms = permutations(&group);
        orders = orders
            .iter()
            .flat_map(|o| {
                perms.iter().map(move |p| {
                    let mut o = o.clone();
                    for (r, &pos) in p.iter().enumerate() {
                        o[pos] = next_rank + r;
                    }
                    o
                })
            })
            .collect();
        next_rank += group.len();
    }
    orders
}

/// Law of the sub-bin indices of the `kept` positions: the number of
/// same-valued dividers ranked before each one.
fn sub_index_law(values: &[usize], dividers: &[bool], kept: &[usize], orders: &[Vec<usize>]) -> HashMap<Vec<usize>, f64> {
    let w = 1.0 / orders.len() as f64;
    let mut law = HashMap::new();
    for rank in orders {
        let sub: Vec<usize> = kept
            .iter()
            .map(|&l| (0..values.len()).filter(|&j| dividers[j] && values[j] == values[l] && rank[j] < rank[l]).count())
            .collect();
        *law.entry(sub).or_insert(0.0) += w;
    }
    law
}

/// Exact `(E[Z], E[N])` of one statistic run, averaged over every divider
/// pattern, axis order, truncation length and marking. Aborted runs count as 0.
pub fn exact_averaged(s_p: &[(usize, usize)], s_q: &[(usize, usize)], params: &StatsParams) -> (f64, f64) {
    let np = s_p.len();
    let union: Vec<(usize, usize)> = s_p.iter().chain(s_q).copied().collect();
    let k = union.len();
    assert!(k <= 10);
    let rows: Vec<usize> = union.iter().map(|s| s.0).collect();
    let cols: Vec<usize> = union.iter().map(|s| s.1).collect();
    let (row_orders, col_orders) = (group_orders(&rows), group_orders(&cols));
    let pmf: Vec<f64> = (0..=k as u64).map(|l| poisson_pmf(params.m as f64, l)).collect();
    let bits = |mask: u32| -> Vec<bool> { (0..k).map(|i| mask >> i & 1 == 1).collect() };
    let bern = |f: &[bool], prob: f64| -> f64 { f.iter().map(|&b| if b { prob } else { 1.0 - prob }).product() };
    let (mut ez, mut en) = (0.0, 0.0);
    for mx in 0u32..1 << k {
        let fx = bits(mx);
        let wx = bern(&fx, params.alpha);
        for my in 0u32..1 << k {
            let fy = bits(my);
            let w = wx * bern(&fy, params.beta);
            let kept: Vec<usize> = (0..k).filter(|&i| !fx[i] && !fy[i]).collect();
            let kept_p = kept.partition_point(|&i| i < np);
            if np - kept_p > 10 * params.n1 || (k - np) - (kept.len() - kept_p) > 10 * params.n2 {
                continue;
            }
            let row_law = sub_index_law(&rows, &fx, &kept, &row_orders);
            let col_law = sub_index_law(&cols, &fy, &kept, &col_orders);
            for (rs, wr) in &row_law {
                for (cs, wc) in &col_law {
                    let flat: Vec<(usize, usize, usize, usize)> =
                        kept.iter().enumerate().map(|(j, &l)| (rows[l], rs[j], cols[l], cs[j])).collect();
                    let (fp, fq) = flat.split_at(kept_p);
                    for l in 0..=fp.len() {
                        for l2 in 0..=fq.len() {
                            let wt = w * wr * wc * pmf[l] * pmf[l2];
                            let (tp, tq) = (&fp[..l], &fq[..l2]);
                            ez += wt * marked_expectation(tp, tq);
                            let all: Vec<_> = tp.iter().chain(tq).copied().collect();
                            en += wt * non_singleton_count(&all) as f64;
                        }
                    }
                }
            }
        }
    }
    (ez, en)
}
