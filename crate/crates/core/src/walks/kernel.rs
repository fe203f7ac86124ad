use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hard_instances::ClosenessHardParams;
use crate::measure::CountVector;
use crate::sampling::{poisson, poisson_ln_pmf};
use crate::walks::mixing::FiniteKernel;

/// Row sums of a truncated kernel must be within this of 1.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

fn lse(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn lse_all(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, lse)
}

/// `k · ln x`, with `0 · ln 0 = 0`.
fn k_ln(x: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * x.ln()
    }
}

/// `ceil(λ + 12·√max(λ, 1) + 30)`.
pub fn default_truncation(lambda: f64) -> usize {
    (lambda + 12.0 * lambda.max(1.0).sqrt() + 30.0).ceil() as usize
}

/// A hidden branch `j` with weight `w_j` makes every coordinate `k` of the
/// state an independent `Poi(rate_jk)`. One step of the walk draws `j` from
/// its posterior given the current state and then a fresh state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonMixture {
    weights: Vec<f64>,
    rates: Vec<Vec<f64>>,
}

impl PoissonMixture {
    pub fn new(weights: Vec<f64>, rates: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(invalid("weights", "need one rate vector per branch"));
        }
        let dims = rates[0].len();
        if rates.iter().any(|r| r.len() != dims || r.iter().any(|&x| !(x >= 0.0 && x.is_finite()))) {
            return Err(invalid("rates", "rates must be finite, non-negative and of equal dimension"));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("must be a distribution, sum {total}")));
        }
        Ok(PoissonMixture { weights, rates })
    }

    pub fn dims(&self) -> usize {
        self.rates[0].len()
    }

    pub fn branches(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.weights.iter().copied().zip(self.rates.iter().map(|r| r.as_slice()))
    }

    fn ln_branch(&self, j: usize, x: &[u64]) -> f64 {
        self.rates[j].iter().zip(x).map(|(&r, &k)| poisson_ln_pmf(r, k)).sum()
    }

    pub fn ln_stationary(&self, x: &[u64]) -> f64 {
        lse_all((0..self.weights.len()).map(|j| self.weights[j].ln() + self.ln_branch(j, x)))
    }

    /// `ln Pr(S = x, T = y)`, symmetric in `x` and `y`.
    pub fn ln_joint(&self, x: &[u64], y: &[u64]) -> f64 {
        lse_all((0..self.weights.len()).map(|j| self.weights[j].ln() + self.ln_branch(j, x) + self.ln_branch(j, y)))
    }

    pub fn ln_transition(&self, x: &[u64], y: &[u64]) -> f64 {
        self.ln_joint(x, y) - self.ln_stationary(x)
    }

    pub fn posterior(&self, x: &[u64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.weights.len()).map(|j| self.weights[j].ln() + self.ln_branch(j, x)).collect();
        let norm = lse_all(logs.iter().copied());
        logs.iter().map(|l| (l - norm).exp()).collect()
    }

    /// Posterior branch, then fresh Poisson counts.
    pub fn step<R: Rng + ?Sized>(&self, x: &[u64], rng: &mut R) -> Vec<u64> {
        let post = self.posterior(x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = post.len() - 1;
        for (i, p) in post.iter().enumerate() {
            acc += p;
            if u < acc {
                j = i;
                break;
            }
        }
        self.rates[j].iter().map(|&r| poisson(r, rng)).collect()
    }

    fn grid(&self, a_max: usize) -> Vec<Vec<u64>> {
        let mut out = vec![vec![]];
        for _ in 0..self.dims() {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..=a_max as u64).map(move |a| {
                        let mut t = s.clone();
                        t.push(a);
                        t
                    })
                })
                .collect();
        }
        out
    }

    /// Largest `|1 − Σ_{y ≤ a_max} P(x, y)|` over states `x ≤ a_max`.
    pub fn truncation_error(&self, a_max: usize) -> (usize, f64) {
        let grid = self.grid(a_max);
        let mut worst = (0, 0.0);
        for (i, x) in grid.iter().enumerate() {
            let sum: f64 = grid.iter().map(|y| self.ln_transition(x, y).exp()).sum();
            let err = (1.0 - sum).abs();
            if err > worst.1 {
                worst = (i, err);
            }
        }
        worst
    }

    /// The joint restricted to `[0, a_max]^dims` with rows renormalized. The
    /// result is exactly reversible with respect to its row-sum marginal.
    /// States are ordered lexicographically.
    pub fn truncated_unchecked(&self, a_max: usize) -> FiniteKernel {
        let grid = self.grid(a_max);
        let s = grid.len();
        let mut joint = vec![0.0; s * s];
        let mut max_ln = f64::NEG_INFINITY;
        let mut lns = vec![0.0; s * s];
        for i in 0..s {
            for k in i..s {
                let l = self.ln_joint(&grid[i], &grid[k]);
                lns[i * s + k] = l;
                lns[k * s + i] = l;
                max_ln = max_ln.max(l);
            }
        }
        for (j, l) in joint.iter_mut().zip(&lns) {
            *j = (l - max_ln).exp();
        }
        FiniteKernel::from_symmetric_joint(s, &joint).expect("joint of a Poisson mixture has positive rows")
    }

    /// As [`Self::truncated_unchecked`], after asserting that the untruncated
    /// rows lose at most [`TRUNCATION_TOLERANCE`] of their mass.
    pub fn truncated(&self, a_max: usize) -> Result<FiniteKernel> {
        let (row, err) = self.truncation_error(a_max);
        if err > TRUNCATION_TOLERANCE {
            return Err(Error::TruncationInadequate {
                max_state: a_max,
                row,
                sum: 1.0 - err,
            });
        }
        Ok(self.truncated_unchecked(a_max))
    }
}

/// One coordinate of the uniformity walk: the bucket mass is `(1 ± ξ)/n`
/// with probability ½ each and its count is `Poi(m · mass)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordKernel {
    pub m: u64,
    pub n: u64,
    pub xi: f64,
    pub a_max: usize,
}

impl CoordKernel {
    pub fn new(m: u64, n: u64, xi: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if !(0.0..1.0).contains(&xi) {
            return Err(invalid("xi", format!("{xi} not in [0, 1)")));
        }
        Ok(CoordKernel {
            m,
            n,
            xi,
            a_max: default_truncation(m as f64 / n as f64),
        })
    }

    pub fn with_truncation(mut self, a_max: usize) -> Self {
        self.a_max = a_max;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// `(heavy rate, light rate) = (λ(1+ξ), λ(1−ξ))`.
    pub fn rates(&self) -> (f64, f64) {
        let l = self.lambda();
        (l * (1.0 + self.xi), l * (1.0 - self.xi))
    }

    pub fn mixture(&self) -> PoissonMixture {
        let (hi, lo) = self.rates();
        PoissonMixture::new(vec![0.5, 0.5], vec![vec![hi], vec![lo]]).expect("valid two-branch mixture")
    }

    /// `ln P(a, b)` from the closed form
    /// `e^{-λ} λ^b/b! · (e^{-2ξλ}(1+ξ)^{a+b} + e^{2ξλ}(1−ξ)^{a+b}) / (e^{-ξλ}(1+ξ)^a + e^{ξλ}(1−ξ)^a)`.
    pub fn ln_transition(&self, a: u64, b: u64) -> f64 {
        let (l, x) = (self.lambda(), self.xi);
        let (up, down) = ((1.0 + x).ln(), (1.0 - x).ln());
        let k = |n: u64, lg: f64| if n == 0 { 0.0 } else { n as f64 * lg };
        let num = lse(-2.0 * x * l + k(a + b, up), 2.0 * x * l + k(a + b, down));
        let den = lse(-x * l + k(a, up), x * l + k(a, down));
        -l + k_ln(l, b) - statrs::function::gamma::ln_gamma(b as f64 + 1.0) + num - den
    }

    /// `ln` of `½ e^{-λ} λ^a/a! · (e^{-ξλ}(1+ξ)^a + e^{ξλ}(1−ξ)^a)`.
    pub fn ln_stationary(&self, a: u64) -> f64 {
        let (l, x) = (self.lambda(), self.xi);
        let k = |lg: f64| if a == 0 { 0.0 } else { a as f64 * lg };
        let mix = lse(-x * l + k((1.0 + x).ln()), x * l + k((1.0 - x).ln()));
        0.5f64.ln() - l + k_ln(l, a) - statrs::function::gamma::ln_gamma(a as f64 + 1.0) + mix
    }

    /// `Pr(heavy branch | count = a)`.
    pub fn posterior_heavy(&self, a: u64) -> f64 {
        self.mixture().posterior(&[a])[0]
    }

    /// The two Poisson branch laws on `[0, a_max]`, renormalized.
    pub fn poisson_initials(&self) -> Vec<(String, Vec<f64>)> {
        let (hi, lo) = self.rates();
        [("poisson-heavy", hi), ("poisson-light", lo)]
            .into_iter()
            .map(|(name, rate)| {
                let mut v: Vec<f64> = (0..=self.a_max as u64).map(|a| poisson_ln_pmf(rate, a).exp()).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                (name.to_string(), v)
            })
            .collect()
    }

    pub fn truncated(&self) -> Result<FiniteKernel> {
        self.mixture().truncated(self.a_max)
    }
}

pub fn coord_transition(a: u64, b: u64, kernel: &CoordKernel) -> f64 {
    kernel.ln_transition(a, b).exp()
}

pub fn coord_stationary(a: u64, kernel: &CoordKernel) -> f64 {
    kernel.ln_stationary(a).exp()
}

/// One step by Bayes resampling: the branch from its posterior given `a`,
/// then a fresh Poisson count.
pub fn coord_rw_step<R: Rng + ?Sized>(a: u64, kernel: &CoordKernel, rng: &mut R) -> u64 {
    let (hi, lo) = kernel.rates();
    let heavy = rng.random::<f64>() < kernel.posterior_heavy(a);
    poisson(if heavy { hi } else { lo }, rng)
}

/// The full walk: each bucket steps independently.
pub fn sample_rw_step<R: Rng + ?Sized>(t: &CountVector, kernel: &CoordKernel, rng: &mut R) -> CountVector {
    CountVector::from_counts(t.counts().iter().map(|&a| coord_rw_step(a, kernel, rng)).collect())
}

/// One bucket of the closeness walk over `(count in p, count in q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairKernel {
    pub params: ClosenessHardParams,
    pub a_max: usize,
}

impl PairKernel {
    pub fn new(params: ClosenessHardParams) -> Self {
        let mut k = PairKernel { params, a_max: 0 };
        let top = k.mixture().branches().flat_map(|(_, r)| r.to_vec()).fold(0.0, f64::max);
        k.a_max = default_truncation(top);
        k
    }

    pub fn with_truncation(mut self, a_max: usize) -> Self {
        self.a_max = a_max;
        self
    }

    /// Branch `j` has the tester's `m` times the bucket masses as rates.
    pub fn mixture(&self) -> PoissonMixture {
        let m = self.params.m as f64;
        let (weights, rates) = self
            .params
            .branches()
            .iter()
            .map(|&(b, w)| {
                let (p, q) = self.params.branch_masses(b);
                (w, vec![m * p, m * q])
            })
            .unzip();
        PoissonMixture::new(weights, rates).expect("branch weights sum to one")
    }

    pub fn ln_transition(&self, from: (u64, u64), to: (u64, u64)) -> f64 {
        self.mixture().ln_transition(&[from.0, from.1], &[to.0, to.1])
    }

    pub fn ln_stationary(&self, state: (u64, u64)) -> f64 {
        self.mixture().ln_stationary(&[state.0, state.1])
    }

    pub fn step<R: Rng + ?Sized>(&self, state: (u64, u64), rng: &mut R) -> (u64, u64) {
        let v = self.mixture().step(&[state.0, state.1], rng);
        (v[0], v[1])
    }

    pub fn truncated(&self) -> Result<FiniteKernel> {
        self.mixture().truncated(self.a_max)
    }
}

pub fn closeness_pair_transition(from: (u64, u64), to: (u64, u64), kernel: &PairKernel) -> f64 {
    kernel.ln_transition(from, to).exp()
}
