//! Sampling primitives: Poisson and binomial variates, Poissonized and
//! fixed-size count vectors, and i.i.d. sample sources.

use rand::{Rng, RngCore};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::measure::{CountVector, Measure2d, NonNegativeMeasure};

/// Rates below this use sequential inversion, above it PTRS rejection.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

/// Draws `Poi(rate)`.
pub fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    if rate < POISSON_INVERSION_LIMIT {
        poisson_inversion(rate, rng)
    } else {
        poisson_ptrs(rate, rng)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut x = 0u64;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf {
        x += 1;
        p *= rate / x as f64;
        cdf += p;
        // Rounding can leave the cdf a hair below `u`; past the mode the
        // remaining tail is exhausted once the pmf underflows.
        if p == 0.0 && x as f64 > rate {
            break;
        }
    }
    x
}

// Hörmann (1993), transformed rejection with squeeze.
fn poisson_ptrs<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `log Pr[Poi(rate) = k]`; the zero-rate case is the point mass at zero.
pub fn poisson_ln_pmf(rate: f64, k: u64) -> f64 {
    if rate <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -rate + k as f64 * rate.ln() - ln_gamma(k as f64 + 1.0)
}

pub fn poisson_pmf(rate: f64, k: u64) -> f64 {
    poisson_ln_pmf(rate, k).exp()
}

pub fn binomial<R: Rng + ?Sized>(trials: u64, prob: f64, rng: &mut R) -> u64 {
    if trials == 0 || prob <= 0.0 {
        return 0;
    }
    if prob >= 1.0 {
        return trials;
    }
    Binomial::new(trials, prob).expect("probability in (0,1)").sample(rng)
}

/// Independent `T_i ~ Poi(m · p_i)`, the Poisson sampling model.
pub fn sample_counts_poissonized<R: Rng + ?Sized>(p: &NonNegativeMeasure, m: f64, rng: &mut R) -> CountVector {
    let counts = p.masses().iter().map(|&mass| poisson(m * mass, rng)).collect();
    CountVector::from_counts(counts)
}

/// Multinomial counts from exactly `m` i.i.d. draws of the distribution `p`.
pub fn sample_counts_fixed<R: Rng + ?Sized>(p: &NonNegativeMeasure, m: u64, rng: &mut R) -> Result<CountVector> {
    p.ensure_normalized()?;
    Ok(multinomial(p.masses(), m, rng))
}

fn multinomial<R: Rng + ?Sized>(probs: &[f64], total: u64, rng: &mut R) -> CountVector {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = total;
    let mut remaining_mass: f64 = probs.iter().sum();
    let last = probs.len() - 1;
    for (i, &pr) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let cond = if remaining_mass > 0.0 { (pr / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = binomial(remaining, cond, rng);
        counts[i] = x;
        remaining -= x;
        remaining_mass -= pr;
    }
    // Trailing zero-mass buckets must not absorb the remainder.
    if remaining > 0 && probs[last] == 0.0 {
        if let Some(j) = probs.iter().rposition(|&x| x > 0.0) {
            counts[last] -= remaining;
            counts[j] += remaining;
        }
    }
    CountVector::from_counts(counts)
}

/// `Multinom(total, (1/k, …, 1/k))`.
pub fn multinomial_split<R: Rng + ?Sized>(total: u64, parts: usize, rng: &mut R) -> Result<Vec<u64>> {
    if parts == 0 {
        return Err(invalid("parts", "need at least one part"));
    }
    let probs = vec![1.0 / parts as f64; parts];
    Ok(multinomial(&probs, total, rng).into_inner())
}

/// Sorted indices `i < len` for which an independent `Bern(prob)` fired,
/// generated by geometric skipping.
pub fn bernoulli_indices<R: Rng + ?Sized>(len: usize, prob: f64, rng: &mut R) -> Vec<usize> {
    if prob <= 0.0 || len == 0 {
        return Vec::new();
    }
    if prob >= 1.0 {
        return (0..len).collect();
    }
    let log_q = (1.0 - prob).ln();
    let mut out = Vec::new();
    let mut next = 0usize;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (len - next) as f64 {
            break;
        }
        let idx = next + skip as usize;
        out.push(idx);
        next = idx + 1;
        if next >= len {
            break;
        }
    }
    out
}

/// Anything that yields i.i.d. bucket indices over `[n]`.
pub trait SampleSource: Sync {
    fn domain_size(&self) -> usize;

    fn draw(&self, rng: &mut dyn RngCore) -> Result<usize>;

    /// Counts of `k` fresh draws.
    fn draw_counts(&self, k: u64, rng: &mut dyn RngCore) -> Result<CountVector> {
        let mut counts = vec![0u64; self.domain_size()];
        for _ in 0..k {
            counts[self.draw(rng)?] += 1;
        }
        Ok(CountVector::from_counts(counts))
    }
}

/// Sampler for a normalized distribution.
#[derive(Debug, Clone)]
pub struct DistributionSampler {
    dist: NonNegativeMeasure,
    alias: WeightedAliasIndex<f64>,
}

impl DistributionSampler {
    /// Samples from `p / ‖p‖₁`.
    pub fn new(p: &NonNegativeMeasure) -> Result<Self> {
        let dist = p.normalized()?;
        let alias = WeightedAliasIndex::new(dist.masses().to_vec())
            .map_err(|e| invalid("masses", format!("alias table: {e}")))?;
        Ok(DistributionSampler { dist, alias })
    }

    pub fn distribution(&self) -> &NonNegativeMeasure {
        &self.dist
    }
}

impl SampleSource for DistributionSampler {
    fn domain_size(&self) -> usize {
        self.dist.domain_size()
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.alias.sample(rng))
    }

    fn draw_counts(&self, k: u64, rng: &mut dyn RngCore) -> Result<CountVector> {
        Ok(multinomial(self.dist.masses(), k, rng))
    }
}

/// Anything that yields i.i.d. samples over `[n1] × [n2]`.
pub trait PairSource: Sync {
    fn shape(&self) -> (usize, usize);

    fn draw_pair(&self, rng: &mut dyn RngCore) -> Result<(usize, usize)>;

    fn draw_many(&self, k: usize, rng: &mut dyn RngCore) -> Result<Vec<(usize, usize)>> {
        (0..k).map(|_| self.draw_pair(rng)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PairSampler {
    rows: usize,
    cols: usize,
    alias: WeightedAliasIndex<f64>,
}

impl PairSampler {
    pub fn new(p: &Measure2d) -> Result<Self> {
        let total = p.total_mass();
        if total <= 0.0 {
            return Err(invalid("masses", "zero measure"));
        }
        let w: Vec<f64> = p.masses().iter().map(|x| x / total).collect();
        let alias = WeightedAliasIndex::new(w).map_err(|e| invalid("masses", format!("alias table: {e}")))?;
        Ok(PairSampler {
            rows: p.rows(),
            cols: p.cols(),
            alias,
        })
    }
}

impl PairSource for PairSampler {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn draw_pair(&self, rng: &mut dyn RngCore) -> Result<(usize, usize)> {
        let k = self.alias.sample(rng);
        Ok((k / self.cols, k % self.cols))
    }
}

/// One sample from the product of marginals of `p`: the row of one draw
/// spliced with the column of an independent second draw.
pub fn product_of_marginals_sample(p: &dyn PairSource, rng: &mut dyn RngCore) -> Result<(usize, usize)> {
    let (r1, _) = p.draw_pair(rng)?;
    let (_, c2) = p.draw_pair(rng)?;
    Ok((r1, c2))
}

/// Replays a fixed list of samples in order, failing once exhausted.
#[derive(Debug)]
pub struct ReplaySource<T> {
    samples: Vec<T>,
    size: (usize, usize),
    cursor: std::sync::atomic::AtomicUsize,
}

impl ReplaySource<usize> {
    pub fn new(n: usize, samples: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = samples.iter().find(|&&s| s >= n) {
            return Err(Error::OutOfDomain { value: bad, size: n });
        }
        Ok(ReplaySource {
            samples,
            size: (n, 1),
            cursor: Default::default(),
        })
    }
}

impl ReplaySource<(usize, usize)> {
    pub fn new_pairs(rows: usize, cols: usize, samples: Vec<(usize, usize)>) -> Result<Self> {
        for &(r, c) in &samples {
            if r >= rows {
                return Err(Error::OutOfDomain { value: r, size: rows });
            }
            if c >= cols {
                return Err(Error::OutOfDomain { value: c, size: cols });
            }
        }
        Ok(ReplaySource {
            samples,
            size: (rows, cols),
            cursor: Default::default(),
        })
    }
}

impl<T: Copy> ReplaySource<T> {
    fn next(&self) -> Result<T> {
        let i = self.cursor.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.samples
            .get(i)
            .copied()
            .ok_or(Error::SourceExhausted { drawn: self.samples.len() })
    }

    pub fn consumed(&self) -> usize {
        self.cursor.load(std::sync::atomic::Ordering::Relaxed).min(self.samples.len())
    }
}

impl SampleSource for ReplaySource<usize> {
    fn domain_size(&self) -> usize {
        self.size.0
    }

    fn draw(&self, _rng: &mut dyn RngCore) -> Result<usize> {
        self.next()
    }
}

impl PairSource for ReplaySource<(usize, usize)> {
    fn shape(&self) -> (usize, usize) {
        self.size
    }

    fn draw_pair(&self, _rng: &mut dyn RngCore) -> Result<(usize, usize)> {
        self.next()
    }
}
