//! Replicable closeness testing: split `4m` samples four ways, compute the
//! cross-minus-self statistic `Z`, and compare it to a random threshold in the
//! gap between `C1·√m` and the soundness floor `R`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::CountVector;
use crate::rng::{Role, RngStream};
use crate::sampling::{multinomial_split, SampleSource};
use crate::tester::{threshold_verdict, ReplicableTester, Verdict};

pub const DEFAULT_C1: f64 = 2.0;
pub const DEFAULT_C2: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessConfig {
    pub n: usize,
    pub epsilon: f64,
    pub rho: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default = "one")]
    pub m_scale: f64,
}

fn default_c1() -> f64 {
    DEFAULT_C1
}
fn default_c2() -> f64 {
    DEFAULT_C2
}
fn one() -> f64 {
    1.0
}

pub(crate) fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} not in (0, 1)")))
    }
}

pub(crate) fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} must be positive and finite")))
    }
}

pub(crate) fn ceil_to_u64(value: f64) -> Result<u64> {
    if !value.is_finite() || value >= u64::MAX as f64 {
        return Err(Error::SampleSizeOverflow { value });
    }
    Ok(value.ceil().max(0.0) as u64)
}

impl ClosenessConfig {
    /// Config with the default constants, validated.
    pub fn new(n: usize, epsilon: f64, rho: f64) -> Result<Self> {
        let cfg = ClosenessConfig {
            n,
            epsilon,
            rho,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            m_scale: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_constants(mut self, c1: f64, c2: f64) -> Result<Self> {
        self.c1 = c1;
        self.c2 = c2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_m_scale(mut self, m_scale: f64) -> Result<Self> {
        self.m_scale = m_scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        check_unit("epsilon", self.epsilon)?;
        check_unit("rho", self.rho)?;
        check_positive("c1", self.c1)?;
        check_positive("c2", self.c2)?;
        check_positive("m_scale", self.m_scale)?;
        let m = self.sample_size()?;
        let r = soundness_floor(m, self.n, self.epsilon, self.c2);
        let base = self.c1 * (m as f64).sqrt();
        if r < 8.0 * base {
            return Err(Error::Miscalibrated(format!(
                "R = {r:.3} is below 8·C1·√m = {:.3} at m = {m}",
                8.0 * base
            )));
        }
        Ok(())
    }

    pub fn sample_size(&self) -> Result<u64> {
        closeness_sample_size(self.n, self.epsilon, self.rho, self.m_scale)
    }
}

/// `ceil(m_scale · (n^{2/3}ρ^{-2/3}ε^{-4/3} + √n ε^{-2}ρ^{-1} + ρ^{-2}ε^{-2}))`.
pub fn closeness_sample_size(n: usize, epsilon: f64, rho: f64, m_scale: f64) -> Result<u64> {
    let n = n as f64;
    let bound = n.powf(2.0 / 3.0) * rho.powf(-2.0 / 3.0) * epsilon.powf(-4.0 / 3.0)
        + n.sqrt() / (epsilon * epsilon * rho)
        + 1.0 / (rho * rho * epsilon * epsilon);
    ceil_to_u64(m_scale * bound)
}

/// `Σ_i |X_i−Y_i| + |X'_i−Y'_i| − |X_i−X'_i| − |Y_i−Y'_i|`.
pub fn closeness_statistic(x: &CountVector, x2: &CountVector, y: &CountVector, y2: &CountVector) -> Result<i64> {
    let n = x.len();
    for v in [x2, y, y2] {
        if v.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: v.len(),
            });
        }
    }
    let d = |a: u64, b: u64| (a as i64 - b as i64).abs();
    let mut z = 0i64;
    for i in 0..n {
        let (a, a2, b, b2) = (x[i], x2[i], y[i], y2[i]);
        z += d(a, b) + d(a2, b2) - d(a, a2) - d(b, b2);
    }
    Ok(z)
}

/// `C2 · min(εm, m²ε²/n, m^{3/2}ε²/√n)`.
pub fn soundness_floor(m: u64, n: usize, epsilon: f64, c2: f64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let e2 = epsilon * epsilon;
    c2 * (epsilon * m).min(m * m * e2 / n).min(m.powf(1.5) * e2 / n.sqrt())
}

/// `C1√m + r0·(R − C1√m)` with `r0 ~ U(¼, ¾)`.
pub fn draw_threshold(m: u64, big_r: f64, c1: f64, rng: &RngStream) -> Result<f64> {
    let base = c1 * (m as f64).sqrt();
    if big_r <= base {
        return Err(Error::Miscalibrated(format!("R = {big_r} does not exceed C1·√m = {base}")));
    }
    let r0: f64 = rng.rng().random_range(0.25..0.75);
    Ok(base + r0 * (big_r - base))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessOutcome {
    pub verdict: Verdict,
    pub z: i64,
    pub threshold: f64,
    pub m: u64,
    pub soundness_floor: f64,
}

/// The four sample batches `(X, X', Y, Y')` the tester would see.
pub fn closeness_batches(
    p: &dyn SampleSource,
    q: &dyn SampleSource,
    m: u64,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<[CountVector; 4]> {
    if p.domain_size() != q.domain_size() {
        return Err(Error::DomainMismatch {
            left: p.domain_size(),
            right: q.domain_size(),
        });
    }
    let split = multinomial_split(4 * m, 4, &mut internal.derive(Role::Split).rng())?;
    let mut rp = samples.derive(Role::Sample1).rng();
    let mut rq = samples.derive(Role::Sample2).rng();
    Ok([
        p.draw_counts(split[0], &mut rp)?,
        p.draw_counts(split[1], &mut rp)?,
        q.draw_counts(split[2], &mut rq)?,
        q.draw_counts(split[3], &mut rq)?,
    ])
}

pub fn rep_closeness_test(
    p: &dyn SampleSource,
    q: &dyn SampleSource,
    config: &ClosenessConfig,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<ClosenessOutcome> {
    if p.domain_size() != config.n {
        return Err(Error::DomainMismatch {
            left: p.domain_size(),
            right: config.n,
        });
    }
    let m = config.sample_size()?;
    let [x, x2, y, y2] = closeness_batches(p, q, m, internal, samples)?;
    let z = closeness_statistic(&x, &x2, &y, &y2)?;
    let big_r = soundness_floor(m, config.n, config.epsilon, config.c2);
    let threshold = draw_threshold(m, big_r, config.c1, &internal.derive(Role::Threshold))?;
    Ok(ClosenessOutcome {
        verdict: threshold_verdict(z as f64, threshold),
        z,
        threshold,
        m,
        soundness_floor: big_r,
    })
}

/// Closeness tester over a pair of sources.
#[derive(Clone, Copy, Debug)]
pub struct ClosenessTester(pub ClosenessConfig);

impl<P: SampleSource, Q: SampleSource> ReplicableTester<(P, Q)> for ClosenessTester {
    fn run(&self, input: &(P, Q), internal: &RngStream, samples: &RngStream) -> Result<Verdict> {
        Ok(rep_closeness_test(&input.0, &input.1, &self.0, internal, samples)?.verdict)
    }
}
