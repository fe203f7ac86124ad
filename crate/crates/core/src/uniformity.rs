//! Replicable uniformity testing with the collision statistic
//! `Z = Σ_i ((T_i − m/n)² − T_i)` on Poissonized counts.
//!
//! Thresholds live in effect-size units `W = Z·n/m²`, where uniform inputs
//! give `E[W] = 0` with standard deviation `√(2n)/m` and inputs at ℓ1 distance
//! ε give `E[W] ≥ ε²`. The gap is fixed at the configured sample bound, so a
//! tester run with fewer samples keeps the same thresholds and only loses
//! concentration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closeness::{ceil_to_u64, check_positive, check_unit};
use crate::error::{invalid, Error, Result};
use crate::measure::CountVector;
use crate::rng::{Role, RngStream};
use crate::sampling::{poisson, SampleSource};
use crate::tester::{threshold_verdict, CountTester, ReplicableTester, Verdict};

pub const DEFAULT_C1_U: f64 = 2.0;
pub const DEFAULT_C2_U: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityConfig {
    pub n: usize,
    pub epsilon: f64,
    pub rho: f64,
    #[serde(default = "d_c1")]
    pub c1_u: f64,
    #[serde(default = "d_c2")]
    pub c2_u: f64,
    #[serde(default = "one")]
    pub m_scale: f64,
    /// Runs the tester with this many expected samples instead of the bound.
    #[serde(default)]
    pub sample_size_override: Option<u64>,
}

fn d_c1() -> f64 {
    DEFAULT_C1_U
}
fn d_c2() -> f64 {
    DEFAULT_C2_U
}
fn one() -> f64 {
    1.0
}

impl UniformityConfig {
    pub fn new(n: usize, epsilon: f64, rho: f64) -> Result<Self> {
        let cfg = UniformityConfig {
            n,
            epsilon,
            rho,
            c1_u: DEFAULT_C1_U,
            c2_u: DEFAULT_C2_U,
            m_scale: 1.0,
            sample_size_override: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_override(mut self, m: Option<u64>) -> Result<Self> {
        self.sample_size_override = m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        check_unit("epsilon", self.epsilon)?;
        check_unit("rho", self.rho)?;
        check_positive("c1_u", self.c1_u)?;
        check_positive("c2_u", self.c2_u)?;
        check_positive("m_scale", self.m_scale)?;
        if self.sample_size_override == Some(0) {
            return Err(invalid("sample_size_override", "must be positive"));
        }
        let (lo, hi) = self.gap()?;
        if lo >= hi {
            return Err(Error::Miscalibrated(format!(
                "completeness ceiling {lo:.5} is not below soundness floor {hi:.5}"
            )));
        }
        Ok(())
    }

    /// `ceil(m_scale · (√n ε^{-2} ρ^{-1} + ε^{-2} ρ^{-2}))`.
    pub fn sample_bound(&self) -> Result<u64> {
        uniformity_sample_size(self.n, self.epsilon, self.rho, self.m_scale)
    }

    /// Expected number of samples actually drawn.
    pub fn sample_size(&self) -> Result<u64> {
        match self.sample_size_override {
            Some(m) => Ok(m),
            None => self.sample_bound(),
        }
    }

    /// `(completeness ceiling, soundness floor)` in effect-size units.
    pub fn gap(&self) -> Result<(f64, f64)> {
        let m = self.sample_bound()? as f64;
        let n = self.n as f64;
        Ok((self.c1_u * (2.0 * n).sqrt() / m, self.c2_u * self.epsilon * self.epsilon))
    }

    /// The gap converted to raw statistic units at the sample size in use.
    pub fn raw_gap(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.gap()?;
        let s = self.raw_scale()?;
        Ok((lo * s, hi * s))
    }

    fn raw_scale(&self) -> Result<f64> {
        let m = self.sample_size()? as f64;
        Ok(m * m / self.n as f64)
    }

    /// Threshold in raw units: `lo + r0·(hi − lo)` with `r0 ~ U(¼, ¾)`.
    pub fn draw_threshold(&self, internal: &RngStream) -> Result<f64> {
        let (lo, hi) = self.raw_gap()?;
        let r0: f64 = internal.derive(Role::Threshold).rng().random_range(0.25..0.75);
        Ok(lo + r0 * (hi - lo))
    }
}

pub fn uniformity_sample_size(n: usize, epsilon: f64, rho: f64, m_scale: f64) -> Result<u64> {
    let e2 = epsilon * epsilon;
    ceil_to_u64(m_scale * ((n as f64).sqrt() / (e2 * rho) + 1.0 / (e2 * rho * rho)))
}

/// `Σ_i ((T_i − m/n)² − T_i)`.
pub fn uniformity_statistic(t: &CountVector, m: f64) -> f64 {
    let mean = m / t.len() as f64;
    t.counts()
        .iter()
        .map(|&c| {
            let c = c as f64;
            (c - mean) * (c - mean) - c
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityOutcome {
    pub verdict: Verdict,
    pub z: f64,
    pub threshold: f64,
    pub m: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct UniformityTester(pub UniformityConfig);

impl UniformityTester {
    pub fn evaluate(&self, counts: &CountVector, internal: &RngStream) -> Result<UniformityOutcome> {
        let cfg = &self.0;
        if counts.len() != cfg.n {
            return Err(Error::LengthMismatch {
                expected: cfg.n,
                actual: counts.len(),
            });
        }
        let m = cfg.sample_size()?;
        let z = uniformity_statistic(counts, m as f64);
        let threshold = cfg.draw_threshold(internal)?;
        Ok(UniformityOutcome {
            verdict: threshold_verdict(z, threshold),
            z,
            threshold,
            m,
        })
    }
}

impl CountTester for UniformityTester {
    fn decide(&self, counts: &CountVector, internal: &RngStream) -> Result<Verdict> {
        Ok(self.evaluate(counts, internal)?.verdict)
    }
}

/// Draws `Poi(m)` samples from `sampler` and tests their counts.
pub fn rep_uniformity_test(
    sampler: &dyn SampleSource,
    config: &UniformityConfig,
    internal: &RngStream,
    samples: &RngStream,
) -> Result<UniformityOutcome> {
    let m = config.sample_size()?;
    let mut r = samples.derive(Role::Sample1).rng();
    let k = poisson(m as f64, &mut r);
    let counts = sampler.draw_counts(k, &mut r)?;
    UniformityTester(*config).evaluate(&counts, internal)
}

impl<S: SampleSource> ReplicableTester<S> for UniformityTester {
    fn run(&self, input: &S, internal: &RngStream, samples: &RngStream) -> Result<Verdict> {
        Ok(rep_uniformity_test(input, &self.0, internal, samples)?.verdict)
    }
}
