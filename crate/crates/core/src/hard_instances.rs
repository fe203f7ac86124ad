//! Random hard instances for uniformity (`M_ξ`, `H_U`) and closeness
//! (`N_ξ`, `H_C`). Every bucket is generated independently.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::NonNegativeMeasure;
use crate::rng::RngStream;

fn check_eps_xi(epsilon: f64, xi: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid("epsilon", format!("{epsilon} not in [0, 1)")));
    }
    if !(0.0..=epsilon).contains(&xi) {
        return Err(invalid("xi", format!("{xi} not in [0, {epsilon}]")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityHardParams {
    pub n: usize,
    pub epsilon: f64,
    pub xi: f64,
}

impl UniformityHardParams {
    pub fn new(n: usize, epsilon: f64, xi: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        check_eps_xi(epsilon, xi)?;
        Ok(UniformityHardParams { n, epsilon, xi })
    }

    /// The two masses a bucket can take, heavy first.
    pub fn support(&self) -> (f64, f64) {
        let n = self.n as f64;
        ((1.0 + self.xi) / n, (1.0 - self.xi) / n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityHardInstance {
    pub params: UniformityHardParams,
    pub p: NonNegativeMeasure,
}

/// One draw of `M_ξ`: each bucket is `(1 ± ξ)/n` with probability ½.
pub fn draw_uniformity_hard(params: &UniformityHardParams, rng: &RngStream) -> NonNegativeMeasure {
    let mut r = rng.rng();
    let (hi, lo) = params.support();
    let masses = (0..params.n).map(|_| if r.random::<bool>() { hi } else { lo }).collect();
    NonNegativeMeasure::new(masses).expect("hard-instance masses are non-negative")
}

/// One draw of `H_U`: `ξ ~ U[0, ε]`, then `p ~ M_ξ`.
pub fn draw_meta_hu(n: usize, epsilon: f64, rng: &RngStream) -> Result<UniformityHardInstance> {
    let xi = if epsilon > 0.0 {
        rng.derive(crate::rng::Role::Threshold).rng().random_range(0.0..=epsilon)
    } else {
        0.0
    };
    let params = UniformityHardParams::new(n, epsilon, xi)?;
    let p = draw_uniformity_hard(&params, &rng.derive(crate::rng::Role::Instance));
    Ok(UniformityHardInstance { params, p })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessHardParams {
    pub n: usize,
    /// Sample budget the construction targets; heavy buckets carry `(1-ε)/m`.
    pub m: usize,
    pub epsilon: f64,
    pub xi: f64,
}

/// Which of the three per-bucket branches a bucket took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosenessBranch {
    Heavy,
    LightPlus,
    LightMinus,
}

impl ClosenessHardParams {
    pub fn new(n: usize, m: usize, epsilon: f64, xi: f64) -> Result<Self> {
        if m == 0 || 2 * m >= n {
            return Err(invalid("m", format!("need 1 <= m < n/2, got m={m}, n={n}")));
        }
        check_eps_xi(epsilon, xi)?;
        Ok(ClosenessHardParams { n, m, epsilon, xi })
    }

    pub fn heavy_probability(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn light_probability(&self) -> f64 {
        (self.n - self.m) as f64 / (2.0 * self.n as f64)
    }

    /// `(p_i, q_i)` for a branch.
    pub fn branch_masses(&self, branch: ClosenessBranch) -> (f64, f64) {
        let light = 2.0 * (self.n - self.m) as f64;
        let plus = (2.0 * self.epsilon + self.xi) / light;
        let minus = (2.0 * self.epsilon - self.xi) / light;
        match branch {
            ClosenessBranch::Heavy => {
                let h = (1.0 - self.epsilon) / self.m as f64;
                (h, h)
            }
            ClosenessBranch::LightPlus => (plus, minus),
            ClosenessBranch::LightMinus => (minus, plus),
        }
    }

    /// Branches with their probabilities.
    pub fn branches(&self) -> [(ClosenessBranch, f64); 3] {
        [
            (ClosenessBranch::Heavy, self.heavy_probability()),
            (ClosenessBranch::LightPlus, self.light_probability()),
            (ClosenessBranch::LightMinus, self.light_probability()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessHardInstance {
    pub params: ClosenessHardParams,
    pub p: NonNegativeMeasure,
    pub q: NonNegativeMeasure,
}

/// One draw of `N_ξ`.
pub fn draw_closeness_hard(params: &ClosenessHardParams, rng: &RngStream) -> (NonNegativeMeasure, NonNegativeMeasure) {
    let mut r = rng.rng();
    let heavy = params.heavy_probability();
    let mut p = Vec::with_capacity(params.n);
    let mut q = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let u: f64 = r.random();
        let branch = if u < heavy {
            ClosenessBranch::Heavy
        } else if u < heavy + params.light_probability() {
            ClosenessBranch::LightPlus
        } else {
            ClosenessBranch::LightMinus
        };
        let (a, b) = params.branch_masses(branch);
        p.push(a);
        q.push(b);
    }
    (
        NonNegativeMeasure::new(p).expect("non-negative"),
        NonNegativeMeasure::new(q).expect("non-negative"),
    )
}

/// One draw of `H_C`: `ξ ~ U[0, ε]`, then `(p, q) ~ N_ξ`.
pub fn draw_meta_hc(n: usize, m: usize, epsilon: f64, rng: &RngStream) -> Result<ClosenessHardInstance> {
    let xi = if epsilon > 0.0 {
        rng.derive(crate::rng::Role::Threshold).rng().random_range(0.0..=epsilon)
    } else {
        0.0
    };
    let params = ClosenessHardParams::new(n, m, epsilon, xi)?;
    let (p, q) = draw_closeness_hard(&params, &rng.derive(crate::rng::Role::Instance));
    Ok(ClosenessHardInstance { params, p, q })
}
