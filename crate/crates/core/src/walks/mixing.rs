use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A reversible chain on `0..size` with its stationary law.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    p: DMatrix<f64>,
    pi: DVector<f64>,
}

impl FiniteKernel {
    /// Checks that rows are distributions and that `π` is stationary.
    pub fn new(p: DMatrix<f64>, pi: DVector<f64>) -> Result<Self> {
        let s = p.nrows();
        if p.ncols() != s || pi.len() != s || s == 0 {
            return Err(invalid("p", "need a non-empty square matrix matching pi"));
        }
        for i in 0..s {
            let row: f64 = p.row(i).sum();
            if (row - 1.0).abs() > 1e-9 || p.row(i).iter().any(|&x| x < 0.0) {
                return Err(invalid("p", format!("row {i} sums to {row}")));
            }
        }
        let drift = (pi.transpose() * &p - pi.transpose()).abs().max();
        if (pi.sum() - 1.0).abs() > 1e-9 || drift > 1e-9 {
            return Err(invalid("pi", format!("not stationary (drift {drift:e})")));
        }
        Ok(FiniteKernel { p, pi })
    }

    /// Solves `πP = π` for a row-stochastic `P`.
    pub fn from_matrix(p: DMatrix<f64>) -> Result<Self> {
        let s = p.nrows();
        let mut a = p.transpose() - DMatrix::identity(s, s);
        for j in 0..s {
            a[(s - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(s);
        b[s - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| invalid("p", "stationary law is not unique"))?;
        FiniteKernel::new(p, pi)
    }

    /// `P(i, ·) = J(i, ·)/Σ_k J(i, k)` and `π(i) ∝ Σ_k J(i, k)` for a symmetric
    /// non-negative `J` given row-major.
    pub fn from_symmetric_joint(size: usize, joint: &[f64]) -> Result<Self> {
        let j = DMatrix::from_row_slice(size, size, joint);
        let rows: Vec<f64> = (0..size).map(|i| j.row(i).sum()).collect();
        if rows.iter().any(|&r| !(r > 0.0)) {
            return Err(invalid("joint", "every row needs positive mass"));
        }
        let total: f64 = rows.iter().sum();
        let mut p = j;
        for (i, &r) in rows.iter().enumerate() {
            p.row_mut(i).scale_mut(1.0 / r);
        }
        Ok(FiniteKernel {
            p,
            pi: DVector::from_iterator(size, rows.iter().map(|r| r / total)),
        })
    }

    pub fn size(&self) -> usize {
        self.pi.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.pi
    }

    /// The chain that steps every factor independently. The last factor
    /// varies fastest in the state order.
    pub fn tensor(&self, other: &FiniteKernel) -> FiniteKernel {
        FiniteKernel {
            p: self.p.kronecker(&other.p),
            pi: self.pi.kronecker(&other.pi),
        }
    }

    /// Eigenvalues of the reversible kernel via `D^{1/2} P D^{-1/2}`, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s = self.size();
        let d: Vec<f64> = self.pi.iter().map(|x| x.sqrt()).collect();
        let sym = DMatrix::from_fn(s, s, |i, j| {
            let a = d[i] * self.p[(i, j)] / d[j];
            let b = d[j] * self.p[(j, i)] / d[i];
            0.5 * (a + b)
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `1 − λ_*` where `λ_*` is the largest eigenvalue modulus other than
    /// the top eigenvalue.
    pub fn absolute_gap(&self) -> f64 {
        let ev = self.eigenvalues();
        let second = ev.iter().skip(1).map(|x| x.abs()).fold(0.0, f64::max);
        1.0 - second
    }

    pub fn point_masses(&self) -> Vec<(String, Vec<f64>)> {
        (0..self.size())
            .map(|i| {
                let mut v = vec![0.0; self.size()];
                v[i] = 1.0;
                (format!("state-{i}"), v)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// `Σ_j |μ_j − π_j|`
    #[default]
    L1,
    /// Half of [`DistanceMetric::L1`].
    Tv,
}

impl DistanceMetric {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        match self {
            DistanceMetric::L1 => l1,
            DistanceMetric::Tv => 0.5 * l1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCurve {
    pub label: String,
    /// Distance to `π` at `t = 0, 1, …`.
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub delta: f64,
    pub metric: DistanceMetric,
    /// `(t, max over initial laws of the distance to π)`.
    pub tv_curve: Vec<(usize, f64)>,
    /// Smallest `t` after which the whole curve stays below `δ`.
    pub tau_delta: Option<usize>,
    pub gap_estimate: f64,
    pub curves: Vec<InitialCurve>,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    label: &'a str,
    t: usize,
    distance: f64,
}

impl MixingReport {
    /// First `t` from which every later distance is below `delta`, within the
    /// computed horizon.
    pub fn tau(curve: &[f64], delta: f64) -> Option<usize> {
        let mut tau = None;
        for (t, &d) in curve.iter().enumerate().rev() {
            if d < delta {
                tau = Some(t);
            } else {
                break;
            }
        }
        tau
    }

    pub fn tau_for(&self, delta: f64) -> Option<usize> {
        let worst: Vec<f64> = self.tv_curve.iter().map(|p| p.1).collect();
        Self::tau(&worst, delta)
    }

    /// Crossing time with log-linear interpolation between integer steps.
    pub fn crossing_time(&self, delta: f64) -> Option<f64> {
        let c: Vec<f64> = self.tv_curve.iter().map(|p| p.1).collect();
        let t = Self::tau(&c, delta)?;
        if t == 0 {
            return Some(0.0);
        }
        let (hi, lo) = (c[t - 1], c[t]);
        if lo <= 0.0 {
            return Some(t as f64);
        }
        Some(t as f64 - 1.0 + (hi / delta).ln() / (hi / lo).ln())
    }

    /// One row per `(initial law, t)`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidParameter {
            name: "csv",
            reason: e.to_string(),
        };
        for c in &self.curves {
            for (t, &distance) in c.distances.iter().enumerate() {
                w.serialize(CurveRow {
                    label: &c.label,
                    t,
                    distance,
                })
                .map_err(io)?;
            }
        }
        for &(t, distance) in &self.tv_curve {
            w.serialize(CurveRow { label: "worst", t, distance }).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| invalid("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Distances `‖μ P^t − π‖` for `t ≤ horizon` from each initial law, by exact
/// repeated multiplication with the dense kernel.
pub fn estimate_mixing(
    kernel: &FiniteKernel,
    initials: &[(String, Vec<f64>)],
    delta: f64,
    horizon: usize,
    metric: DistanceMetric,
) -> Result<MixingReport> {
    if initials.is_empty() {
        return Err(invalid("initials", "need at least one initial law"));
    }
    let s = kernel.size();
    let pi: Vec<f64> = kernel.pi.iter().copied().collect();
    let mut mu = DMatrix::zeros(initials.len(), s);
    for (i, (label, v)) in initials.iter().enumerate() {
        if v.len() != s {
            return Err(Error::LengthMismatch {
                expected: s,
                actual: v.len(),
            });
        }
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("initials", format!("{label} is not a distribution")));
        }
        mu.row_mut(i).copy_from_slice(v);
    }
    let mut curves: Vec<InitialCurve> = initials
        .iter()
        .map(|(label, _)| InitialCurve {
            label: label.clone(),
            distances: Vec::with_capacity(horizon + 1),
        })
        .collect();
    for t in 0..=horizon {
        if t > 0 {
            mu = &mu * &kernel.p;
        }
        for (i, c) in curves.iter_mut().enumerate() {
            let row: Vec<f64> = mu.row(i).iter().copied().collect();
            c.distances.push(metric.eval(&row, &pi));
        }
    }
    let tv_curve: Vec<(usize, f64)> = (0..=horizon)
        .map(|t| (t, curves.iter().map(|c| c.distances[t]).fold(0.0, f64::max)))
        .collect();
    let worst: Vec<f64> = tv_curve.iter().map(|p| p.1).collect();
    Ok(MixingReport {
        delta,
        metric,
        tau_delta: MixingReport::tau(&worst, delta),
        tv_curve,
        gap_estimate: kernel.absolute_gap(),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::kernel::CoordKernel;

    fn toy() -> FiniteKernel {
        FiniteKernel::from_matrix(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap()
    }

    #[test]
    fn toy_chain_decays_at_second_eigenvalue() {
        let k = toy();
        assert!((k.stationary()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((k.absolute_gap() - 0.3).abs() < 1e-12);
        let report = estimate_mixing(&k, &k.point_masses(), 0.01, 40, DistanceMetric::Tv).unwrap();
        for c in &report.curves {
            for t in 1..20 {
                assert!((c.distances[t] / c.distances[t - 1] - 0.7).abs() < 1e-9);
            }
            let tau = MixingReport::tau(&c.distances, 0.01).unwrap();
            let closed = ((c.distances[0] / 0.01).ln() / (1.0f64 / 0.7).ln()).ceil() as usize;
            assert_eq!(tau, closed);
        }
    }

    #[test]
    fn xi_zero_mixes_in_one_step() {
        let k = CoordKernel::new(100, 1000, 0.0).unwrap();
        let fk = k.truncated().unwrap();
        let rep = estimate_mixing(&fk, &fk.point_masses(), 1e-6, 5, DistanceMetric::L1).unwrap();
        assert_eq!(rep.tau_delta, Some(1));
        for delta in [0.5, 1e-3, 1e-12] {
            assert_eq!(rep.tau_for(delta), Some(1));
        }
    }

    #[test]
    fn tensor_stationary_and_tau() {
        let k = toy();
        let kk = k.tensor(&k);
        assert_eq!(kk.size(), 4);
        let fk = FiniteKernel::new(kk.matrix().clone(), kk.stationary().clone()).unwrap();
        assert!((fk.absolute_gap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn report_serializes() {
        let k = toy();
        let rep = estimate_mixing(&k, &k.point_masses(), 0.1, 3, DistanceMetric::L1).unwrap();
        let csv = rep.to_csv().unwrap();
        assert!(csv.starts_with("label,t,distance"));
        assert_eq!(csv.lines().count(), 1 + 3 * 4);
        let back: MixingReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back.tau_delta, rep.tau_delta);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FiniteKernel::from_matrix(DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.2, 0.8])).is_err());
        let k = toy();
        assert!(estimate_mixing(&k, &[("x".into(), vec![0.5, 0.1])], 0.1, 3, DistanceMetric::L1).is_err());
        assert!(estimate_mixing(&k, &[], 0.1, 3, DistanceMetric::L1).is_err());
    }
}
