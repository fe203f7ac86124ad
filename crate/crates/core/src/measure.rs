//! Non-negative measures over finite domains and their sample counts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on `|total_mass - 1|` for inputs that must be distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Masses over `[n]`. The total need not be one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NonNegativeMeasure {
    masses: Vec<f64>,
}

impl NonNegativeMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(invalid("masses", "domain must have at least one bucket"));
        }
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidMass { index, value });
            }
        }
        Ok(NonNegativeMeasure { masses })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Point mass of weight one on `bucket`.
    pub fn point_mass(n: usize, bucket: usize) -> Result<Self> {
        if bucket >= n {
            return Err(Error::OutOfDomain { value: bucket, size: n });
        }
        let mut masses = vec![0.0; n];
        masses[bucket] = 1.0;
        Self::new(masses)
    }

    /// Zipf law with exponent `s`, normalized.
    pub fn zipf(n: usize, s: f64) -> Result<Self> {
        let raw: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-s)).collect();
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|x| x / total).collect())
    }

    pub fn domain_size(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized {
                total,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(())
    }

    /// `p / ‖p‖₁`. Fails on the zero measure.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(invalid("masses", "cannot normalize the zero measure"));
        }
        Self::new(self.masses.iter().map(|m| m / total).collect())
    }

    /// `p ⊕ q` over `[2n]`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut masses = self.masses.clone();
        masses.extend_from_slice(&other.masses);
        NonNegativeMeasure { masses }
    }
}

impl TryFrom<Vec<f64>> for NonNegativeMeasure {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NonNegativeMeasure> for Vec<f64> {
    fn from(m: NonNegativeMeasure) -> Vec<f64> {
        m.masses
    }
}

/// Masses over `[n1] × [n2]`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure2d {
    rows: usize,
    cols: usize,
    masses: Vec<f64>,
}

impl Measure2d {
    pub fn new(rows: usize, cols: usize, masses: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("shape", "both sides must be positive"));
        }
        if masses.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: masses.len(),
            });
        }
        NonNegativeMeasure::new(masses.clone())?;
        Ok(Measure2d { rows, cols, masses })
    }

    pub fn uniform(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![1.0 / (rows * cols) as f64; rows * cols])
    }

    /// Product measure `row ⊗ col`.
    pub fn product(row: &NonNegativeMeasure, col: &NonNegativeMeasure) -> Result<Self> {
        let masses = row
            .masses()
            .iter()
            .flat_map(|&r| col.masses().iter().map(move |&c| r * c))
            .collect();
        Self::new(row.domain_size(), col.domain_size(), masses)
    }

    /// Uniform on the diagonal of `[n] × [n]`.
    pub fn diagonal(n: usize) -> Result<Self> {
        let mut masses = vec![0.0; n * n];
        for i in 0..n {
            masses[i * n + i] = 1.0 / n as f64;
        }
        Self::new(n, n, masses)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mass(&self, r: usize, c: usize) -> f64 {
        self.masses[r * self.cols + c]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn row_marginal(&self) -> NonNegativeMeasure {
        let m = (0..self.rows)
            .map(|r| self.masses[r * self.cols..(r + 1) * self.cols].iter().sum())
            .collect();
        NonNegativeMeasure { masses: m }
    }

    pub fn col_marginal(&self) -> NonNegativeMeasure {
        let m = (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.mass(r, c)).sum())
            .collect();
        NonNegativeMeasure { masses: m }
    }

    /// Product of the two marginals.
    pub fn product_of_marginals(&self) -> Self {
        Self::product(&self.row_marginal(), &self.col_marginal()).expect("marginals share a valid shape")
    }

    /// Flattened view as a 1D measure over `[n1·n2]`.
    pub fn as_flat(&self) -> NonNegativeMeasure {
        NonNegativeMeasure {
            masses: self.masses.clone(),
        }
    }
}

/// Per-bucket sample frequencies.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn zeros(n: usize) -> Self {
        CountVector { counts: vec![0; n] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        CountVector { counts }
    }

    /// Histogram of bucket indices over `[n]`.
    pub fn from_samples(n: usize, samples: &[usize]) -> Result<Self> {
        let mut counts = vec![0u64; n];
        for &s in samples {
            if s >= n {
                return Err(Error::OutOfDomain { value: s, size: n });
            }
            counts[s] += 1;
        }
        Ok(CountVector { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.counts
    }

    /// `T_p ⊕ T_q`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut counts = self.counts.clone();
        counts.extend_from_slice(&other.counts);
        CountVector { counts }
    }
}

impl std::ops::Index<usize> for CountVector {
    type Output = u64;
    fn index(&self, i: usize) -> &u64 {
        &self.counts[i]
    }
}

/// `Σ |p_i − q_i|`.
pub fn l1_distance(p: &NonNegativeMeasure, q: &NonNegativeMeasure) -> Result<f64> {
    if p.domain_size() != q.domain_size() {
        return Err(Error::DomainMismatch {
            left: p.domain_size(),
            right: q.domain_size(),
        });
    }
    Ok(p.masses().iter().zip(q.masses()).map(|(a, b)| (a - b).abs()).sum())
}

/// Half the l1 distance.
pub fn tv_distance(p: &NonNegativeMeasure, q: &NonNegativeMeasure) -> Result<f64> {
    Ok(0.5 * l1_distance(p, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(matches!(
            NonNegativeMeasure::new(vec![0.5, -0.1]),
            Err(Error::InvalidMass { index: 1, .. })
        ));
        assert!(NonNegativeMeasure::new(vec![f64::NAN]).is_err());
        assert!(NonNegativeMeasure::new(vec![]).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = NonNegativeMeasure::new(vec![0.5, 0.5]).unwrap();
        let q = NonNegativeMeasure::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        let a = NonNegativeMeasure::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = NonNegativeMeasure::new(vec![0.0, 0.0, 0.3, 0.7]).unwrap();
        assert!((tv_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            tv_distance(&p, &a),
            Err(Error::DomainMismatch { left: 2, right: 4 })
        ));
    }

    #[test]
    fn marginals_are_row_and_column_sums() {
        let m = Measure2d::new(2, 3, vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.3]).unwrap();
        let r = m.row_marginal();
        let c = m.col_marginal();
        assert!((r.mass(0) - 0.3).abs() < 1e-15 && (r.mass(1) - 0.7).abs() < 1e-15);
        assert!((c.mass(0) - 0.4).abs() < 1e-15);
        assert!((c.mass(1) - 0.3).abs() < 1e-15);
        assert!((c.mass(2) - 0.3).abs() < 1e-15);
        let q = m.product_of_marginals();
        assert!((q.mass(1, 2) - 0.7 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn diagonal_is_far_from_its_product() {
        let d = Measure2d::diagonal(20).unwrap();
        let q = d.product_of_marginals();
        let tv = tv_distance(&d.as_flat(), &q.as_flat()).unwrap();
        assert!((tv - 0.95).abs() < 1e-12, "{tv}");
    }

    #[test]
    fn serde_validates() {
        let ok: NonNegativeMeasure = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(ok.domain_size(), 2);
        assert!(serde_json::from_str::<NonNegativeMeasure>("[0.25,-1.0]").is_err());
    }
}
