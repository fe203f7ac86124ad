//! Small statistical helpers shared by tests and experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and unbiased sample variance. Variance is 0 for fewer than two values.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    let (_, v) = mean_var(xs);
    (v / xs.len() as f64).sqrt()
}

/// Standard error of a Bernoulli rate estimated from `n` trials.
pub fn rate_std_error(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

/// Median; averages the middle pair for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson goodness-of-fit p-value. Adjacent cells are pooled left to right
/// until each pooled cell expects at least `min_expected`; a short final cell
/// is merged into its predecessor.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob as f64;
        e += ex;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Two-sample chi-square homogeneity p-value on paired histograms with equal
/// totals, pooling cells whose combined count is below `min_count`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_count: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut x, mut y) = (0.0, 0.0);
    for (&ai, &bi) in a.iter().zip(b) {
        x += ai as f64;
        y += bi as f64;
        if x + y >= min_count {
            cells.push((x, y));
            x = 0.0;
            y = 0.0;
        }
    }
    if x + y > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += x;
                last.1 += y;
            }
            None => cells.push((x, y)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let na: f64 = cells.iter().map(|c| c.0).sum();
    let nb: f64 = cells.iter().map(|c| c.1).sum();
    let total = na + nb;
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dist = ChiSquared::new((cells.len() - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}
