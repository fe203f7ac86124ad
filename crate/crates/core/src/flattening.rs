//! Randomized flattening. A random subset of samples is set aside as
//! dividers; every remaining sample of element `x` is tagged with the number
//! of dividers of `x` that precede it in a random order, splitting heavy
//! elements into sub-bins.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlattenedSample {
    pub base: usize,
    pub sub: usize,
}

/// A 2D sample after flattening each axis separately. Two pairs collide only
/// if both flattened axes agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlattenedPair {
    pub row: FlattenedSample,
    pub col: FlattenedSample,
}

impl FlattenedPair {
    pub fn base(&self) -> (usize, usize) {
        (self.row.base, self.col.base)
    }
}

/// Divider flags `F` and an order `σ`, where `order[ℓ]` is the rank of sample `ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenAssignment {
    flags: Vec<bool>,
    order: Vec<usize>,
}

impl FlattenAssignment {
    pub fn new(flags: Vec<bool>, order: Vec<usize>) -> Result<Self> {
        if flags.len() != order.len() {
            return Err(Error::LengthMismatch {
                expected: flags.len(),
                actual: order.len(),
            });
        }
        let mut seen = vec![false; order.len()];
        for &o in &order {
            if o >= order.len() || std::mem::replace(&mut seen[o], true) {
                return Err(invalid("order", "not a permutation"));
            }
        }
        Ok(FlattenAssignment { flags, order })
    }

    /// `σ = identity`.
    pub fn in_order(flags: Vec<bool>) -> Self {
        let order = (0..flags.len()).collect();
        FlattenAssignment { flags, order }
    }

    /// `F ~ Bern(prob)^{⊗len}` with a uniform order.
    pub fn random<R: Rng + ?Sized>(len: usize, prob: f64, rng: &mut R) -> Self {
        let flags = (0..len).map(|_| rng.random_bool(prob)).collect();
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        FlattenAssignment { flags, order }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn divider_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Sub-bin index of every sample (dividers included), by rank order.
    fn sub_indices<T: Eq + Hash + Copy>(&self, samples: &[T]) -> Vec<usize> {
        let mut by_rank = vec![0usize; samples.len()];
        for (l, &o) in self.order.iter().enumerate() {
            by_rank[o] = l;
        }
        let mut seen: HashMap<T, usize> = HashMap::new();
        let mut sub = vec![0usize; samples.len()];
        for &l in &by_rank {
            let c = seen.entry(samples[l]).or_insert(0);
            sub[l] = *c;
            if self.flags[l] {
                *c += 1;
            }
        }
        sub
    }
}

/// The non-divider samples in input order, each tagged with its sub-bin.
pub fn flatten_1d(samples: &[usize], assignment: &FlattenAssignment) -> Result<Vec<FlattenedSample>> {
    if samples.len() != assignment.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            actual: assignment.len(),
        });
    }
    let sub = assignment.sub_indices(samples);
    Ok(samples
        .iter()
        .zip(&sub)
        .zip(assignment.flags())
        .filter(|(_, &f)| !f)
        .map(|((&base, &sub), _)| FlattenedSample { base, sub })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flattened2d {
    /// Samples with `F^x = F^y = 0`, in input order.
    pub samples: Vec<FlattenedPair>,
    /// Input positions of `samples`.
    pub kept: Vec<usize>,
    pub fx: FlattenAssignment,
    pub fy: FlattenAssignment,
}

/// Flattens rows with `F^x ~ Bern(α)` and columns with `F^y ~ Bern(β)`, using
/// independent orders per axis.
pub fn flatten_2d_with(samples: &[(usize, usize)], fx: FlattenAssignment, fy: FlattenAssignment) -> Result<Flattened2d> {
    for a in [&fx, &fy] {
        if a.len() != samples.len() {
            return Err(Error::LengthMismatch {
                expected: samples.len(),
                actual: a.len(),
            });
        }
    }
    let rows: Vec<usize> = samples.iter().map(|s| s.0).collect();
    let cols: Vec<usize> = samples.iter().map(|s| s.1).collect();
    let rsub = fx.sub_indices(&rows);
    let csub = fy.sub_indices(&cols);
    let mut out = Vec::new();
    let mut kept = Vec::new();
    for l in 0..samples.len() {
        if !fx.flags[l] && !fy.flags[l] {
            out.push(FlattenedPair {
                row: FlattenedSample { base: rows[l], sub: rsub[l] },
                col: FlattenedSample { base: cols[l], sub: csub[l] },
            });
            kept.push(l);
        }
    }
    Ok(Flattened2d {
        samples: out,
        kept,
        fx,
        fy,
    })
}

pub fn flatten_2d(samples: &[(usize, usize)], alpha: f64, beta: f64, rng: &RngStream) -> Result<Flattened2d> {
    for (name, x) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..1.0).contains(&x) {
            return Err(invalid(name, format!("{x} not in [0, 1)")));
        }
    }
    let mut r = rng.rng();
    let fx = FlattenAssignment::random(samples.len(), alpha, &mut r);
    let fy = FlattenAssignment::random(samples.len(), beta, &mut r);
    flatten_2d_with(samples, fx, fy)
}

/// A multiset as a sorted list of `(element, multiplicity)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiset<T> {
    entries: Vec<(T, usize)>,
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn entries(&self) -> &[(T, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn multiplicity(&self, x: &T) -> usize {
        self.entries
            .binary_search_by(|e| e.0.cmp(x))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut v: Vec<T> = iter.into_iter().collect();
        v.sort_unstable();
        let mut entries: Vec<(T, usize)> = Vec::new();
        for x in v {
            match entries.last_mut() {
                Some((last, c)) if *last == x => *c += 1,
                _ => entries.push((x, 1)),
            }
        }
        Multiset { entries }
    }
}

/// Number of samples that share their value with at least one other sample.
pub fn non_singleton_count<T: Ord + Clone>(samples: &[T]) -> usize {
    let ms: Multiset<T> = samples.iter().cloned().collect();
    ms.entries().iter().filter(|e| e.1 >= 2).map(|e| e.1).sum()
}

pub fn max_subbin_count<T: Ord + Clone>(samples: &[T]) -> usize {
    let ms: Multiset<T> = samples.iter().cloned().collect();
    ms.entries().iter().map(|e| e.1).max().unwrap_or(0)
}
