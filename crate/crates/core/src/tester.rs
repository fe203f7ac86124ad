use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::CountVector;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self == Verdict::Accept
    }

    pub fn from_accept(accept: bool) -> Self {
        if accept {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }
}

/// Accept iff `stat ≤ threshold`.
pub fn threshold_verdict(stat: f64, threshold: f64) -> Verdict {
    Verdict::from_accept(stat <= threshold)
}

/// A tester that reads a count vector directly. The internal stream is the
/// only randomness it may use.
pub trait CountTester: Sync {
    fn decide(&self, counts: &CountVector, internal: &RngStream) -> Result<Verdict>;
}

/// A tester that draws its own samples from an input of type `I`.
///
/// `internal` carries everything that two replicated runs share (thresholds,
/// splits, flattening, markings). `samples` drives sample collection only.
pub trait ReplicableTester<I: ?Sized>: Sync {
    fn run(&self, input: &I, internal: &RngStream, samples: &RngStream) -> Result<Verdict>;
}

/// Always returns the same verdict.
#[derive(Clone, Copy, Debug)]
pub struct ConstantTester(pub Verdict);

impl CountTester for ConstantTester {
    fn decide(&self, _counts: &CountVector, _internal: &RngStream) -> Result<Verdict> {
        Ok(self.0)
    }
}

impl<I: ?Sized> ReplicableTester<I> for ConstantTester {
    fn run(&self, _input: &I, _internal: &RngStream, _samples: &RngStream) -> Result<Verdict> {
        Ok(self.0)
    }
}
