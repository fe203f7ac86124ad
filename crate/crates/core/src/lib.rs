//! Replicable distribution testers and the lower-bound random-walk lab.
//!
//! The testers (uniformity, closeness, independence) all follow the same
//! pattern: compute a concentrated statistic from samples and compare it to a
//! threshold drawn from the tester's internal randomness. Two runs that share
//! the internal [`RngStream`] but see fresh samples therefore agree unless the
//! statistic lands on opposite sides of the shared threshold.

pub mod closeness;
pub mod error;
pub mod flattening;
pub mod hard_instances;
pub mod independence;
pub mod measure;
pub mod replicability;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod tester;
pub mod uniformity;
pub mod walks;

pub use error::{Error, Result};
pub use measure::{l1_distance, tv_distance, CountVector, Measure2d, NonNegativeMeasure};
pub use rng::{Role, RngStream};
pub use tester::{CountTester, ReplicableTester, Verdict};
