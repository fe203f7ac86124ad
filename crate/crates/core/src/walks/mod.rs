//! The random walks behind the lower bounds. Each bucket's count is resampled
//! from the posterior over its hidden mass, which leaves the Poissonized
//! sample distribution stationary; a tester that is replicable cannot tell
//! consecutive states apart, so a fast-mixing walk forces its acceptance
//! probability to concentrate.

pub mod acceptance;
pub mod kernel;
pub mod mixing;

pub use acceptance::{acceptance_probability, concentration_csv, concentration_experiment, AcceptanceEstimate, ConcentrationRow, ConcentrationSpec};
pub use kernel::{
    closeness_pair_transition, coord_rw_step, coord_stationary, coord_transition, default_truncation, sample_rw_step, CoordKernel, PairKernel,
    PoissonMixture,
};
pub use mixing::{estimate_mixing, DistanceMetric, FiniteKernel, MixingReport};
