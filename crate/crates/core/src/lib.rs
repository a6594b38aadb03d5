//! Performance model of cooperative small-cell vehicular networks.
//!
//! Small-cell base stations form a planar Poisson point process. A vehicle
//! is served jointly by every BS whose distance is within `ρ` times the
//! nearest-BS distance. The crate evaluates the resulting cooperation
//! laws, SIR coverage through a Laplace-transform recurrence, handoff rates
//! under Gauss–Markov motion and the X2 overhead ratio, and provides a Monte
//! Carlo simulator that checks each analytical quantity independently.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cooperation;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod mobility;
pub mod montecarlo;
#[allow(clippy::excessive_precision)] // quadrature tables keep their published digits
pub mod numerics;
pub mod overhead;
pub mod rng;

pub use cooperation::{
    coop_prob_exactly, coop_prob_member, expected_coop_count, select_coop_set, CoopPolicy,
};
pub use coverage::{
    coverage_given_distance, coverage_probability, interference_coefficient, laplace_interference,
    CoverageInputs, DistanceLaw, RecurrenceState,
};
pub use error::{Error, Result};
pub use geometry::{nth_distance_cdf, nth_distance_pdf, sample_ppp, Deployment, NetworkParams, Point};
pub use mobility::{
    gauss_markov_step, handoff_rate, simulate_mobility, update_distance, HandoffRate, MobilityParams,
    MobilityTrace,
};
pub use montecarlo::{gain_gap_study, simulate_coop_distribution, simulate_coverage, GainMode, SimEstimate};
pub use numerics::{integrate, regularized_gamma_upper, QuadratureSpec};
pub use overhead::{
    active_probability, expected_overhead, overhead_ratio, vehicular_capacity, x2_overhead, OverheadParams,
    OverheadReport, TrafficClass,
};
