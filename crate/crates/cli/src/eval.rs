//! Scalar quantities computed from a [`Settings`].

use std::f64::consts::PI;

use coopcell::cooperation::{coop_prob_exactly_with, coop_prob_member_with, expected_coop_count_with};
use coopcell::coverage::{
    coverage_over_order, coverage_probability_with, solve_recurrence, CoefficientTable,
};
use coopcell::mobility::{handoff_rate, run_replications, serving_handoff_rate};
use coopcell::montecarlo::gain_gap_study;
use coopcell::overhead::{overhead_report, vehicular_capacity_with, x2_overhead};
use coopcell::{expected_overhead, simulate_coverage, DistanceLaw};

use crate::config::{Quantity, Settings};
use crate::error::CliError;

/// Analytical coverage; a `coefficient_scale` other than 1 multiplies every
/// interference coefficient before the recurrence is solved.
pub fn analytic_coverage(s: &Settings) -> Result<f64, CliError> {
    let law = s.distance_law();
    if s.coefficient_scale == 1.0 {
        return Ok(coverage_probability_with(s.k, &s.net, law, &s.quad)?);
    }
    s.net.validate()?;
    law.validate()?;
    if s.k < 1 {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    let div = s.net.diversity();
    let terms = s.k * div as usize;
    let table =
        CoefficientTable::compute(terms, s.net.epsilon, s.net.eta, div, &s.quad)?.scaled(s.coefficient_scale);
    match law {
        DistanceLaw::FixedDistance(d) => {
            Ok(solve_recurrence(PI * s.net.lambda_s * d * d, &table.values, div, terms)?.coverage())
        }
        DistanceLaw::NearestOrder(m) => Ok(coverage_over_order(m, &table.values, div, terms, &s.quad)?),
    }
}

/// Handoff rate from `handoff_rate` if set, otherwise simulated.
pub fn handoff(s: &Settings) -> Result<f64, CliError> {
    match s.handoff_rate {
        Some(h) => Ok(h),
        None => {
            let traces = run_replications(s.net.lambda_s, &s.mobility(), s.rho, s.replications)?;
            Ok(handoff_rate(&traces)?.rate)
        }
    }
}

pub fn capacity(s: &Settings) -> Result<f64, CliError> {
    Ok(vehicular_capacity_with(
        &s.net,
        &s.policy()?,
        &s.overhead,
        &s.quad,
    )?)
}

pub fn evaluate(q: Quantity, s: &Settings) -> Result<f64, CliError> {
    let lambda = s.net.lambda_s;
    let v = match q {
        Quantity::CoopMember => coop_prob_member_with(s.k, s.rho, lambda, &s.quad)?,
        Quantity::CoopExactly => coop_prob_exactly_with(s.k, s.rho, lambda, &s.quad)?,
        Quantity::ExpectedCoopCount => expected_coop_count_with(&s.policy()?)?,
        Quantity::Coverage => analytic_coverage(s)?,
        Quantity::CoverageSim => {
            simulate_coverage(&s.net, s.k, s.distance_law(), s.gain_mode, s.trials, s.seed)?.mean
        }
        Quantity::GainGap => {
            gain_gap_study(&s.net, s.k, s.distance_law(), s.trials, s.seed)?
                .difference
                .mean
        }
        Quantity::HandoffRate => {
            let traces = run_replications(lambda, &s.mobility(), s.rho, s.replications)?;
            handoff_rate(&traces)?.rate
        }
        Quantity::ServingHandoffRate => {
            let traces = run_replications(lambda, &s.mobility(), 1.0, s.replications)?;
            serving_handoff_rate(&traces)?.rate
        }
        Quantity::Capacity => capacity(s)?,
        Quantity::ExpectedOverhead => {
            let x2 = x2_overhead(handoff(s)?, &s.overhead)?;
            expected_overhead(x2.t_x2, &s.policy()?)?
        }
        Quantity::OverheadRatio => {
            let policy = s.policy()?;
            s.overhead.validate()?;
            let cap = capacity(s)?;
            overhead_report(handoff(s)?, cap, &policy, &s.overhead)?.ratio
        }
    };
    Ok(v)
}
