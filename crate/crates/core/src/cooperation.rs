//! Distance-ratio cooperation rule and its membership / set-size laws.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Deployment, Point, SpatialIndex};
use crate::numerics::{integrate_semi_infinite, ln_gamma, regularized_gamma_lower, QuadratureSpec};

/// Cooperation threshold and truncation of sums over the set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoopPolicy {
    pub rho: f64,
    pub k_max: usize,
    pub tail_tolerance: f64,
}

impl Default for CoopPolicy {
    fn default() -> Self {
        Self {
            rho: 1.2,
            k_max: 32,
            tail_tolerance: 1e-9,
        }
    }
}

impl CoopPolicy {
    pub fn new(rho: f64) -> Self {
        Self {
            rho,
            ..Self::default()
        }
    }

    /// Policy with the smallest `k_max` whose tail mass is below `tail_tolerance`.
    pub fn with_adequate_truncation(rho: f64, tail_tolerance: f64) -> Result<Self> {
        check_rho(rho)?;
        if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
            return Err(invalid("tail_tolerance", "must lie in (0, 1)"));
        }
        let q = 1.0 - rho.powi(-2);
        let k_max = if q <= 0.0 {
            1
        } else {
            ((tail_tolerance.ln() / q.ln()).floor() as usize + 1).max(1)
        };
        Ok(Self {
            rho,
            k_max,
            tail_tolerance,
        })
    }

    /// Exact mass of set sizes above `k_max`: `(1 − ρ^{−2})^{k_max}`.
    pub fn tail_bound(&self) -> f64 {
        (1.0 - self.rho.powi(-2)).max(0.0).powi(self.k_max as i32)
    }

    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if self.k_max < 1 {
            return Err(invalid("k_max", "must be >= 1"));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(invalid("tail_tolerance", "must be > 0"));
        }
        Ok(())
    }

    /// Fails when the truncated tail is not below `tail_tolerance`.
    pub fn check_tail(&self) -> Result<()> {
        self.validate()?;
        let bound = self.tail_bound();
        if bound >= self.tail_tolerance {
            return Err(Error::TailTooLarge {
                bound,
                tolerance: self.tail_tolerance,
                k_max: self.k_max,
            });
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "cooperative threshold must be finite and >= 1, got {rho}"
        )));
    }
    Ok(())
}

fn check_lambda(lambda_s: f64) -> Result<()> {
    if !(lambda_s > 0.0) || !lambda_s.is_finite() {
        return Err(invalid("lambda_s", "must be positive and finite"));
    }
    Ok(())
}

/// Probability that the `i`-th nearest BS joins the cooperative set.
pub fn coop_prob_member(i: usize, rho: f64, lambda_s: f64) -> Result<f64> {
    coop_prob_member_with(i, rho, lambda_s, &QuadratureSpec::default())
}

pub fn coop_prob_member_with(i: usize, rho: f64, lambda_s: f64, spec: &QuadratureSpec) -> Result<f64> {
    if i < 1 {
        return Err(invalid("i", "order must be >= 1"));
    }
    check_rho(rho)?;
    check_lambda(lambda_s)?;
    if i == 1 {
        return Ok(1.0);
    }
    let c = lambda_s * PI;
    let annulus = c * (rho * rho - 1.0);
    let shape = (i - 1) as f64;
    // P(at least i − 1 points in the annulus | R_1 = y) weighted by f_{R_1}(y)
    let f = |y: f64| {
        let y2 = y * y;
        let at_least = regularized_gamma_lower(shape, annulus * y2).unwrap_or(f64::NAN);
        at_least * 2.0 * c * y * (-c * y2).exp()
    };
    let v = integrate_semi_infinite(f, 0.0, 1.0 / c.sqrt(), spec)?;
    Ok(v.clamp(0.0, 1.0))
}

/// Probability that exactly `k` BSs satisfy the cooperation rule.
pub fn coop_prob_exactly(k: usize, rho: f64, lambda_s: f64) -> Result<f64> {
    coop_prob_exactly_with(k, rho, lambda_s, &QuadratureSpec::default())
}

pub fn coop_prob_exactly_with(k: usize, rho: f64, lambda_s: f64, spec: &QuadratureSpec) -> Result<f64> {
    if k < 1 {
        return Err(invalid("k", "count must be >= 1"));
    }
    check_rho(rho)?;
    check_lambda(lambda_s)?;
    if rho == 1.0 {
        return Ok(if k == 1 { 1.0 } else { 0.0 });
    }
    let c = lambda_s * PI;
    let annulus = c * (rho * rho - 1.0);
    let m = (k - 1) as f64;
    let ln_fact = ln_gamma(k as f64);
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let y2 = y * y;
        let ln = (2.0 * c * y).ln() - c * rho * rho * y2 + m * (annulus * y2).ln() - ln_fact;
        ln.exp()
    };
    // The integrand peaks near y² = (2k − 1) / (2cρ²).
    let scale = ((2.0 * k as f64 - 1.0) / (2.0 * c * rho * rho)).sqrt();
    let v = integrate_semi_infinite(f, 0.0, scale, spec)?;
    Ok(v.clamp(0.0, 1.0))
}

/// Mean cooperative-set size `Σ_k k·P_k`, truncated where the tail mass
/// drops below 1e-12.
pub fn expected_coop_count(rho: f64) -> Result<f64> {
    expected_coop_count_with(&CoopPolicy::with_adequate_truncation(rho, 1e-12)?)
}

/// Mean cooperative-set size truncated at `policy.k_max`.
pub fn expected_coop_count_with(policy: &CoopPolicy) -> Result<f64> {
    policy.check_tail()?;
    let mut sum = 0.0;
    for k in 1..=policy.k_max {
        sum += k as f64 * coop_prob_exactly(k, policy.rho, 1.0)?;
    }
    Ok(sum)
}

/// Identities of BSs with `R_i ≤ ρ·R_1` as seen from `vehicle`, sorted ascending.
pub fn select_coop_set(deployment: &Deployment, vehicle: &Point, rho: f64) -> Result<Vec<usize>> {
    check_rho(rho)?;
    let (_, r1) = deployment.nearest(vehicle).ok_or(Error::EmptyDeployment)?;
    let limit = rho * r1;
    let mut ids: Vec<usize> = deployment
        .bs_positions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance(vehicle) <= limit)
        .map(|(i, _)| i)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Same rule as [`select_coop_set`] answered from a spatial index; the
/// result is written into `out`. Returns the nearest identity.
pub fn select_coop_set_indexed(
    index: &SpatialIndex<'_>,
    vehicle: &Point,
    rho: f64,
    out: &mut Vec<usize>,
) -> Result<usize> {
    check_rho(rho)?;
    let (nearest, r1) = index.nearest(vehicle).ok_or(Error::EmptyDeployment)?;
    index.within(vehicle, rho * r1, out);
    Ok(nearest)
}
