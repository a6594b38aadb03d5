//! X2 signalling overhead, vehicular capacity and the overhead ratio.

use crate::cooperation::{coop_prob_exactly, CoopPolicy};
use crate::coverage::{coverage_mixture, DistanceLaw, MixtureTerm};
use crate::error::{invalid, Error, Result};
use crate::geometry::NetworkParams;
use crate::mobility::{handoff_rate, run_replications, MobilityParams};
use crate::numerics::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficClass {
    /// `a_l`, bits/s.
    pub flow_rate: f64,
    /// `ψ_l`, sessions/s.
    pub arrival_rate: f64,
    /// `1/ζ_l`, s.
    pub mean_session_duration: f64,
}

impl TrafficClass {
    pub fn new(flow_rate: f64, arrival_rate: f64, mean_session_duration: f64) -> Self {
        Self {
            flow_rate,
            arrival_rate,
            mean_session_duration,
        }
    }

    /// `ζ_l`.
    pub fn departure_rate(&self) -> f64 {
        1.0 / self.mean_session_duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.flow_rate > 0.0 && self.arrival_rate > 0.0 && self.mean_session_duration > 0.0) {
            return Err(invalid(
                "traffic",
                "flow rate, arrival rate and session duration must be > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    pub fn log1p(&self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.ln_1p() / std::f64::consts::LN_2,
            LogBase::Natural => x.ln_1p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadParams {
    /// Control bits per handoff per cell.
    pub delta: f64,
    /// Handoff duration, s.
    pub chi: f64,
    /// Rate multiplier of the capacity, bits/s.
    pub bandwidth: f64,
    pub log_base: LogBase,
    pub traffic: Vec<TrafficClass>,
}

impl Default for OverheadParams {
    fn default() -> Self {
        Self {
            delta: 480.0,
            chi: 0.05,
            bandwidth: 10e6,
            log_base: LogBase::Two,
            traffic: vec![
                TrafficClass::new(12.2e3, 1.5, 0.03333),
                TrafficClass::new(353.8e3, 0.5, 0.05),
            ],
        }
    }
}

impl OverheadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(invalid("delta", "must be > 0"));
        }
        if !(self.chi > 0.0) {
            return Err(invalid("chi", "must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(invalid("bandwidth", "must be > 0"));
        }
        if self.traffic.is_empty() {
            return Err(invalid("traffic", "at least one class is required"));
        }
        self.traffic.iter().try_for_each(TrafficClass::validate)
    }
}

/// `ψ / (ψ + ζ)`.
pub fn active_probability(t: &TrafficClass) -> f64 {
    t.arrival_rate / (t.arrival_rate + t.departure_rate())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassOverhead {
    pub p_active: f64,
    /// Handoffs/s of this class.
    pub handoff_rate: f64,
    /// Bits forwarded per handoff.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct X2Overhead {
    pub t_x2c: f64,
    pub t_x2u: f64,
    pub t_x2: f64,
    pub classes: Vec<ClassOverhead>,
}

/// X2 control and user-plane traffic generated by handoff rate `ho`.
pub fn x2_overhead(ho: f64, params: &OverheadParams) -> Result<X2Overhead> {
    if !(ho >= 0.0) || !ho.is_finite() {
        return Err(Error::Domain(format!(
            "handoff rate must be finite and >= 0, got {ho}"
        )));
    }
    let classes: Vec<ClassOverhead> = params
        .traffic
        .iter()
        .map(|t| {
            let p = active_probability(t);
            ClassOverhead {
                p_active: p,
                handoff_rate: p * ho,
                beta: t.flow_rate * params.chi,
            }
        })
        .collect();
    let t_x2c = params.delta * ho;
    let t_x2u = classes.iter().map(|c| c.beta * c.handoff_rate).sum();
    Ok(X2Overhead {
        t_x2c,
        t_x2u,
        t_x2: t_x2c + t_x2u,
        classes,
    })
}

/// `Σ_{k ≤ k_max} P_k · k · t_x2`.
pub fn expected_overhead(t_x2: f64, policy: &CoopPolicy) -> Result<f64> {
    if !(t_x2 >= 0.0) {
        return Err(Error::Domain(format!("t_x2 must be >= 0, got {t_x2}")));
    }
    policy.check_tail()?;
    let mut mean_size = 0.0;
    for k in 1..=policy.k_max {
        mean_size += k as f64 * coop_prob_exactly(k, policy.rho, 1.0)?;
    }
    Ok(mean_size * t_x2)
}

/// `[Σ_{k ≤ k_max} P_c^k · P_k] · B_w · log(1 + ε)`, with `P_c^k` averaged
/// over the default distance law for `k`.
pub fn vehicular_capacity(net: &NetworkParams, policy: &CoopPolicy, params: &OverheadParams) -> Result<f64> {
    vehicular_capacity_with(net, policy, params, &QuadratureSpec::default())
}

pub fn vehicular_capacity_with(
    net: &NetworkParams,
    policy: &CoopPolicy,
    params: &OverheadParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    policy.validate()?;
    net.validate()?;
    if !(params.bandwidth >= 0.0) {
        return Err(invalid("bandwidth", "must be >= 0"));
    }
    if params.bandwidth == 0.0 {
        return Ok(0.0);
    }
    let mut terms = Vec::with_capacity(policy.k_max);
    for k in 1..=policy.k_max {
        let p = coop_prob_exactly(k, policy.rho, net.lambda_s)?;
        if p == 0.0 {
            continue;
        }
        let DistanceLaw::NearestOrder(m) = DistanceLaw::default_for(k) else {
            unreachable!("default law is an order statistic")
        };
        terms.push(MixtureTerm {
            k,
            distance_order: m,
            weight: p,
        });
    }
    let weighted = coverage_mixture(&terms, net, spec)?;
    Ok(weighted * params.bandwidth * params.log_base.log1p(net.epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    pub handoff_rate: f64,
    pub t_x2c: f64,
    pub t_x2u: f64,
    pub t_x2: f64,
    pub expected_overhead: f64,
    pub capacity: f64,
    pub ratio: f64,
    pub classes: Vec<ClassOverhead>,
}

impl OverheadReport {
    /// Fixed field names in output order.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let mut kv = vec![
            ("handoff_rate".to_string(), self.handoff_rate),
            ("t_x2c".to_string(), self.t_x2c),
            ("t_x2u".to_string(), self.t_x2u),
            ("t_x2".to_string(), self.t_x2),
            ("expected_overhead".to_string(), self.expected_overhead),
            ("capacity".to_string(), self.capacity),
            ("overhead_ratio".to_string(), self.ratio),
        ];
        for (i, c) in self.classes.iter().enumerate() {
            let l = i + 1;
            kv.push((format!("class{l}_p_active"), c.p_active));
            kv.push((format!("class{l}_handoff_rate"), c.handoff_rate));
            kv.push((format!("class{l}_beta"), c.beta));
        }
        kv
    }
}

/// Overhead ratio `E[C] / ∂` for a given handoff rate.
pub fn overhead_ratio(
    net: &NetworkParams,
    policy: &CoopPolicy,
    ho: f64,
    params: &OverheadParams,
) -> Result<OverheadReport> {
    params.validate()?;
    let capacity = vehicular_capacity(net, policy, params)?;
    overhead_report(ho, capacity, policy, params)
}

/// Assembles the report from a precomputed capacity.
pub fn overhead_report(
    ho: f64,
    capacity: f64,
    policy: &CoopPolicy,
    params: &OverheadParams,
) -> Result<OverheadReport> {
    let x2 = x2_overhead(ho, params)?;
    let e_c = expected_overhead(x2.t_x2, policy)?;
    if !(capacity > 0.0) {
        return Err(Error::ZeroCapacity);
    }
    Ok(OverheadReport {
        handoff_rate: ho,
        t_x2c: x2.t_x2c,
        t_x2u: x2.t_x2u,
        t_x2: x2.t_x2,
        expected_overhead: e_c,
        capacity,
        ratio: e_c / capacity,
        classes: x2.classes,
    })
}

/// Overhead ratio with the handoff rate measured over `replications`
/// simulated trajectories.
pub fn overhead_ratio_simulated(
    net: &NetworkParams,
    policy: &CoopPolicy,
    mob: &MobilityParams,
    params: &OverheadParams,
    replications: u64,
) -> Result<OverheadReport> {
    let traces = run_replications(net.lambda_s, mob, policy.rho, replications)?;
    let ho = handoff_rate(&traces)?.rate;
    overhead_ratio(net, policy, ho, params)
}
