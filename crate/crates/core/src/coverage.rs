//! SIR coverage of a `k`-BS joint transmission.
//!
//! With `g ~ Gamma(M, 1)`, `M = k·n_t·n_r`, the coverage at serving distance
//! `D` is `Σ_{n<M} x_n` where `x_n = (−s)ⁿ/n!·L⁽ⁿ⁾(s)` and `L` is the Laplace
//! transform of the interference from BSs beyond `D`. The derivatives obey a
//! strictly lower-triangular linear recurrence driven by the interference
//! coefficients `k_i`, solved here by forward substitution in log space.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{invalid, Error, Result};
use crate::geometry::NetworkParams;
use crate::numerics::{integrate_semi_infinite, ln_binomial, ln_gamma, QuadratureSpec};

/// Law of the distance between the vehicle and the farthest cooperating BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceLaw {
    FixedDistance(f64),
    /// `D` distributed as the distance to the `m`-th nearest BS.
    NearestOrder(u32),
}

impl DistanceLaw {
    /// `NearestOrder(max(1, k − 1))`.
    pub fn default_for(k: usize) -> Self {
        DistanceLaw::NearestOrder(k.saturating_sub(1).max(1) as u32)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistanceLaw::FixedDistance(d) if !(d > 0.0) || !d.is_finite() => {
                Err(invalid("fixed_distance", "must be positive and finite"))
            }
            DistanceLaw::NearestOrder(0) => Err(invalid("distance_order", "must be >= 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageInputs {
    pub net: NetworkParams,
    pub k: usize,
    pub distance_law: DistanceLaw,
}

impl CoverageInputs {
    pub fn new(net: NetworkParams, k: usize) -> Self {
        Self {
            net,
            k,
            distance_law: DistanceLaw::default_for(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(invalid("k", "must be >= 1"));
        }
        self.net.validate()?;
        self.distance_law.validate()
    }

    pub fn evaluate(&self) -> Result<f64> {
        self.validate()?;
        coverage_probability(self.k, &self.net, self.distance_law)
    }
}

/// Solved recurrence at one serving distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceState {
    /// `x_0 .. x_{M−1}`.
    pub x: Vec<f64>,
    /// `k_0 .. k_{M−1}`.
    pub kcoef: Vec<f64>,
    /// `π·λ_s·D²`.
    pub a: f64,
}

impl RecurrenceState {
    pub fn coverage(&self) -> f64 {
        self.x.iter().sum()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 2.0) {
        return Err(Error::DivergentInterference { eta });
    }
    Ok(())
}

/// `1 − (1 + z)^{−n}` without cancellation for small `z`.
fn one_minus_pow_neg(z: f64, n: f64) -> f64 {
    -(-n * z.ln_1p()).exp_m1()
}

/// Laplace transform of the interference from BSs beyond `r_guard`.
pub fn laplace_interference(s: f64, r_guard: f64, net: &NetworkParams) -> Result<f64> {
    laplace_interference_with(s, r_guard, net, &QuadratureSpec::default())
}

pub fn laplace_interference_with(
    s: f64,
    r_guard: f64,
    net: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_eta(net.eta)?;
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("Laplace argument must be >= 0, got {s}")));
    }
    if !(r_guard >= 0.0) {
        return Err(Error::Domain(format!("guard radius must be >= 0, got {r_guard}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let c = s * net.p_s / net.n_t as f64;
    let n = net.diversity() as f64;
    let eta = net.eta;
    let f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        one_minus_pow_neg(c * r.powf(-eta), n) * r
    };
    let scale = c.powf(1.0 / eta).max(r_guard);
    let integral = integrate_semi_infinite(f, r_guard, scale, spec)?;
    Ok((-2.0 * PI * net.lambda_s * integral).exp())
}

/// Laplace argument whose transform, guarded at `d`, equals `x_0`:
/// `ε·Dᵑ·n_t / P_s`.
pub fn laplace_argument(d: f64, net: &NetworkParams) -> f64 {
    net.epsilon * d.powf(net.eta) * net.n_t as f64 / net.p_s
}

/// Interference coefficient `k_i` for threshold `epsilon`.
pub fn interference_coefficient(i: usize, epsilon: f64, net: &NetworkParams) -> Result<f64> {
    interference_coefficient_with(i, epsilon, net.eta, net.diversity(), &QuadratureSpec::default())
}

pub fn interference_coefficient_with(
    i: usize,
    epsilon: f64,
    eta: f64,
    diversity: u32,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_eta(eta)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "threshold must be positive and finite, got {epsilon}"
        )));
    }
    let n = diversity as f64;
    let h = eta / 2.0;
    let lower = epsilon.powf(-1.0 / h);
    let scale = lower.max(1.0);
    let integral = if i == 0 {
        integrate_semi_infinite(|v| one_minus_pow_neg(v.powf(-h), n), lower, scale, spec)?
    } else {
        let i = i as f64;
        integrate_semi_infinite(
            |v| {
                let vh = v.powf(h);
                (-i * vh.ln_1p() - n * (1.0 / vh).ln_1p()).exp()
            },
            lower,
            scale,
            spec,
        )?
    };
    Ok(epsilon.powf(1.0 / h) * integral)
}

/// Table of `k_0 .. k_{len−1}` for one `(ε, η, n_t·n_r)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub epsilon: f64,
    pub eta: f64,
    pub diversity: u32,
    pub values: Vec<f64>,
}

type CacheKey = (u64, u64, u32, u64, u64, usize);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<CoefficientTable>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<CoefficientTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

impl CoefficientTable {
    pub fn compute(
        len: usize,
        epsilon: f64,
        eta: f64,
        diversity: u32,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let values = (0..len)
            .map(|i| interference_coefficient_with(i, epsilon, eta, diversity, spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            epsilon,
            eta,
            diversity,
            values,
        })
    }

    /// Shared table with at least `len` entries, computed once per key.
    pub fn cached(len: usize, net: &NetworkParams, spec: &QuadratureSpec) -> Result<Arc<Self>> {
        let key = (
            net.epsilon.to_bits(),
            net.eta.to_bits(),
            net.diversity(),
            spec.relative_tolerance.to_bits(),
            spec.absolute_tolerance.to_bits(),
            spec.max_subdivisions,
        );
        if let Some(t) = cache().read().expect("coefficient cache poisoned").get(&key) {
            if t.values.len() >= len {
                return Ok(Arc::clone(t));
            }
        }
        let table = Arc::new(Self::compute(len, net.epsilon, net.eta, net.diversity(), spec)?);
        let mut map = cache().write().expect("coefficient cache poisoned");
        let entry = map.entry(key).or_insert_with(|| Arc::clone(&table));
        if entry.values.len() < len {
            *entry = Arc::clone(&table);
        }
        Ok(Arc::clone(entry))
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Log-space weights `ln(N·C(n−1−i+N, N)/n · k_{n−i})` of the recurrence.
struct LogWeights {
    terms: usize,
    /// Row-major lower triangle: row `n` holds entries for `i < n`.
    rows: Vec<Vec<f64>>,
}

impl LogWeights {
    fn new(terms: usize, kcoef: &[f64], diversity: u32) -> Self {
        let n_div = diversity as f64;
        let ln_k: Vec<f64> = kcoef.iter().map(|k| k.ln()).collect();
        let rows = (0..terms)
            .map(|n| {
                (0..n)
                    .map(|i| {
                        n_div.ln() + ln_binomial((n - 1 - i) as f64 + n_div, n_div) - (n as f64).ln()
                            + ln_k[n - i]
                    })
                    .collect()
            })
            .collect();
        Self { terms, rows }
    }

    /// `ln x_0 .. ln x_{terms−1}` for `a = πλD²`.
    fn solve(&self, a: f64, k0: f64) -> Vec<f64> {
        let ln_a = a.ln();
        let mut ln_x = Vec::with_capacity(self.terms);
        ln_x.push(-a * k0);
        for n in 1..self.terms {
            let row = &self.rows[n];
            let mut peak = f64::NEG_INFINITY;
            for i in 0..n {
                peak = peak.max(row[i] + ln_x[i]);
            }
            if peak == f64::NEG_INFINITY {
                ln_x.push(peak);
                continue;
            }
            let s: f64 = (0..n).map(|i| (row[i] + ln_x[i] - peak).exp()).sum();
            ln_x.push(ln_a + peak + s.ln());
        }
        ln_x
    }
}

fn checked_sum(x: &[f64], a: f64, k0: f64) -> Result<f64> {
    let sum: f64 = x.iter().sum();
    if !(-1e-9..=1.0 + 1e-9).contains(&sum) {
        return Err(Error::NumericalInstability {
            sum,
            terms: x.len(),
            a,
            k0,
        });
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Solves the recurrence for given coefficients `kcoef` (at least `terms`
/// entries) and `a = πλD²`.
pub fn solve_recurrence(a: f64, kcoef: &[f64], diversity: u32, terms: usize) -> Result<RecurrenceState> {
    if terms < 1 || kcoef.len() < terms {
        return Err(invalid("terms", "need 1 <= terms <= number of coefficients"));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("a must be finite and >= 0, got {a}")));
    }
    let weights = LogWeights::new(terms, kcoef, diversity);
    let x: Vec<f64> = weights.solve(a, kcoef[0]).into_iter().map(f64::exp).collect();
    Ok(RecurrenceState {
        x,
        kcoef: kcoef[..terms].to_vec(),
        a,
    })
}

fn check_common(d_or_k: usize, net: &NetworkParams) -> Result<usize> {
    if d_or_k < 1 {
        return Err(invalid("k", "must be >= 1"));
    }
    net.validate()?;
    Ok(d_or_k * net.diversity() as usize)
}

/// Full recurrence state at serving distance `d`.
pub fn recurrence_state(
    d: f64,
    k: usize,
    net: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<RecurrenceState> {
    let terms = check_common(k, net)?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!(
            "distance must be positive and finite, got {d}"
        )));
    }
    let table = CoefficientTable::cached(terms, net, spec)?;
    solve_recurrence(PI * net.lambda_s * d * d, &table.values, net.diversity(), terms)
}

/// Coverage probability at fixed serving distance `d`.
pub fn coverage_given_distance(d: f64, k: usize, net: &NetworkParams) -> Result<f64> {
    coverage_given_distance_with(d, k, net, &QuadratureSpec::default())
}

pub fn coverage_given_distance_with(
    d: f64,
    k: usize,
    net: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let state = recurrence_state(d, k, net, spec)?;
    checked_sum(&state.x, state.a, state.kcoef[0])
}

/// Coverage probability averaged over `law`. Noise is ignored and only the
/// power-normalized SIR enters.
pub fn coverage_probability(k: usize, net: &NetworkParams, law: DistanceLaw) -> Result<f64> {
    coverage_probability_with(k, net, law, &QuadratureSpec::default())
}

pub fn coverage_probability_with(
    k: usize,
    net: &NetworkParams,
    law: DistanceLaw,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let terms = check_common(k, net)?;
    law.validate()?;
    match law {
        DistanceLaw::FixedDistance(d) => coverage_given_distance_with(d, k, net, spec),
        DistanceLaw::NearestOrder(m) => {
            let table = CoefficientTable::cached(terms, net, spec)?;
            coverage_over_order(m, &table.values, net.diversity(), terms, spec)
        }
    }
}

/// `∫ t^{m−1}e^{−t}/Γ(m) · S(t) dt` with `S(a)` the fixed-distance coverage at
/// `a = πλD²`; the intensity drops out.
pub fn coverage_over_order(
    m: u32,
    kcoef: &[f64],
    diversity: u32,
    terms: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if m < 1 {
        return Err(invalid("distance_order", "must be >= 1"));
    }
    let weights = LogWeights::new(terms, kcoef, diversity);
    let k0 = kcoef[0];
    let mf = m as f64;
    let ln_gm = ln_gamma(mf);
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x: Vec<f64> = weights.solve(t, k0).into_iter().map(f64::exp).collect();
        let s: f64 = x.iter().sum();
        if !(-1e-9..=1.0 + 1e-9).contains(&s) {
            return f64::NAN;
        }
        ((mf - 1.0) * t.ln() - t - ln_gm).exp() * s
    };
    let value = integrate_semi_infinite(f, 0.0, mf, spec).map_err(|e| match e {
        Error::NonFiniteIntegrand { at } => {
            let x: Vec<f64> = weights.solve(at, k0).into_iter().map(f64::exp).collect();
            checked_sum(&x, at, k0)
                .err()
                .unwrap_or(Error::NonFiniteIntegrand { at })
        }
        other => other,
    });
    Ok(value?.clamp(0.0, 1.0))
}

/// One component of a mixture of coverage probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    pub k: usize,
    pub distance_order: u32,
    pub weight: f64,
}

/// `Σ weight · coverage_probability(k, net, NearestOrder(order))` evaluated
/// as a single integral. The recurrence terms do not depend on `k`, so one
/// solve of the longest recurrence serves every component.
pub fn coverage_mixture(terms: &[MixtureTerm], net: &NetworkParams, spec: &QuadratureSpec) -> Result<f64> {
    net.validate()?;
    if terms.is_empty() {
        return Ok(0.0);
    }
    for t in terms {
        if t.k < 1 {
            return Err(invalid("k", "must be >= 1"));
        }
        if t.distance_order < 1 {
            return Err(invalid("distance_order", "must be >= 1"));
        }
    }
    let n_div = net.diversity();
    let len = terms.iter().map(|t| t.k).max().unwrap_or(1) * n_div as usize;
    let table = CoefficientTable::cached(len, net, spec)?;
    let weights = LogWeights::new(len, &table.values, n_div);
    let k0 = table.values[0];
    let ln_gm: Vec<f64> = terms.iter().map(|t| ln_gamma(t.distance_order as f64)).collect();
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x: Vec<f64> = weights.solve(t, k0).into_iter().map(f64::exp).collect();
        let mut prefix = Vec::with_capacity(len + 1);
        prefix.push(0.0);
        for v in &x {
            prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
        }
        let mut total = 0.0;
        for (term, lg) in terms.iter().zip(&ln_gm) {
            let s = prefix[term.k * n_div as usize];
            if !(-1e-9..=1.0 + 1e-9).contains(&s) {
                return f64::NAN;
            }
            let m = term.distance_order as f64;
            total += term.weight * ((m - 1.0) * t.ln() - t - lg).exp() * s;
        }
        total
    };
    let scale = terms.iter().map(|t| t.distance_order).max().unwrap_or(1) as f64;
    integrate_semi_infinite(f, 0.0, scale, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn siso() -> NetworkParams {
        NetworkParams::siso().with_intensity(1.0 / PI)
    }

    #[test]
    fn laplace_examples() {
        let net = siso();
        assert_eq!(laplace_interference(0.0, 0.0, &net).unwrap(), 1.0);
        let l1 = laplace_interference(1.0, 0.0, &net).unwrap();
        assert_abs_diff_eq!(l1, (-PI / 2.0).exp(), epsilon = 1e-9);
        assert!(laplace_interference(2.0, 0.0, &net).unwrap() < l1);
    }

    #[test]
    fn laplace_guarded_closed_form() {
        let net = siso();
        for &(s, g) in &[(1.0f64, 0.5f64), (3.0, 1.0), (0.2, 2.0)] {
            let closed = (-PI * net.lambda_s * s.sqrt() * (PI / 2.0 - (g * g / s.sqrt()).atan())).exp();
            assert_abs_diff_eq!(laplace_interference(s, g, &net).unwrap(), closed, epsilon = 1e-9);
        }
    }

    #[test]
    fn laplace_rejects_low_eta() {
        let net = siso().with_eta(2.0);
        assert!(matches!(
            laplace_interference(1.0, 0.0, &net),
            Err(Error::DivergentInterference { .. })
        ));
    }

    #[test]
    fn coefficient_examples() {
        let net = siso();
        assert_abs_diff_eq!(
            interference_coefficient(0, 1.0, &net).unwrap(),
            PI / 4.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            interference_coefficient(1, 1.0, &net).unwrap(),
            PI / 8.0 + 0.25,
            epsilon = 1e-10
        );
    }

    #[test]
    fn coefficients_nonincreasing() {
        let net = NetworkParams::default();
        let k: Vec<f64> = (1..=11)
            .map(|i| interference_coefficient(i, 1.0, &net).unwrap())
            .collect();
        assert!(k.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
    }

    #[test]
    fn siso_single_bs_fixed_distance() {
        let net = siso();
        assert_abs_diff_eq!(
            coverage_given_distance(1.0, 1, &net).unwrap(),
            (-PI / 4.0).exp(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn small_threshold_is_covered() {
        let net = NetworkParams::default().with_epsilon_db(-60.0);
        assert!(coverage_given_distance(25.0, 3, &net).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn siso_nearest_closed_form() {
        let net = siso();
        let pc = coverage_probability(1, &net, DistanceLaw::NearestOrder(1)).unwrap();
        assert_abs_diff_eq!(pc, 1.0 / (1.0 + PI / 4.0), epsilon = 1e-9);
    }

    #[test]
    fn large_threshold_is_not_covered() {
        for k in [1, 3] {
            let net = NetworkParams::default().with_epsilon_db(80.0);
            assert!(coverage_probability(k, &net, DistanceLaw::default_for(k)).unwrap() < 1e-6);
        }
    }

    #[test]
    fn x0_matches_laplace_transform() {
        let net = NetworkParams::default();
        for d in [10.0, 50.0, 120.0] {
            let st = recurrence_state(d, 1, &net, &QuadratureSpec::default()).unwrap();
            let l = laplace_interference(laplace_argument(d, &net), d, &net).unwrap();
            assert_abs_diff_eq!(st.x[0], l, epsilon = 1e-9);
        }
    }

    #[test]
    fn recurrence_state_invariants() {
        let st = recurrence_state(50.0, 3, &NetworkParams::default(), &QuadratureSpec::default()).unwrap();
        assert_eq!(st.x.len(), 24);
        assert!(st.x[0] > 0.0 && st.x[0] <= 1.0);
        assert!(st.kcoef.windows(2).skip(1).all(|w| w[0] >= w[1]));
        assert!(st.kcoef.iter().all(|&k| k >= 0.0));
    }

    #[test]
    fn perturbed_coefficients_move_coverage() {
        let net = NetworkParams::default();
        let table = CoefficientTable::cached(24, &net, &QuadratureSpec::default()).unwrap();
        let a = PI * net.lambda_s * 2500.0;
        let base = solve_recurrence(a, &table.values, 8, 24).unwrap().coverage();
        let bumped = solve_recurrence(a, &table.scaled(1.1).values, 8, 24)
            .unwrap()
            .coverage();
        assert!((base - bumped).abs() > 1e-3);
    }

    #[test]
    fn mixture_matches_individual_terms() {
        let net = NetworkParams::default();
        let spec = QuadratureSpec::default();
        let terms: Vec<MixtureTerm> = (1..=4)
            .map(|k| MixtureTerm {
                k,
                distance_order: (k.max(2) - 1) as u32,
                weight: 0.1 * k as f64,
            })
            .collect();
        let direct: f64 = terms
            .iter()
            .map(|t| {
                t.weight
                    * coverage_probability(t.k, &net, DistanceLaw::NearestOrder(t.distance_order)).unwrap()
            })
            .sum();
        assert_abs_diff_eq!(
            coverage_mixture(&terms, &net, &spec).unwrap(),
            direct,
            epsilon = 1e-9
        );
    }

    #[test]
    fn distance_law_defaults() {
        assert_eq!(DistanceLaw::default_for(1), DistanceLaw::NearestOrder(1));
        assert_eq!(DistanceLaw::default_for(2), DistanceLaw::NearestOrder(1));
        assert_eq!(DistanceLaw::default_for(3), DistanceLaw::NearestOrder(2));
        assert!(DistanceLaw::FixedDistance(0.0).validate().is_err());
        assert!(DistanceLaw::NearestOrder(0).validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn coverage_nonincreasing_in_threshold(db in -10.0f64..10.0, step in 0.1f64..3.0, k in 1usize..4) {
            let lo = NetworkParams::default().with_epsilon_db(db);
            let hi = NetworkParams::default().with_epsilon_db(db + step);
            let law = DistanceLaw::default_for(k);
            prop_assert!(
                coverage_probability(k, &hi, law).unwrap() <= coverage_probability(k, &lo, law).unwrap() + 1e-10
            );
        }

        #[test]
        fn coverage_invariant_to_intensity(radius in 10.0f64..200.0, k in 1usize..4) {
            let a = NetworkParams::default();
            let b = NetworkParams::default().with_cell_radius(radius);
            let law = DistanceLaw::default_for(k);
            prop_assert!(
                (coverage_probability(k, &a, law).unwrap() - coverage_probability(k, &b, law).unwrap()).abs() < 1e-9
            );
        }
    }
}
