//! Quadrature and special functions shared by the analytical modules.
//!
//! Integration uses a globally adaptive 21-point Gauss–Kronrod rule. A
//! semi-infinite range `[lower, ∞)` is mapped onto `[0, 1)` with
//! `u = lower + scale · t / (1 − t)`; callers that know the natural length
//! scale of their integrand should pass it so the first panel already
//! resolves the bulk of the mass.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use statrs::function::erf::erf_inv;
use statrs::function::gamma as sgamma;

use crate::error::{invalid, Error, Result};

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-9,
            absolute_tolerance: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) {
            return Err(invalid("relative_tolerance", "must be > 0"));
        }
        if !(self.absolute_tolerance > 0.0) {
            return Err(invalid("absolute_tolerance", "must be > 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }

    fn target(&self, estimate: f64) -> f64 {
        self.absolute_tolerance
            .max(self.relative_tolerance * estimate.abs())
    }
}

/// Result of an adaptive integration together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_bound: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae (descending, last is the centre) and weights; the
// 10-point Gauss rule uses the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_483_413,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFiniteIntegrand { at: x })
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, centre)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(f, centre - dx)?;
        let f2 = eval(f, centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let first = gauss_kronrod_21(f, a, b)?;
    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + 1);
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    loop {
        if error <= spec.target(value) {
            break;
        }
        if heap.len() >= spec.max_subdivisions {
            return Err(Error::NoConvergence {
                estimate: value,
                error_bound: error,
                subdivisions: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::NoConvergence {
                estimate: value,
                error_bound: error,
                subdivisions: heap.len() + 1,
            });
        }
        let left = gauss_kronrod_21(f, worst.a, mid)?;
        let right = gauss_kronrod_21(f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the running totals.
    let subdivisions = heap.len();
    let panels = heap.into_vec();
    let value = panels.iter().map(|p| p.value).sum();
    let error_bound = panels.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error_bound,
        subdivisions,
    })
}

/// Integrates `f` over `[lower, upper]`; `upper` may be `f64::INFINITY`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_detailed(f, lower, upper, 1.0, spec).map(|i| i.value)
}

/// Integrates `f` over `[lower, ∞)` using `scale` as the length unit of the
/// `t / (1 − t)` map.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_detailed(f, lower, f64::INFINITY, scale, spec).map(|i| i.value)
}

pub fn integrate_detailed<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if !lower.is_finite() {
        return Err(Error::Domain(format!("lower limit must be finite, got {lower}")));
    }
    if upper.is_nan() || upper < lower {
        return Err(Error::Domain(format!(
            "integration range [{lower}, {upper}] is empty or reversed"
        )));
    }
    if upper == lower {
        return Ok(Integral {
            value: 0.0,
            error_bound: 0.0,
            subdivisions: 0,
        });
    }
    if upper.is_finite() {
        return adaptive(&f, lower, upper, spec);
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(
            "scale",
            format!("must be positive and finite, got {scale}"),
        ));
    }
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        let u = lower + scale * t / one_minus;
        let y = f(u);
        if y == 0.0 {
            0.0
        } else {
            y * scale / (one_minus * one_minus)
        }
    };
    adaptive(&mapped, 0.0, 1.0, spec)
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("gamma shape must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Regularized upper incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn regularized_gamma_upper(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    sgamma::checked_gamma_ur(a, x)
        .map(|q| q.clamp(0.0, 1.0))
        .map_err(|e| Error::Domain(e.to_string()))
}

/// Regularized lower incomplete gamma function `P(a, x) = 1 − Q(a, x)`.
pub fn regularized_gamma_lower(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    sgamma::checked_gamma_lr(a, x)
        .map(|p| p.clamp(0.0, 1.0))
        .map_err(|e| Error::Domain(e.to_string()))
}

pub fn ln_gamma(x: f64) -> f64 {
    sgamma::ln_gamma(x)
}

/// `ln C(n, k)` for real `n ≥ k ≥ 0`.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Two-sided standard-normal critical value for a confidence level in (0, 1).
pub fn z_for_confidence(level: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(level)
}
