//! Simulation oracle for the analytical model.
//!
//! Trial `t` of any experiment draws all of its randomness from
//! [`substream`]`(seed, purpose, t)`, so estimates are identical for any
//! number of worker threads. Coverage counts are accumulated as integers;
//! real-valued sums are formed per fixed-size chunk and combined in chunk
//! order.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::cooperation::select_coop_set;
use crate::coverage::DistanceLaw;
use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_ppp, NetworkParams, Point};
use crate::numerics::z_for_confidence;
use crate::rng::{purpose, substream};

const CHUNK: u64 = 4096;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: u64,
    pub confidence: f64,
}

impl SimEstimate {
    /// Binomial proportion `successes / n`.
    pub fn proportion(successes: u64, n: u64, confidence: f64) -> Self {
        let p = successes as f64 / n as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_trials: n,
            confidence,
        }
    }

    fn from_moments(sum: f64, sum_sq: f64, n: u64, confidence: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / nf).sqrt(),
            n_trials: n,
            confidence,
        }
    }

    pub fn z(&self) -> f64 {
        z_for_confidence(self.confidence)
    }

    pub fn ci(&self) -> (f64, f64) {
        let h = self.z() * self.std_error;
        (self.mean - h, self.mean + h)
    }

    pub fn contains(&self, value: f64) -> bool {
        let (lo, hi) = self.ci();
        lo <= value && value <= hi
    }

    /// `|mean − value|` in units of the standard error.
    pub fn sigmas_from(&self, value: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value).abs() / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// `g = Σ|h|² ~ Gamma(n_t·n_r, 1)`.
    #[default]
    GammaSum,
    /// `g = λ_max(H·Hᴴ)` for the serving links.
    ExactLambdaMax,
}

/// One `n_r × n_t` Rayleigh channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub h: DMatrix<Complex64>,
}

impl ChannelSample {
    pub fn draw<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = DMatrix::from_fn(n_r, n_t, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        });
        Self { h }
    }

    /// `Σ_{m,n} |h_{m,n}|²`.
    pub fn gain(&self) -> f64 {
        self.h.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest eigenvalue of `H·Hᴴ`.
    pub fn lambda_max(&self) -> f64 {
        let g = if self.h.nrows() <= self.h.ncols() {
            &self.h * self.h.adjoint()
        } else {
            self.h.adjoint() * &self.h
        };
        match g.nrows() {
            1 => g[(0, 0)].re,
            2 => {
                let a = g[(0, 0)].re;
                let d = g[(1, 1)].re;
                let half = 0.5 * (a - d);
                0.5 * (a + d) + (half * half + g[(0, 1)].norm_sqr()).sqrt()
            }
            _ => g
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Radius of the simulated interferer disc for serving distance `d`.
pub fn interference_window(d: f64, cell_radius: f64) -> f64 {
    (20.0 * cell_radius).max(d + 15.0 * cell_radius)
}

/// Relative share of the mean interference beyond `window` that a hard
/// truncation would discard: `(r_guard / window)^{η−2}`.
pub fn truncation_bias_bound(r_guard: f64, window: f64, eta: f64) -> f64 {
    (r_guard / window).powf(eta - 2.0)
}

/// Mean of `Σ g_j r_j^{−η}` over BSs beyond `window`; added to every
/// simulated field in place of the discarded tail.
fn tail_mean(window: f64, net: &NetworkParams) -> f64 {
    2.0 * PI * net.lambda_s * net.diversity() as f64 * window.powf(2.0 - net.eta) / (net.eta - 2.0)
}

fn pathloss(r2: f64, eta: f64) -> f64 {
    if eta == 4.0 {
        1.0 / (r2 * r2)
    } else {
        r2.powf(-0.5 * eta)
    }
}

/// Normalized interference `Σ g_j r_j^{−η}` from a PPP beyond `r_guard`.
fn interference<R: Rng + ?Sized>(r_guard: f64, net: &NetworkParams, gain: &Gamma<f64>, rng: &mut R) -> f64 {
    let window = interference_window(r_guard, net.cell_radius);
    let inner2 = r_guard * r_guard;
    let span = window * window - inner2;
    let mean = net.lambda_s * PI * span;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive Poisson mean").sample(rng) as u64
    } else {
        0
    };
    let mut total = 0.0;
    for _ in 0..count {
        let r2 = inner2 + span * rng.random::<f64>();
        total += gain.sample(rng) * pathloss(r2, net.eta);
    }
    total + tail_mean(window, net)
}

fn draw_distance<R: Rng + ?Sized>(law: DistanceLaw, lambda_s: f64, rng: &mut R) -> f64 {
    match law {
        DistanceLaw::FixedDistance(d) => d,
        DistanceLaw::NearestOrder(m) => {
            let t = Gamma::new(m as f64, 1.0).expect("valid order").sample(rng);
            (t / (lambda_s * PI)).sqrt()
        }
    }
}

/// Outcome of one coverage trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub distance: f64,
    pub sir: f64,
    pub covered: bool,
}

/// SIR samples for one trial under both gain modes, sharing every draw.
struct PairedTrial {
    distance: f64,
    sir_gamma: f64,
    sir_exact: f64,
}

fn check_inputs(net: &NetworkParams, k: usize, law: DistanceLaw, n_trials: u64) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    if k < 1 {
        return Err(invalid("k", "must be >= 1"));
    }
    net.validate()?;
    law.validate()
}

fn run_trial(
    trial: u64,
    seed: u64,
    net: &NetworkParams,
    k: usize,
    law: DistanceLaw,
    mode: GainMode,
    gain: &Gamma<f64>,
) -> TrialRecord {
    let mut rng = substream(seed, purpose::COVERAGE, trial);
    let d = draw_distance(law, net.lambda_s, &mut rng);
    let signal: f64 = match mode {
        GainMode::GammaSum => (0..k).map(|_| gain.sample(&mut rng)).sum(),
        GainMode::ExactLambdaMax => (0..k)
            .map(|_| ChannelSample::draw(net.n_r as usize, net.n_t as usize, &mut rng).lambda_max())
            .sum(),
    };
    let interference = interference(d, net, gain, &mut rng);
    let sir = sir(signal, d, interference, net);
    TrialRecord {
        trial,
        distance: d,
        sir,
        covered: sir > net.epsilon,
    }
}

fn sir(signal_gain: f64, d: f64, interference: f64, net: &NetworkParams) -> f64 {
    let p = net.p_s / net.n_t as f64;
    p * signal_gain * pathloss(d * d, net.eta) / (net.sigma2 + p * interference)
}

fn gamma_gain(net: &NetworkParams) -> Gamma<f64> {
    Gamma::new(net.diversity() as f64, 1.0).expect("positive diversity")
}

/// Coverage estimate with interferers restricted to `r > D`.
///
/// The interferer disc has radius [`interference_window`]; the mean
/// interference beyond it is added deterministically, leaving only a
/// fluctuation-order bias from the truncation.
pub fn simulate_coverage(
    net: &NetworkParams,
    k: usize,
    law: DistanceLaw,
    mode: GainMode,
    n_trials: u64,
    seed: u64,
) -> Result<SimEstimate> {
    check_inputs(net, k, law, n_trials)?;
    let gain = gamma_gain(net);
    let covered: u64 = (0..n_trials)
        .into_par_iter()
        .map(|t| run_trial(t, seed, net, k, law, mode, &gain).covered as u64)
        .sum();
    Ok(SimEstimate::proportion(covered, n_trials, 0.99))
}

/// Per-trial outcomes of [`simulate_coverage`], in trial order.
pub fn simulate_coverage_trials(
    net: &NetworkParams,
    k: usize,
    law: DistanceLaw,
    mode: GainMode,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    check_inputs(net, k, law, n_trials)?;
    let gain = gamma_gain(net);
    Ok((0..n_trials)
        .into_par_iter()
        .map(|t| run_trial(t, seed, net, k, law, mode, &gain))
        .collect())
}

/// Writes `trial,D_m,sir_linear,covered` rows.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], mut w: W) -> Result<()> {
    writeln!(w, "trial,D_m,sir_linear,covered")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.trial, r.distance, r.sir, r.covered as u8)?;
    }
    Ok(())
}

/// Paired coverage estimates for the two gain models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainGap {
    pub gamma_sum: SimEstimate,
    pub exact_lambda_max: SimEstimate,
    /// Per-trial `covered_gamma − covered_exact`.
    pub difference: SimEstimate,
}

/// Coverage under both gain models on common random numbers: the same
/// channel matrices give `Σ|h|²` and `λ_max` for every serving link.
pub fn gain_gap_study(
    net: &NetworkParams,
    k: usize,
    law: DistanceLaw,
    n_trials: u64,
    seed: u64,
) -> Result<GainGap> {
    check_inputs(net, k, law, n_trials)?;
    let gain = gamma_gain(net);
    let paired = |t: u64| {
        let mut rng = substream(seed, purpose::COVERAGE, t);
        let d = draw_distance(law, net.lambda_s, &mut rng);
        let (mut g_sum, mut g_max) = (0.0, 0.0);
        for _ in 0..k {
            let h = ChannelSample::draw(net.n_r as usize, net.n_t as usize, &mut rng);
            g_sum += h.gain();
            g_max += h.lambda_max();
        }
        let i = interference(d, net, &gain, &mut rng);
        PairedTrial {
            distance: d,
            sir_gamma: sir(g_sum, d, i, net),
            sir_exact: sir(g_max, d, i, net),
        }
    };
    let (a, b, diff_sq, diff) = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let p = paired(t);
            debug_assert!(p.distance > 0.0);
            let a = (p.sir_gamma > net.epsilon) as i64;
            let b = (p.sir_exact > net.epsilon) as i64;
            (a as u64, b as u64, ((a - b) * (a - b)) as u64, a - b)
        })
        .reduce(
            || (0, 0, 0, 0),
            |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2, x.3 + y.3),
        );
    Ok(GainGap {
        gamma_sum: SimEstimate::proportion(a, n_trials, 0.99),
        exact_lambda_max: SimEstimate::proportion(b, n_trials, 0.99),
        difference: SimEstimate::from_moments(diff as f64, diff_sq as f64, n_trials, 0.99),
    })
}

/// Sums `f(t)` over trials in fixed chunks combined in order.
fn ordered_moments<F: Fn(u64) -> f64 + Sync>(n_trials: u64, f: F) -> (f64, f64) {
    let chunks = n_trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut s, mut s2) = (0.0, 0.0);
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let v = f(t);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    partial
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

/// Sample mean of `exp(−s·I)` where `I` is the interference from BSs beyond
/// `r_guard`, including the `P_s/n_t` factor.
pub fn empirical_laplace(
    s: f64,
    r_guard: f64,
    net: &NetworkParams,
    n_trials: u64,
    seed: u64,
) -> Result<SimEstimate> {
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    net.validate()?;
    if !(s >= 0.0) || !(r_guard >= 0.0) {
        return Err(Error::Domain("s and r_guard must be >= 0".into()));
    }
    let gain = gamma_gain(net);
    let p = net.p_s / net.n_t as f64;
    let (sum, sum_sq) = ordered_moments(n_trials, |t| {
        let mut rng = substream(seed, purpose::LAPLACE, t);
        (-s * p * interference(r_guard, net, &gain, &mut rng)).exp()
    });
    Ok(SimEstimate::from_moments(sum, sum_sq, n_trials, 0.99))
}

/// Empirical cooperative-set statistics for a vehicle at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopDistribution {
    pub n_trials: u64,
    /// `size_counts[k − 1]` = trials with exactly `k` cooperating BSs.
    pub size_counts: Vec<u64>,
    /// `member_counts[i − 1]` = trials in which the `i`-th nearest BS cooperates.
    pub member_counts: Vec<u64>,
}

impl CoopDistribution {
    pub fn prob_exactly(&self, k: usize) -> SimEstimate {
        let c = self.size_counts.get(k.wrapping_sub(1)).copied().unwrap_or(0);
        SimEstimate::proportion(c, self.n_trials, 0.99)
    }

    pub fn prob_member(&self, i: usize) -> SimEstimate {
        let c = self.member_counts.get(i.wrapping_sub(1)).copied().unwrap_or(0);
        SimEstimate::proportion(c, self.n_trials, 0.99)
    }
}

fn add_counts(into: &mut Vec<u64>, from: &[u64]) {
    if into.len() < from.len() {
        into.resize(from.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// Samples a deployment per trial and applies the cooperation rule at the
/// origin. The sampling disc has radius `10·ρ·R` so that the whole
/// cooperative ring lies inside it except with negligible probability.
pub fn simulate_coop_distribution(
    rho: f64,
    lambda_s: f64,
    n_trials: u64,
    seed: u64,
) -> Result<CoopDistribution> {
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "cooperative threshold must be >= 1, got {rho}"
        )));
    }
    if !(lambda_s > 0.0) {
        return Err(invalid("lambda_s", "must be > 0"));
    }
    let window = 10.0 * rho * (1.0 / (PI * lambda_s)).sqrt();
    let chunks = n_trials.div_ceil(CHUNK);
    let partial: Vec<Result<(Vec<u64>, Vec<u64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sizes = Vec::new();
            let mut members = Vec::new();
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let mut rng = substream(seed, purpose::COOP_SET, t);
                let dep = sample_ppp(lambda_s, window, 0.0, &mut rng)?;
                let set = select_coop_set(&dep, &Point::ORIGIN, rho)?;
                let k = set.len();
                if sizes.len() < k {
                    sizes.resize(k, 0);
                }
                sizes[k - 1] += 1;
                for (i, (id, _)) in dep.ordered_distances(&Point::ORIGIN).iter().enumerate() {
                    if set.binary_search(id).is_err() {
                        break;
                    }
                    if members.len() <= i {
                        members.resize(i + 1, 0);
                    }
                    members[i] += 1;
                }
            }
            Ok((sizes, members))
        })
        .collect();
    let mut size_counts = Vec::new();
    let mut member_counts = Vec::new();
    for p in partial {
        let (s, m) = p?;
        add_counts(&mut size_counts, &s);
        add_counts(&mut member_counts, &m);
    }
    Ok(CoopDistribution {
        n_trials,
        size_counts,
        member_counts,
    })
}
