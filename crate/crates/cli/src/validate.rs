//! Self-check suite: closed forms, frozen reference values, numerical
//! derivatives and Monte Carlo cross-validation.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use coopcell::cooperation::{coop_prob_exactly_with, coop_prob_member_with};
use coopcell::coverage::{laplace_argument, laplace_interference_with, solve_recurrence, CoefficientTable};
use coopcell::mobility::{handoff_rate, run_replications, serving_handoff_rate};
use coopcell::montecarlo::simulate_coop_distribution;
use coopcell::numerics::{integrate, integrate_semi_infinite, ln_gamma, z_for_confidence, QuadratureSpec};
use coopcell::overhead::x2_overhead;
use coopcell::{
    active_probability, expected_overhead, regularized_gamma_upper, simulate_coverage, CoopPolicy,
    DistanceLaw, GainMode, NetworkParams, TrafficClass,
};

use crate::config::Settings;
use crate::error::CliError;
use crate::eval::analytic_coverage;

/// Outcome of one property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn within(name: &str, deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            deviation,
            tolerance,
            passed: deviation.is_finite() && deviation <= tolerance,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    fn errored(name: &str, e: CliError) -> Self {
        Self {
            name: name.into(),
            deviation: f64::NAN,
            tolerance: f64::NAN,
            passed: false,
            detail: e.to_string(),
        }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{status} {}: deviation {:e} (tolerance {:e})",
            self.name, self.deviation, self.tolerance
        );
        if !self.detail.is_empty() {
            let _ = write!(s, " [{}]", self.detail);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    pub runtime_s: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(
            s,
            "{} checks, {failed} failed, runtime {:.2} s",
            self.checks.len(),
            self.runtime_s
        );
        s
    }
}

/// Coverage reference values from an independent contour-integral
/// evaluation at the default network (k, ε in dB, coverage).
const REFERENCE_COVERAGE: [(usize, f64, f64); 6] = [
    (1, -5.0, 0.9154737849350572),
    (3, -5.0, 0.9946103605401964),
    (1, 0.0, 0.626541081182096),
    (3, 0.0, 0.7658526646410362),
    (1, 5.0, 0.3579643045879413),
    (3, 5.0, 0.30859591868634056),
];

/// Quadrature accuracy the 1e-6 checks below rely on.
const MAX_REL_TOL: f64 = 1e-8;
const MAX_ABS_TOL: f64 = 1e-10;

fn run(name: &str, f: impl FnOnce() -> Result<Check, CliError>) -> Check {
    f().unwrap_or_else(|e| Check::errored(name, e))
}

fn quadrature_checks(s: &Settings, out: &mut Vec<Check>) {
    let q = s.quad;
    out.push(
        Check::within(
            "quadrature tolerance budget",
            (q.relative_tolerance / MAX_REL_TOL).max(q.absolute_tolerance / MAX_ABS_TOL),
            1.0,
        )
        .with_detail(format!(
            "rel_tol {:e} <= {MAX_REL_TOL:e}, abs_tol {:e} <= {MAX_ABS_TOL:e}",
            q.relative_tolerance, q.absolute_tolerance
        )),
    );
    out.push(run("quadrature: integral of exp(-x) on [0, inf)", || {
        let v = integrate_semi_infinite(|x| (-x).exp(), 0.0, 1.0, &q)?;
        Ok(Check::within(
            "quadrature: integral of exp(-x) on [0, inf)",
            (v - 1.0).abs(),
            1e-9,
        ))
    }));
    out.push(run("quadrature: integral of 4/(1+x^2) on [0, 1]", || {
        let v = integrate(|x| 4.0 / (1.0 + x * x), 0.0, 1.0, &q)?;
        Ok(Check::within(
            "quadrature: integral of 4/(1+x^2) on [0, 1]",
            (v - PI).abs(),
            1e-9,
        ))
    }));
    out.push(run("quadrature: integral of sqrt(x) on [0, 1]", || {
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, &q)?;
        Ok(Check::within(
            "quadrature: integral of sqrt(x) on [0, 1]",
            (v - 2.0 / 3.0).abs(),
            1e-9,
        ))
    }));
    out.push(run("upper incomplete gamma Q(3, 2)", || {
        let v = regularized_gamma_upper(3.0, 2.0)?;
        Ok(Check::within(
            "upper incomplete gamma Q(3, 2)",
            (v - 5.0 * (-2.0f64).exp()).abs(),
            1e-12,
        ))
    }));
}

fn cooperation_checks(s: &Settings, out: &mut Vec<Check>) {
    let lambda = s.net.lambda_s;
    let q = s.quad;
    out.push(run("membership probability closed form", || {
        let mut worst: f64 = 0.0;
        for rho in [1.01f64, 1.5, 2.0, 3.0, 5.0] {
            let c = 1.0 - rho.powi(-2);
            for i in 1..=6 {
                let v = coop_prob_member_with(i, rho, lambda, &q)?;
                worst = worst.max((v - c.powi(i as i32 - 1)).abs());
            }
        }
        Ok(Check::within("membership probability closed form", worst, 1e-6))
    }));
    out.push(run("set-size probability geometric law", || {
        let mut worst: f64 = 0.0;
        for rho in [1.2f64, 2.0, 3.0] {
            let c = 1.0 - rho.powi(-2);
            for k in 1..=32 {
                let v = coop_prob_exactly_with(k, rho, lambda, &q)?;
                worst = worst.max((v - rho.powi(-2) * c.powi(k as i32 - 1)).abs());
            }
        }
        Ok(Check::within("set-size probability geometric law", worst, 1e-6))
    }));
    out.push(run("set-size probabilities sum to one", || {
        let policy = CoopPolicy::with_adequate_truncation(s.rho, 1e-9)?;
        let mut total = 0.0;
        for k in 1..=policy.k_max {
            total += coop_prob_exactly_with(k, s.rho, lambda, &q)?;
        }
        Ok(
            Check::within("set-size probabilities sum to one", (total - 1.0).abs(), 1e-6)
                .with_detail(format!("rho {}, k_max {}", s.rho, policy.k_max)),
        )
    }));
    out.push(run("intensity invariance", || {
        let mut worst: f64 = 0.0;
        for rho in [1.5, 3.0] {
            for i in 1..=4 {
                let base_m = coop_prob_member_with(i, rho, lambda, &q)?;
                let base_e = coop_prob_exactly_with(i, rho, lambda, &q)?;
                for f in [0.01, 100.0] {
                    worst = worst.max((coop_prob_member_with(i, rho, lambda * f, &q)? - base_m).abs());
                    worst = worst.max((coop_prob_exactly_with(i, rho, lambda * f, &q)? - base_e).abs());
                }
            }
        }
        Ok(Check::within("intensity invariance", worst, 1e-8))
    }));
}

/// `(−1)ⁿ/n!·g⁽ⁿ⁾(0)` for `g(t) = L(s(1 + t))`, central differences with
/// two Richardson steps.
fn derivative_reference(n: usize, s: f64, d: f64, net: &NetworkParams) -> Result<f64, CliError> {
    let spec = QuadratureSpec {
        relative_tolerance: 1e-13,
        absolute_tolerance: 1e-15,
        max_subdivisions: 4000,
    };
    let g = |t: f64| laplace_interference_with(s * (1.0 + t), d, net, &spec).unwrap_or(f64::NAN);
    let central = |h: f64| {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=n {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * g((n as f64 / 2.0 - j as f64) * h);
            binom = binom * (n - j) as f64 / (j + 1) as f64;
        }
        acc / h.powi(n as i32)
    };
    let h = 0.16;
    let (d1, d2, d3) = (central(h), central(h / 2.0), central(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    let deriv = (16.0 * r2 - r1) / 15.0;
    if !deriv.is_finite() {
        return Err(CliError::Numerical(
            "Laplace transform failed in derivative reference".into(),
        ));
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * deriv / ln_gamma(n as f64 + 1.0).exp())
}

fn coverage_checks(s: &Settings, out: &mut Vec<Check>) {
    out.push(run("Laplace transform closed form", || {
        let net = NetworkParams::siso().with_intensity(1.0 / PI);
        let v = laplace_interference_with(1.0, 0.0, &net, &s.quad)?;
        Ok(Check::within(
            "Laplace transform closed form",
            (v - (-PI / 2.0).exp()).abs(),
            1e-8,
        ))
    }));
    out.push(run("nearest-BS coverage closed form", || {
        let mut t = s.clone();
        t.net = NetworkParams::siso();
        t.k = 1;
        t.distance_order = 1;
        t.fixed_distance = 0.0;
        let v = analytic_coverage(&t)?;
        Ok(Check::within(
            "nearest-BS coverage closed form",
            (v - 1.0 / (1.0 + PI / 4.0)).abs(),
            1e-6,
        ))
    }));
    out.push(run("coverage reference values", || {
        let mut worst: f64 = 0.0;
        for (k, db, want) in REFERENCE_COVERAGE {
            let mut t = s.clone();
            t.net = NetworkParams::default();
            t.set("epsilon_db", &db.to_string())?;
            t.k = k;
            t.distance_order = 0;
            t.fixed_distance = 0.0;
            worst = worst.max((analytic_coverage(&t)? - want).abs());
        }
        Ok(Check::within("coverage reference values", worst, 1e-6))
    }));
    out.push(run("recurrence vs numerical derivatives", || {
        let mut worst: f64 = 0.0;
        for (n_t, n_r, k) in [(1u32, 1u32, 4usize), (2, 1, 2), (1, 2, 2), (2, 2, 1), (4, 1, 1)] {
            for db in [-3.0, 0.0, 4.0] {
                let net = NetworkParams::default()
                    .with_antennas(n_t, n_r)
                    .with_epsilon_db(db);
                let d = net.cell_radius;
                let div = net.diversity();
                let terms = k * div as usize;
                let table = CoefficientTable::compute(terms, net.epsilon, net.eta, div, &s.quad)?
                    .scaled(s.coefficient_scale);
                let st = solve_recurrence(PI * net.lambda_s * d * d, &table.values, div, terms)?;
                let arg = laplace_argument(d, &net);
                for (n, x) in st.x.iter().enumerate() {
                    worst = worst.max((x - derivative_reference(n, arg, d, &net)?).abs());
                }
            }
        }
        Ok(Check::within("recurrence vs numerical derivatives", worst, 1e-4))
    }));
    out.push(run("coverage nonincreasing in threshold", || {
        let mut worst: f64 = 0.0;
        let mut last = f64::INFINITY;
        for db in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            let mut t = s.clone();
            t.net = NetworkParams::default();
            t.set("epsilon_db", &db.to_string())?;
            t.k = 3;
            let v = analytic_coverage(&t)?;
            worst = worst.max(v - last);
            last = v;
        }
        Ok(Check::within(
            "coverage nonincreasing in threshold",
            worst.max(0.0),
            1e-12,
        ))
    }));
}

fn monte_carlo_checks(s: &Settings, out: &mut Vec<Check>) {
    let trials = s.trials;
    // Bonferroni over every MC comparison keeps the family-wise level at 99%.
    let comparisons = 6.0 + 4.0;
    let z = z_for_confidence(1.0 - 0.01 / comparisons);
    out.push(run("simulated coverage agrees with analysis", || {
        let mut worst: f64 = 0.0;
        let mut detail = Vec::new();
        for (k, db) in [(1, -5.0), (3, -5.0), (1, 0.0), (3, 0.0), (1, 5.0), (3, 5.0)] {
            let mut t = s.clone();
            t.net = NetworkParams::default();
            t.set("epsilon_db", &db.to_string())?;
            t.k = k;
            t.distance_order = 0;
            t.fixed_distance = 0.0;
            let analytic = analytic_coverage(&t)?;
            let est = simulate_coverage(
                &t.net,
                k,
                DistanceLaw::default_for(k),
                GainMode::GammaSum,
                trials,
                s.seed,
            )?;
            let sig = (est.mean - analytic).abs() / est.std_error.max(1e-300);
            worst = worst.max(sig);
            detail.push(format!("k={k} {db}dB {:.4}/{:.4}", est.mean, analytic));
        }
        Ok(
            Check::within("simulated coverage agrees with analysis (sigmas)", worst, z)
                .with_detail(format!("{trials} trials; {}", detail.join(", "))),
        )
    }));
    out.push(run("simulated set sizes agree with analysis", || {
        let rho = 2.0;
        let dist = simulate_coop_distribution(rho, s.net.lambda_s, trials, s.seed)?;
        let mut worst: f64 = 0.0;
        for k in 1..=4 {
            let est = dist.prob_exactly(k);
            let want = rho.powi(-2) * (1.0 - rho.powi(-2)).powi(k as i32 - 1);
            let se = (want * (1.0 - want) / trials as f64).sqrt();
            worst = worst.max((est.mean - want).abs() / se);
        }
        Ok(
            Check::within("simulated set sizes agree with analysis (sigmas)", worst, z)
                .with_detail(format!("{trials} trials, rho {rho}")),
        )
    }));
    out.push(run("simulation independent of worker count", || {
        let net = NetworkParams::default();
        let law = DistanceLaw::default_for(3);
        let n = trials.min(20_000);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .install(|| simulate_coverage(&net, 3, law, GainMode::GammaSum, n, s.seed))?;
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .install(|| simulate_coverage(&net, 3, law, GainMode::GammaSum, n, s.seed))?;
        Ok(Check::within(
            "simulation independent of worker count",
            (one.mean - many.mean).abs(),
            0.0,
        ))
    }));
}

fn mobility_overhead_checks(s: &Settings, out: &mut Vec<Check>) {
    out.push(run("single-BS handoffs equal serving changes", || {
        let mob = coopcell::MobilityParams {
            total_time: 20.0,
            seed: s.seed,
            ..coopcell::MobilityParams::default()
        };
        let traces = run_replications(s.net.lambda_s, &mob, 1.0, 8)?;
        let a = handoff_rate(&traces)?.rate;
        let b = serving_handoff_rate(&traces)?.rate;
        Ok(Check::within(
            "single-BS handoffs equal serving changes",
            (a - b).abs(),
            0.0,
        ))
    }));
    out.push(run("stationary vehicle never hands off", || {
        let mob = coopcell::MobilityParams {
            mean_speed: 0.0,
            speed_sigma: 0.0,
            total_time: 5.0,
            seed: s.seed,
            ..coopcell::MobilityParams::default()
        };
        let traces = run_replications(s.net.lambda_s, &mob, s.rho, 4)?;
        Ok(Check::within(
            "stationary vehicle never hands off",
            handoff_rate(&traces)?.rate,
            0.0,
        ))
    }));
    out.push(run("overhead arithmetic", || {
        let a = active_probability(&TrafficClass::new(12.2e3, 1.5, 0.03333));
        let want_a = 1.5 / (1.5 + 1.0 / 0.03333);
        let e = expected_overhead(100.0, &CoopPolicy::with_adequate_truncation(2.0, 1e-12)?)?;
        let params = coopcell::OverheadParams::default();
        let x2 = x2_overhead(1.0, &params)?;
        let want_c = params.delta;
        let worst = (a - want_a)
            .abs()
            .max((e - 400.0).abs() / 400.0)
            .max((x2.t_x2c - want_c).abs());
        Ok(Check::within("overhead arithmetic", worst, 1e-9))
    }));
}

/// Runs every check with the given settings.
pub fn validate(s: &Settings) -> Report {
    let start = Instant::now();
    let mut checks = Vec::new();
    quadrature_checks(s, &mut checks);
    cooperation_checks(s, &mut checks);
    coverage_checks(s, &mut checks);
    monte_carlo_checks(s, &mut checks);
    mobility_overhead_checks(s, &mut checks);
    Report {
        checks,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}
