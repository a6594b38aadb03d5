//! Subcommand bodies. Each returns the text printed on stdout.

use std::fmt::Write as _;
use std::path::Path;

use coopcell::cooperation::{coop_prob_exactly_with, coop_prob_member_with, expected_coop_count_with};
use coopcell::mobility::{handoff_rate, replication_deployment, run_replications, serving_handoff_rate};
use coopcell::montecarlo::{simulate_coverage_trials, write_trials_csv};
use coopcell::overhead::overhead_report;
use coopcell::{simulate_coverage, simulate_mobility, DistanceLaw, SimEstimate};

use crate::config::Settings;
use crate::error::CliError;
use crate::eval::{analytic_coverage, capacity, handoff};
use crate::figure::{preset, run_figure};
use crate::output::{fmt_f64, write_file};
use crate::validate::validate;

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn law_name(law: DistanceLaw) -> String {
    match law {
        DistanceLaw::FixedDistance(d) => format!("fixed:{}", fmt_f64(d)),
        DistanceLaw::NearestOrder(m) => format!("nearest_order:{m}"),
    }
}

fn write_manifest(dir: &Path, name: &str, s: &Settings, runtime_s: f64) -> Result<(), CliError> {
    let text = format!(
        "command = {name}\nversion = {}\nruntime_s = {runtime_s}\n# effective parameters\n{}",
        crate::VERSION,
        s.effective()
    );
    write_file(dir, &format!("{name}.manifest.txt"), &text)?;
    Ok(())
}

/// Closed-form and quadrature quantities for the configured network.
pub fn analytic(s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let start = std::time::Instant::now();
    let policy = s.policy()?;
    let law = s.distance_law();
    let mut o = String::new();
    kv(&mut o, "rho", fmt_f64(s.rho));
    kv(&mut o, "k", s.k);
    kv(&mut o, "k_max", policy.k_max);
    kv(&mut o, "tail_bound", fmt_f64(policy.tail_bound()));
    kv(
        &mut o,
        "coop_prob_member",
        fmt_f64(coop_prob_member_with(s.k, s.rho, s.net.lambda_s, &s.quad)?),
    );
    kv(
        &mut o,
        "coop_prob_exactly",
        fmt_f64(coop_prob_exactly_with(s.k, s.rho, s.net.lambda_s, &s.quad)?),
    );
    kv(
        &mut o,
        "expected_coop_count",
        fmt_f64(expected_coop_count_with(&policy)?),
    );
    kv(&mut o, "distance_law", law_name(law));
    kv(&mut o, "coverage", fmt_f64(analytic_coverage(s)?));
    if let Some(dir) = out {
        write_file(dir, "analytic.txt", &o)?;
        write_manifest(dir, "analytic", s, start.elapsed().as_secs_f64())?;
    }
    Ok(o)
}

fn estimate_lines(o: &mut String, prefix: &str, e: &SimEstimate) {
    let (lo, hi) = e.ci();
    kv(o, &format!("{prefix}mean"), fmt_f64(e.mean));
    kv(o, &format!("{prefix}std_error"), fmt_f64(e.std_error));
    kv(o, &format!("{prefix}ci_low"), fmt_f64(lo));
    kv(o, &format!("{prefix}ci_high"), fmt_f64(hi));
    kv(o, &format!("{prefix}confidence"), fmt_f64(e.confidence));
}

/// Monte Carlo coverage next to the analytical value.
pub fn simulate(s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let start = std::time::Instant::now();
    let law = s.distance_law();
    let est = simulate_coverage(&s.net, s.k, law, s.gain_mode, s.trials, s.seed)?;
    let analytic = analytic_coverage(s)?;
    let mut o = String::new();
    kv(&mut o, "trials", s.trials);
    kv(&mut o, "seed", s.seed);
    kv(&mut o, "gain_mode", s.get("gain_mode"));
    kv(&mut o, "distance_law", law_name(law));
    estimate_lines(&mut o, "", &est);
    kv(&mut o, "analytic", fmt_f64(analytic));
    kv(&mut o, "sigmas", fmt_f64(est.sigmas_from(analytic)));
    kv(&mut o, "analytic_in_ci", est.contains(analytic));
    if let Some(dir) = out {
        let records = simulate_coverage_trials(&s.net, s.k, law, s.gain_mode, s.trials, s.seed)?;
        let mut buf = Vec::new();
        write_trials_csv(&records, &mut buf)?;
        write_file(dir, "simulate_trials.csv", &String::from_utf8_lossy(&buf))?;
        write_file(dir, "simulate.txt", &o)?;
        write_manifest(dir, "simulate", s, start.elapsed().as_secs_f64())?;
    }
    Ok(o)
}

/// Handoff rates over independent trajectories.
pub fn mobility(s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let start = std::time::Instant::now();
    let mob = s.mobility();
    let traces = run_replications(s.net.lambda_s, &mob, s.rho, s.replications)?;
    let coop = handoff_rate(&traces)?;
    let serving = serving_handoff_rate(&traces)?;
    let mut o = String::new();
    kv(&mut o, "replications", coop.replications);
    kv(&mut o, "total_duration_s", fmt_f64(coop.total_duration));
    for (name, r) in [("handoff", &coop), ("serving_handoff", &serving)] {
        let (lo, hi) = r.ci();
        kv(&mut o, &format!("{name}_count"), r.total_handoffs);
        kv(&mut o, &format!("{name}_rate"), fmt_f64(r.rate));
        kv(&mut o, &format!("{name}_rate_std_error"), fmt_f64(r.std_error));
        kv(&mut o, &format!("{name}_rate_ci_low"), fmt_f64(lo));
        kv(&mut o, &format!("{name}_rate_ci_high"), fmt_f64(hi));
    }
    kv(
        &mut o,
        "truncated_traces",
        traces.iter().filter(|t| t.truncated).count(),
    );
    kv(
        &mut o,
        "clamped_speeds",
        traces.iter().map(|t| t.clamped_speeds).sum::<u64>(),
    );
    if let Some(dir) = out {
        let dep = replication_deployment(s.net.lambda_s, &mob, 0)?;
        let trace = simulate_mobility(&dep, &mob, s.rho)?;
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        write_file(dir, "mobility_trace.csv", &String::from_utf8_lossy(&buf))?;
        let mut buf = Vec::new();
        dep.write_csv(&mut buf)?;
        write_file(dir, "deployment.csv", &String::from_utf8_lossy(&buf))?;
        write_file(dir, "mobility.txt", &o)?;
        write_manifest(dir, "mobility", s, start.elapsed().as_secs_f64())?;
    }
    Ok(o)
}

/// X2 overhead, capacity and their ratio.
pub fn overhead(s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let start = std::time::Instant::now();
    let policy = s.policy()?;
    s.overhead.validate()?;
    let ho = handoff(s)?;
    let cap = capacity(s)?;
    let report = overhead_report(ho, cap, &policy, &s.overhead)?;
    let mut o = String::new();
    kv(
        &mut o,
        "handoff_source",
        if s.handoff_rate.is_some() {
            "fixed"
        } else {
            "simulated"
        },
    );
    kv(&mut o, "k_max", policy.k_max);
    for (k, v) in report.key_values() {
        kv(&mut o, &k, fmt_f64(v));
    }
    if let Some(dir) = out {
        write_file(dir, "overhead.txt", &o)?;
        write_manifest(dir, "overhead", s, start.elapsed().as_secs_f64())?;
    }
    Ok(o)
}

/// Runs a preset; files go to `out` or the current directory.
pub fn figure(name: &str, s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let fig = preset(name, s)?;
    let dir = out.unwrap_or_else(|| Path::new("."));
    let res = run_figure(&fig, s, dir)?;
    let mut o = String::new();
    kv(&mut o, "csv", res.csv.display());
    kv(&mut o, "manifest", res.manifest.display());
    if let Some(svg) = &res.svg {
        kv(&mut o, "svg", svg.display());
    }
    Ok(o)
}

/// Runs the check suite; any failure is a validation error carrying the
/// full report.
pub fn run_validate(s: &Settings, out: Option<&Path>) -> Result<String, CliError> {
    let report = validate(s);
    let text = report.render();
    if let Some(dir) = out {
        write_file(dir, "validate.txt", &text)?;
        write_manifest(dir, "validate", s, report.runtime_s)?;
    }
    if report.passed() {
        Ok(text)
    } else {
        Err(CliError::Validation(text))
    }
}
