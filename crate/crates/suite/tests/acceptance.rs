//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use coopcell::cooperation::{coop_prob_exactly, coop_prob_member};
use coopcell::coverage::{laplace_argument, laplace_interference_with, recurrence_state};
use coopcell::geometry::intensity_for_radius;
use coopcell::mobility::{run_replications, serving_handoff_rate};
use coopcell::numerics::{ln_gamma, QuadratureSpec};
use coopcell::{
    coverage_probability, simulate_coverage, DistanceLaw, GainMode, MobilityParams, NetworkParams,
};
use coopcell_cli::commands::run_validate;
use coopcell_cli::figure::{compute, preset, run_figure};
use coopcell_cli::output::Table;
use coopcell_cli::Settings;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

const SEED: u64 = 1;
const RHOS_1: [f64; 5] = [1.01, 1.5, 2.0, 3.0, 5.0];
const RHOS_2: [f64; 3] = [1.2, 2.0, 3.0];

fn membership_deviation(lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for rho in RHOS_1 {
        for i in 1..=6 {
            let want = (1.0 - rho.powi(-2)).powi(i as i32 - 1);
            worst = worst.max((coop_prob_member(i, rho, lambda).unwrap() - want).abs());
        }
    }
    worst
}

/// Worst partition deviation and worst pointwise deviation from the
/// geometric law over k = 1..32.
fn partition_deviation(lambda: f64) -> (f64, f64, Vec<f64>) {
    let mut worst_sum: f64 = 0.0;
    let mut worst_point: f64 = 0.0;
    let mut sums = Vec::new();
    for rho in RHOS_2 {
        let q = 1.0 - rho.powi(-2);
        let mut sum = 0.0;
        for k in 1..=32 {
            let p = coop_prob_exactly(k, rho, lambda).unwrap();
            sum += p;
            worst_point = worst_point.max((p - rho.powi(-2) * q.powi(k as i32 - 1)).abs());
        }
        worst_sum = worst_sum.max((sum - 1.0).abs());
        sums.push(sum);
    }
    (worst_sum, worst_point, sums)
}

fn criterion_1() -> Outcome {
    let d = membership_deviation(intensity_for_radius(50.0));
    outcome(d <= 1e-6, format!("max |P_i - (1 - rho^-2)^(i-1)| = {d:e}"))
}

fn criterion_2() -> Outcome {
    let (sum_dev, point_dev, sums) = partition_deviation(intensity_for_radius(50.0));
    outcome(
        sum_dev <= 1e-6 && point_dev <= 1e-6,
        format!(
            "sums over k<=32 for rho {RHOS_2:?} = {sums:?}; max |sum - 1| = {sum_dev:e}, \
             max pointwise deviation = {point_dev:e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let base = intensity_for_radius(50.0);
    let m0 = membership_values(base);
    let e0 = exactly_values(base);
    let mut worst: f64 = 0.0;
    for f in [0.01, 1.0, 100.0] {
        for (a, b) in membership_values(base * f).iter().zip(&m0) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in exactly_values(base * f).iter().zip(&e0) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max change across lambda x {{0.01, 1, 100}} = {worst:e}"),
    )
}

fn membership_values(lambda: f64) -> Vec<f64> {
    RHOS_1
        .iter()
        .flat_map(|&rho| (1..=6).map(move |i| coop_prob_member(i, rho, lambda).unwrap()))
        .collect()
}

fn exactly_values(lambda: f64) -> Vec<f64> {
    RHOS_2
        .iter()
        .flat_map(|&rho| (1..=32).map(move |k| coop_prob_exactly(k, rho, lambda).unwrap()))
        .collect()
}

fn criterion_4() -> Outcome {
    let net = NetworkParams::siso();
    let want = 1.0 / (1.0 + PI / 4.0);
    let got = coverage_probability(1, &net, DistanceLaw::NearestOrder(1)).unwrap();
    let est = simulate_coverage(
        &net,
        1,
        DistanceLaw::NearestOrder(1),
        GainMode::GammaSum,
        1_000_000,
        SEED,
    )
    .unwrap();
    let (lo, hi) = est.ci();
    let quad_ok = (got - want).abs() <= 1e-3;
    let mc_ok = est.contains(want);
    outcome(
        quad_ok && mc_ok,
        format!(
            "quadrature {got} vs {want:.6} (|diff| {:e}); 1e6-trial MC {} with 99% CI [{lo:.6}, {hi:.6}]",
            (got - want).abs(),
            est.mean
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut all = true;
    let mut parts = Vec::new();
    for db in [-5.0, 0.0, 5.0] {
        for k in [1, 3] {
            let net = NetworkParams::default().with_epsilon_db(db);
            let law = DistanceLaw::default_for(k);
            let analytic = coverage_probability(k, &net, law).unwrap();
            let est = simulate_coverage(&net, k, law, GainMode::GammaSum, 200_000, SEED).unwrap();
            let ok = est.contains(analytic);
            all &= ok;
            parts.push(format!(
                "{db}dB k={k}: {analytic:.5} vs {:.5} ({:.2} sigma){}",
                est.mean,
                est.sigmas_from(analytic),
                if ok { "" } else { " OUT" }
            ));
        }
    }
    outcome(all, parts.join("; "))
}

fn derivative_reference(n: usize, s: f64, d: f64, net: &NetworkParams) -> f64 {
    let spec = QuadratureSpec {
        relative_tolerance: 1e-13,
        absolute_tolerance: 1e-15,
        max_subdivisions: 4000,
    };
    let g = |t: f64| laplace_interference_with(s * (1.0 + t), d, net, &spec).unwrap();
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
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * deriv / ln_gamma(n as f64 + 1.0).exp()
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n_t in 1..=4u32 {
        for n_r in 1..=4u32 {
            for k in 1..=4usize {
                if (n_t * n_r) as usize * k > 4 {
                    continue;
                }
                for d in [30.0, 50.0, 80.0] {
                    for db in [-3.0, 0.0, 4.0] {
                        let net = NetworkParams::default()
                            .with_antennas(n_t, n_r)
                            .with_epsilon_db(db);
                        let st = recurrence_state(d, k, &net, &QuadratureSpec::default()).unwrap();
                        let s = laplace_argument(d, &net);
                        for (n, x) in st.x.iter().enumerate() {
                            worst = worst.max((x - derivative_reference(n, s, d, &net)).abs());
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-4,
        format!("{cases} terms, max |x_n - finite difference| = {worst:e}"),
    )
}

fn table(name: &str) -> Table {
    let s = Settings::default();
    compute(&preset(name, &s).unwrap(), &s).unwrap()
}

fn column<'a>(t: &'a Table, label: &str) -> &'a [f64] {
    &t.columns.iter().find(|(l, _)| l == label).unwrap().1
}

fn nondecreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] >= w[0] - tol)
}

fn nonincreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn unimodal(v: &[f64]) -> bool {
    let peak = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    peak > 0 && peak + 1 < v.len() && nondecreasing(&v[..=peak], 1e-12) && nonincreasing(&v[peak..], 1e-12)
}

fn criterion_7() -> Outcome {
    let mut sub = Vec::new();

    let t = table("fig2");
    let inc_rho = t.columns.iter().all(|(_, c)| nondecreasing(c, 1e-12));
    let dec_i = (0..t.x.len()).all(|r| {
        let row: Vec<f64> = t.columns.iter().map(|(_, c)| c[r]).collect();
        nonincreasing(&row, 1e-12)
    });
    sub.push((
        "a",
        inc_rho && dec_i,
        format!("increasing in rho {inc_rho}, decreasing in i {dec_i}"),
    ));

    let t = table("fig3");
    let p1_dec = nonincreasing(column(&t, "k=1"), 1e-12);
    let uni = t.columns.iter().skip(1).all(|(_, c)| unimodal(c));
    sub.push((
        "b",
        p1_dec && uni,
        format!("P_1 decreasing {p1_dec}, P_k unimodal {uni}"),
    ));

    let t = table("fig4");
    let dec_eps = t.columns.iter().all(|(_, c)| nonincreasing(c, 1e-12));
    let inc_eta = t.x.iter().enumerate().filter(|(_, x)| **x >= 0.0).all(|(r, _)| {
        let row: Vec<f64> = t.columns.iter().map(|(_, c)| c[r]).collect();
        nondecreasing(&row, 1e-12)
    });
    sub.push((
        "c",
        dec_eps && inc_eta,
        format!("decreasing in eps {dec_eps}, increasing in eta {inc_eta}"),
    ));

    let t = table("fig7");
    let r = t.x.iter().position(|x| *x == -1.0).unwrap();
    let (one, three) = (column(&t, "k=1")[r], column(&t, "k=3")[r]);
    sub.push((
        "d",
        three > one,
        format!("at -1 dB k=3 {three:.4} vs k=1 {one:.4}"),
    ));

    let t = table("fig8");
    let inc_speed = t.columns.iter().all(|(_, c)| nondecreasing(c, 0.0));
    let mut coincide = true;
    for (r, v) in t.x.iter().enumerate() {
        let mob = MobilityParams {
            mean_speed: *v,
            seed: Settings::default().seed,
            ..MobilityParams::default()
        };
        let traces = run_replications(intensity_for_radius(50.0), &mob, 1.0, 100).unwrap();
        let (lo, hi) = serving_handoff_rate(&traces).unwrap().ci();
        let multi = column(&t, "rho=1")[r];
        coincide &= multi >= lo && multi <= hi;
    }
    sub.push((
        "e",
        inc_speed && coincide,
        format!("increasing in speed {inc_speed}, rho=1 within single-cell CI {coincide}"),
    ));

    let t = table("fig9");
    let dec_radius = t.columns.iter().all(|(_, c)| c.windows(2).all(|w| w[1] < w[0]));
    let inc_rho = (0..t.x.len()).all(|r| {
        let row: Vec<f64> = t.columns.iter().map(|(_, c)| c[r]).collect();
        row.windows(2).all(|w| w[1] > w[0])
    });
    let c = column(&t, "rho=1.2");
    sub.push((
        "f",
        dec_radius && inc_rho,
        format!(
            "decreasing in radius {dec_radius} (rho=1.2: {} at 50 m, {} at 100 m), increasing in rho {inc_rho}",
            c[0],
            c[c.len() - 1]
        ),
    ));

    let t = table("fig11");
    let mut interior = true;
    let mut minima = Vec::new();
    for (_, c) in &t.columns {
        let (i, m) = c
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, m)| (i, *m))
            .unwrap();
        interior &= i > 0 && i + 1 < c.len();
        minima.push((t.x[i], m));
    }
    let ordered = minima.windows(2).all(|w| w[1].1 < w[0].1);
    let in_band = minima.iter().all(|(_, m)| (5e-5..=5e-3).contains(m));
    sub.push((
        "g",
        interior && ordered && in_band,
        format!(
            "interior minimum {interior}, minima decreasing in rho {ordered}, within [5e-5, 5e-3] {in_band}; \
             (radius, min) for rho 1/1.2/1.5 = {minima:?}"
        ),
    ));

    let passed = sub.iter().all(|s| s.1);
    let detail = sub
        .iter()
        .map(|(k, ok, d)| format!("({k}) {} {d}", if *ok { "PASS" } else { "FAIL" }))
        .collect::<Vec<_>>()
        .join("\n    ");
    outcome(passed, format!("\n    {detail}"))
}

fn run_in_pool(threads: usize, name: &str, s: &Settings, dir: &Path) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let fig = preset(name, s).unwrap();
    let out = pool.install(|| run_figure(&fig, s, dir)).unwrap();
    std::fs::read(out.csv).unwrap()
}

fn criterion_8() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    let mut fig8 = Settings::default();
    fig8.set("replications", "20").unwrap();
    fig8.set("total_time", "50").unwrap();
    let mut mc = Settings::default();
    for (k, v) in [
        ("sweep", "epsilon_db"),
        ("grid", "-5,0,5"),
        ("quantity", "coverage_sim"),
        ("curve", "k"),
        ("curve_values", "1,3"),
        ("trials", "20000"),
    ] {
        mc.set(k, v).unwrap();
    }
    cases.push(("fig3", Settings::default()));
    cases.push(("fig7", Settings::default()));
    cases.push(("fig8", fig8));
    cases.push(("custom", mc));
    let mut all = true;
    let mut parts = Vec::new();
    for (name, s) in &cases {
        let runs: Vec<Vec<u8>> = [(1, "a"), (1, "b"), (4, "c"), (3, "d")]
            .iter()
            .map(|(threads, tag)| run_in_pool(*threads, name, s, &root.path().join(tag)))
            .collect();
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        all &= same;
        parts.push(format!("{name} {}", if same { "identical" } else { "DIFFERS" }));
    }
    outcome(all, format!("1/1/4/3 workers: {}", parts.join(", ")))
}

/// `coopcell` next to the test executable's `deps/` directory.
fn binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?;
    let bin = dir.join(format!("coopcell{}", std::env::consts::EXE_SUFFIX));
    bin.exists().then_some(bin)
}

fn criterion_9() -> Outcome {
    let runs: [(&str, &[&str]); 4] = [
        ("default", &[]),
        ("coefficients x1.1", &["coefficient_scale=1.1"]),
        ("coefficients x0.9", &["coefficient_scale=0.9"]),
        ("rel_tol=1", &["rel_tol=1"]),
    ];
    let mut codes = Vec::new();
    let source;
    if let Some(bin) = binary() {
        source = "process exit codes";
        for (_, sets) in runs {
            let mut cmd = Command::new(&bin);
            cmd.arg("validate");
            for a in sets {
                cmd.args(["--set", a]);
            }
            codes.push(cmd.output().unwrap().status.code().unwrap_or(-1));
        }
    } else {
        source = "library exit codes (binary not built)";
        for (_, sets) in runs {
            let mut s = Settings::default();
            for a in sets {
                s.apply_override(a).unwrap();
            }
            codes.push(match run_validate(&s, None) {
                Ok(_) => 0,
                Err(e) => e.exit_code(),
            });
        }
    }
    let ok = codes == [0, 3, 3, 3];
    let detail = runs
        .iter()
        .zip(&codes)
        .map(|((name, _), c)| format!("{name} {c}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(ok, format!("{source}: {detail}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 membership closed form", criterion_1),
        ("2 set-size partition", criterion_2),
        ("3 intensity invariance", criterion_3),
        ("4 nearest-BS coverage closed form", criterion_4),
        ("5 coverage cross-validation", criterion_5),
        ("6 recurrence vs finite differences", criterion_6),
        ("7 figure shapes", criterion_7),
        ("8 determinism", criterion_8),
        ("9 validate negative control", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = f();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
