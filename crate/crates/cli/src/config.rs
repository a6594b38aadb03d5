//! Flat `key = value` configuration.
//!
//! Values are applied in order: built-in defaults, preset defaults, the
//! `--config` file, `--set` overrides, then the dedicated flags. Every key
//! accepted here can also be used as a sweep or curve variable.

use std::fmt::Write as _;
use std::path::Path;

use coopcell::coverage::DistanceLaw;
use coopcell::geometry::{db_to_linear, linear_to_db};
use coopcell::montecarlo::GainMode;
use coopcell::overhead::{LogBase, TrafficClass};
use coopcell::{CoopPolicy, MobilityParams, NetworkParams, OverheadParams, QuadratureSpec};

use crate::error::CliError;
use crate::output::fmt_f64;

/// Accepted keys with a one-line description, in manifest order.
pub const KEYS: &[(&str, &str)] = &[
    ("lambda_s", "BS intensity per m^2 (updates cell_radius)"),
    ("cell_radius", "mean cell radius in m (updates lambda_s)"),
    ("eta", "path-loss exponent, > 2"),
    ("n_t", "transmit antennas per BS"),
    ("n_r", "receive antennas per vehicle"),
    ("epsilon", "SIR threshold, linear"),
    ("epsilon_db", "SIR threshold in dB"),
    ("p_s", "transmit power"),
    ("sigma2", "noise power (simulation only)"),
    ("rho", "cooperative threshold, >= 1"),
    ("k_max", "truncation of sums over set size; 0 = smallest adequate"),
    ("tail_tolerance", "bound on the truncated tail mass"),
    ("k", "number of cooperating BSs (BS order for coop_member)"),
    (
        "distance_order",
        "order m of the serving-distance law; 0 = max(1, k-1)",
    ),
    (
        "fixed_distance",
        "fixed serving distance in m; 0 = use distance_order",
    ),
    ("gain_mode", "gamma_sum | exact_lambda_max"),
    ("alpha", "Gauss-Markov memory in [0, 1]"),
    ("mean_speed", "m/s"),
    ("mean_direction", "rad"),
    ("speed_sigma", "speed innovation std, m/s"),
    ("direction_sigma", "direction innovation std, rad"),
    ("tau", "slot length, s"),
    ("total_time", "trajectory length, s"),
    ("replications", "trajectories per handoff-rate estimate"),
    (
        "handoff_rate",
        "fixed handoff rate per s for overhead; empty = simulate",
    ),
    ("delta", "X2-C bits per handoff"),
    ("chi", "handoff duration, s"),
    ("bandwidth", "capacity rate multiplier, bit/s"),
    ("log_base", "2 | e"),
    ("traffic", "classes as flow_bps:arrivals_per_s:session_s;..."),
    ("rel_tol", "quadrature relative tolerance"),
    ("abs_tol", "quadrature absolute tolerance"),
    ("max_subdivisions", "quadrature panel budget"),
    (
        "coefficient_scale",
        "multiplier on interference coefficients (validate only)",
    ),
    ("seed", "master seed"),
    ("trials", "Monte Carlo trials"),
    ("quantity", "custom figure output quantity"),
    ("sweep", "custom figure sweep variable"),
    ("grid", "sweep values: start:stop:step or v1,v2,..."),
    ("curve", "custom figure curve variable"),
    ("curve_values", "curve values: start:stop:step or v1,v2,..."),
    ("svg", "write an SVG chart next to each CSV (true/false)"),
];

/// Scalar outputs available to figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    CoopMember,
    CoopExactly,
    ExpectedCoopCount,
    Coverage,
    CoverageSim,
    GainGap,
    HandoffRate,
    ServingHandoffRate,
    Capacity,
    ExpectedOverhead,
    OverheadRatio,
}

impl Quantity {
    pub const ALL: &'static [(&'static str, Quantity)] = &[
        ("coop_member", Quantity::CoopMember),
        ("coop_exactly", Quantity::CoopExactly),
        ("expected_coop_count", Quantity::ExpectedCoopCount),
        ("coverage", Quantity::Coverage),
        ("coverage_sim", Quantity::CoverageSim),
        ("gain_gap", Quantity::GainGap),
        ("handoff_rate", Quantity::HandoffRate),
        ("serving_handoff_rate", Quantity::ServingHandoffRate),
        ("capacity", Quantity::Capacity),
        ("expected_overhead", Quantity::ExpectedOverhead),
        ("overhead_ratio", Quantity::OverheadRatio),
    ];

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, q)| *q)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|(n, _)| *n).collect();
                CliError::Usage(format!("unknown quantity `{s}`; valid: {}", names.join(", ")))
            })
    }

    pub fn name(&self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, q)| q == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }

    pub fn is_probability(&self) -> bool {
        matches!(
            self,
            Quantity::CoopMember | Quantity::CoopExactly | Quantity::Coverage | Quantity::CoverageSim
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub net: NetworkParams,
    pub rho: f64,
    pub k_max: usize,
    pub tail_tolerance: f64,
    pub k: usize,
    pub distance_order: u32,
    pub fixed_distance: f64,
    pub gain_mode: GainMode,
    pub mob: MobilityParams,
    pub replications: u64,
    pub handoff_rate: Option<f64>,
    pub overhead: OverheadParams,
    pub quad: QuadratureSpec,
    pub coefficient_scale: f64,
    pub seed: u64,
    pub trials: u64,
    pub quantity: Option<Quantity>,
    pub sweep: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub curve: Option<String>,
    pub curve_values: Option<Vec<f64>>,
    pub svg: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            net: NetworkParams::default(),
            rho: 1.2,
            k_max: 0,
            tail_tolerance: 1e-9,
            k: 3,
            distance_order: 0,
            fixed_distance: 0.0,
            gain_mode: GainMode::GammaSum,
            mob: MobilityParams::default(),
            replications: 100,
            handoff_rate: None,
            overhead: OverheadParams::default(),
            quad: QuadratureSpec::default(),
            coefficient_scale: 1.0,
            seed: 1,
            trials: 10_000,
            quantity: None,
            sweep: None,
            grid: None,
            curve: None,
            curve_values: None,
            svg: true,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

/// Parses `start:stop:step` or a comma-separated list; the result must be
/// nonempty and strictly monotone.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let value = value.trim();
    let grid: Vec<f64> = if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| num::<f64>(key, p))
            .collect::<Result<_, _>>()?;
        if parts.len() != 3 || parts[2] == 0.0 || !parts.iter().all(|p| p.is_finite()) {
            return Err(CliError::Usage(format!("`{key}` range must be start:stop:step")));
        }
        let (start, stop, step) = (parts[0], parts[1], parts[2]);
        let n = ((stop - start) / step + 1e-9).floor();
        if !(0.0..=1e6).contains(&n) {
            return Err(CliError::Usage(format!("`{key}` range is empty or too long")));
        }
        (0..=n as usize)
            .map(|i| {
                let v = start + i as f64 * step;
                // snap to the decimal grid so labels stay short
                (v * 1e9).round() / 1e9
            })
            .collect()
    } else {
        value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|p| num::<f64>(key, p))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(CliError::Usage(format!("`{key}` grid is empty")));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(CliError::Usage(format!("`{key}` grid must be strictly monotone")));
    }
    Ok(grid)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_traffic(value: &str) -> Result<Vec<TrafficClass>, CliError> {
    value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|class| {
            let f: Vec<f64> = class
                .split(':')
                .map(|p| num::<f64>("traffic", p))
                .collect::<Result<_, _>>()?;
            if f.len() != 3 {
                return Err(CliError::Usage(
                    "traffic classes are flow_bps:arrivals_per_s:session_s".into(),
                ));
            }
            Ok(TrafficClass::new(f[0], f[1], f[2]))
        })
        .collect()
}

fn join_grid(g: &Option<Vec<f64>>) -> String {
    g.as_ref()
        .map(|v| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","))
        .unwrap_or_default()
}

impl Settings {
    pub fn is_key(key: &str) -> bool {
        KEYS.iter().any(|(k, _)| *k == key)
    }

    fn unknown(key: &str) -> CliError {
        let names: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
        CliError::Usage(format!("unknown parameter `{key}`; valid: {}", names.join(", ")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        if v.is_empty() {
            match key {
                "quantity" => self.quantity = None,
                "sweep" => self.sweep = None,
                "grid" => self.grid = None,
                "curve" => self.curve = None,
                "curve_values" => self.curve_values = None,
                "handoff_rate" => self.handoff_rate = None,
                _ if Self::is_key(key) => return Err(CliError::Usage(format!("empty value for `{key}`"))),
                _ => return Err(Self::unknown(key)),
            }
            return Ok(());
        }
        match key {
            "lambda_s" => self.net = self.net.with_intensity(num(key, v)?),
            "cell_radius" => self.net = self.net.with_cell_radius(num(key, v)?),
            "eta" => self.net.eta = num(key, v)?,
            "n_t" => self.net.n_t = num(key, v)?,
            "n_r" => self.net.n_r = num(key, v)?,
            "epsilon" => self.net.epsilon = num(key, v)?,
            "epsilon_db" => self.net.epsilon = db_to_linear(num(key, v)?),
            "p_s" => self.net.p_s = num(key, v)?,
            "sigma2" => self.net.sigma2 = num(key, v)?,
            "rho" => self.rho = num(key, v)?,
            "k_max" => self.k_max = num(key, v)?,
            "tail_tolerance" => self.tail_tolerance = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "distance_order" => self.distance_order = num(key, v)?,
            "fixed_distance" => self.fixed_distance = num(key, v)?,
            "gain_mode" => {
                self.gain_mode = match v {
                    "gamma_sum" => GainMode::GammaSum,
                    "exact_lambda_max" => GainMode::ExactLambdaMax,
                    _ => return Err(CliError::Usage(format!("invalid gain_mode `{v}`"))),
                }
            }
            "alpha" => self.mob.alpha = num(key, v)?,
            "mean_speed" => self.mob.mean_speed = num(key, v)?,
            "mean_direction" => self.mob.mean_direction = num(key, v)?,
            "speed_sigma" => self.mob.speed_sigma = num(key, v)?,
            "direction_sigma" => self.mob.direction_sigma = num(key, v)?,
            "tau" => self.mob.tau = num(key, v)?,
            "total_time" => self.mob.total_time = num(key, v)?,
            "replications" => self.replications = num(key, v)?,
            "handoff_rate" => self.handoff_rate = Some(num(key, v)?),
            "delta" => self.overhead.delta = num(key, v)?,
            "chi" => self.overhead.chi = num(key, v)?,
            "bandwidth" => self.overhead.bandwidth = num(key, v)?,
            "log_base" => {
                self.overhead.log_base = match v {
                    "2" => LogBase::Two,
                    "e" => LogBase::Natural,
                    _ => return Err(CliError::Usage(format!("invalid log_base `{v}` (2 or e)"))),
                }
            }
            "traffic" => self.overhead.traffic = parse_traffic(v)?,
            "rel_tol" => self.quad.relative_tolerance = num(key, v)?,
            "abs_tol" => self.quad.absolute_tolerance = num(key, v)?,
            "max_subdivisions" => self.quad.max_subdivisions = num(key, v)?,
            "coefficient_scale" => self.coefficient_scale = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "quantity" => self.quantity = Some(Quantity::parse(v)?),
            "sweep" => {
                if !Self::is_key(v) {
                    return Err(Self::unknown(v));
                }
                self.sweep = Some(v.to_string())
            }
            "grid" => self.grid = Some(parse_grid(key, v)?),
            "curve" => {
                if !Self::is_key(v) {
                    return Err(Self::unknown(v));
                }
                self.curve = Some(v.to_string())
            }
            "curve_values" => self.curve_values = Some(parse_grid(key, v)?),
            "svg" => self.svg = parse_bool(key, v)?,
            _ => return Err(Self::unknown(key)),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v)
    }

    pub fn apply_config_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_override(line)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_config_text(&text)
    }

    /// Current value of `key` as written to manifests.
    pub fn get(&self, key: &str) -> String {
        match key {
            "lambda_s" => fmt_f64(self.net.lambda_s),
            "cell_radius" => fmt_f64(self.net.cell_radius),
            "eta" => fmt_f64(self.net.eta),
            "n_t" => self.net.n_t.to_string(),
            "n_r" => self.net.n_r.to_string(),
            "epsilon" => fmt_f64(self.net.epsilon),
            "epsilon_db" => fmt_f64(linear_to_db(self.net.epsilon)),
            "p_s" => fmt_f64(self.net.p_s),
            "sigma2" => fmt_f64(self.net.sigma2),
            "rho" => fmt_f64(self.rho),
            "k_max" => self.k_max.to_string(),
            "tail_tolerance" => fmt_f64(self.tail_tolerance),
            "k" => self.k.to_string(),
            "distance_order" => self.distance_order.to_string(),
            "fixed_distance" => fmt_f64(self.fixed_distance),
            "gain_mode" => match self.gain_mode {
                GainMode::GammaSum => "gamma_sum".into(),
                GainMode::ExactLambdaMax => "exact_lambda_max".into(),
            },
            "alpha" => fmt_f64(self.mob.alpha),
            "mean_speed" => fmt_f64(self.mob.mean_speed),
            "mean_direction" => fmt_f64(self.mob.mean_direction),
            "speed_sigma" => fmt_f64(self.mob.speed_sigma),
            "direction_sigma" => fmt_f64(self.mob.direction_sigma),
            "tau" => fmt_f64(self.mob.tau),
            "total_time" => fmt_f64(self.mob.total_time),
            "replications" => self.replications.to_string(),
            "handoff_rate" => self.handoff_rate.map(fmt_f64).unwrap_or_default(),
            "delta" => fmt_f64(self.overhead.delta),
            "chi" => fmt_f64(self.overhead.chi),
            "bandwidth" => fmt_f64(self.overhead.bandwidth),
            "log_base" => match self.overhead.log_base {
                LogBase::Two => "2".into(),
                LogBase::Natural => "e".into(),
            },
            "traffic" => self
                .overhead
                .traffic
                .iter()
                .map(|t| {
                    format!(
                        "{}:{}:{}",
                        fmt_f64(t.flow_rate),
                        fmt_f64(t.arrival_rate),
                        fmt_f64(t.mean_session_duration)
                    )
                })
                .collect::<Vec<_>>()
                .join(";"),
            "rel_tol" => fmt_f64(self.quad.relative_tolerance),
            "abs_tol" => fmt_f64(self.quad.absolute_tolerance),
            "max_subdivisions" => self.quad.max_subdivisions.to_string(),
            "coefficient_scale" => fmt_f64(self.coefficient_scale),
            "seed" => self.seed.to_string(),
            "trials" => self.trials.to_string(),
            "quantity" => self.quantity.map(|q| q.name().to_string()).unwrap_or_default(),
            "sweep" => self.sweep.clone().unwrap_or_default(),
            "grid" => join_grid(&self.grid),
            "curve" => self.curve.clone().unwrap_or_default(),
            "curve_values" => join_grid(&self.curve_values),
            "svg" => self.svg.to_string(),
            _ => String::new(),
        }
    }

    /// Every key with its effective value. `lambda_s` and `epsilon_db` are
    /// derived from `cell_radius` and `epsilon` and written as comments, so
    /// the text can be fed back as a config without rounding drift.
    pub fn effective(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let derived = matches!(*k, "lambda_s" | "epsilon_db");
            let _ = writeln!(s, "{}{k} = {}", if derived { "# " } else { "" }, self.get(k));
        }
        s
    }

    pub fn policy(&self) -> Result<CoopPolicy, CliError> {
        if self.k_max == 0 {
            Ok(CoopPolicy::with_adequate_truncation(
                self.rho,
                self.tail_tolerance,
            )?)
        } else {
            Ok(CoopPolicy {
                rho: self.rho,
                k_max: self.k_max,
                tail_tolerance: self.tail_tolerance,
            })
        }
    }

    pub fn distance_law(&self) -> DistanceLaw {
        if self.fixed_distance > 0.0 {
            DistanceLaw::FixedDistance(self.fixed_distance)
        } else if self.distance_order > 0 {
            DistanceLaw::NearestOrder(self.distance_order)
        } else {
            DistanceLaw::default_for(self.k)
        }
    }

    /// Mobility parameters carrying the master seed.
    pub fn mobility(&self) -> MobilityParams {
        MobilityParams {
            seed: self.seed,
            ..self.mob
        }
    }
}
