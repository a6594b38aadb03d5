//! Figure presets and the sweep runner.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{Quantity, Settings};
use crate::error::CliError;
use crate::eval::evaluate;
use crate::output::{fmt_f64, render_svg, write_file, Table};

pub const PRESETS: &[&str] = &[
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "custom",
];

/// One output column.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub overrides: Vec<(String, String)>,
    pub quantity: Quantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: String,
    pub title: String,
    pub sweep: String,
    pub grid: Vec<f64>,
    pub curves: Vec<Curve>,
}

fn family(key: &str, values: &[f64], quantity: Quantity) -> Vec<Curve> {
    values
        .iter()
        .map(|v| {
            let v = fmt_f64(*v);
            Curve {
                label: format!("{key}={v}"),
                overrides: vec![(key.to_string(), v)],
                quantity,
            }
        })
        .collect()
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    crate::config::parse_grid("grid", &format!("{start}:{stop}:{step}")).expect("static range")
}

/// Builds a preset. `grid` and `curve_values` in `settings` replace the
/// preset's sweep grid and curve values.
pub fn preset(name: &str, settings: &Settings) -> Result<Figure, CliError> {
    use Quantity::*;
    let rho_grid = || range(1.0, 5.0, 0.1);
    let eps_grid = || range(-10.0, 10.0, 1.0);
    let speed_grid = || range(5.0, 30.0, 5.0);
    let (title, sweep, grid, curve_key, curve_values, quantity): (
        &str,
        &str,
        Vec<f64>,
        &str,
        Vec<f64>,
        Quantity,
    ) = match name {
        "fig2" => (
            "BS membership probability vs rho",
            "rho",
            rho_grid(),
            "k",
            vec![2.0, 3.0, 4.0, 5.0],
            CoopMember,
        ),
        "fig3" => (
            "cooperative set size probability vs rho",
            "rho",
            rho_grid(),
            "k",
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            CoopExactly,
        ),
        "fig4" => (
            "coverage vs SIR threshold",
            "epsilon_db",
            eps_grid(),
            "eta",
            vec![3.0, 4.0, 5.0],
            Coverage,
        ),
        "fig5" => (
            "coverage vs transmit antennas",
            "n_t",
            range(1.0, 8.0, 1.0),
            "epsilon_db",
            vec![-5.0, 0.0, 2.5, 5.0],
            Coverage,
        ),
        "fig6" => (
            "coverage vs cell radius",
            "cell_radius",
            range(50.0, 100.0, 5.0),
            "n_t",
            vec![2.0, 4.0, 6.0],
            Coverage,
        ),
        "fig7" => (
            "coverage with and without cooperation",
            "epsilon_db",
            eps_grid(),
            "k",
            vec![1.0, 3.0],
            Coverage,
        ),
        "fig8" => (
            "handoff rate vs speed",
            "mean_speed",
            speed_grid(),
            "rho",
            vec![1.0, 1.2, 1.5],
            HandoffRate,
        ),
        "fig9" => (
            "capacity vs cell radius",
            "cell_radius",
            range(50.0, 100.0, 5.0),
            "rho",
            vec![1.0, 1.2, 1.5],
            Capacity,
        ),
        "fig10" => (
            "overhead ratio vs speed",
            "mean_speed",
            speed_grid(),
            "rho",
            vec![1.0, 1.2, 1.5],
            OverheadRatio,
        ),
        "fig11" => (
            "overhead ratio vs cell radius",
            "cell_radius",
            range(50.0, 120.0, 5.0),
            "rho",
            vec![1.0, 1.2, 1.5],
            OverheadRatio,
        ),
        "custom" => return custom(settings),
        _ => {
            return Err(CliError::Usage(format!(
                "unknown preset `{name}`; valid: {}",
                PRESETS.join(", ")
            )))
        }
    };
    let mut curves = family(
        curve_key,
        settings.curve_values.as_deref().unwrap_or(&curve_values),
        quantity,
    );
    if name == "fig8" && settings.curve_values.is_none() {
        curves.push(Curve {
            label: "single_cell".into(),
            overrides: vec![],
            quantity: ServingHandoffRate,
        });
    }
    Ok(Figure {
        name: name.to_string(),
        title: title.to_string(),
        sweep: sweep.to_string(),
        grid: settings.grid.clone().unwrap_or(grid),
        curves,
    })
}

fn custom(settings: &Settings) -> Result<Figure, CliError> {
    let missing = |k: &str| CliError::Usage(format!("custom figure needs `{k}`"));
    let sweep = settings.sweep.clone().ok_or_else(|| missing("sweep"))?;
    let grid = settings.grid.clone().ok_or_else(|| missing("grid"))?;
    let quantity = settings.quantity.ok_or_else(|| missing("quantity"))?;
    let curves = match (&settings.curve, &settings.curve_values) {
        (Some(key), Some(values)) => family(key, values, quantity),
        (None, None) => vec![Curve {
            label: quantity.name().to_string(),
            overrides: vec![],
            quantity,
        }],
        _ => return Err(CliError::Usage("`curve` and `curve_values` go together".into())),
    };
    Ok(Figure {
        name: "custom".into(),
        title: format!("{} vs {sweep}", quantity.name()),
        sweep,
        grid,
        curves,
    })
}

/// Files written by [`run_figure`].
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub table: Table,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Evaluates every curve at every grid point.
pub fn compute(fig: &Figure, settings: &Settings) -> Result<Table, CliError> {
    if fig.grid.is_empty() {
        return Err(CliError::Usage("grid is empty".into()));
    }
    let cells: Vec<(usize, f64)> = (0..fig.curves.len())
        .flat_map(|c| fig.grid.iter().map(move |x| (c, *x)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(c, x)| {
            let curve = &fig.curves[c];
            let mut s = settings.clone();
            for (k, v) in &curve.overrides {
                s.set(k, v)?;
            }
            s.set(&fig.sweep, &fmt_f64(x))?;
            evaluate(curve.quantity, &s)
        })
        .collect::<Result<_, _>>()?;
    let n = fig.grid.len();
    let table = Table {
        x_name: fig.sweep.clone(),
        x: fig.grid.clone(),
        columns: fig
            .curves
            .iter()
            .enumerate()
            .map(|(c, curve)| (curve.label.clone(), values[c * n..(c + 1) * n].to_vec()))
            .collect(),
    };
    let probabilities = fig.curves.iter().all(|c| c.quantity.is_probability());
    table.check(probabilities)?;
    Ok(table)
}

pub fn manifest(fig: &Figure, settings: &Settings, runtime_s: f64) -> String {
    let mut s = String::new();
    s.push_str(&format!("preset = {}\n", fig.name));
    s.push_str(&format!("version = {}\n", crate::VERSION));
    s.push_str(&format!("runtime_s = {runtime_s}\n"));
    s.push_str(&format!("sweep_variable = {}\n", fig.sweep));
    s.push_str(&format!(
        "sweep_grid = {}\n",
        fig.grid.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
    ));
    for c in &fig.curves {
        s.push_str(&format!("curve = {} ({})\n", c.label, c.quantity.name()));
    }
    s.push_str("# effective parameters\n");
    s.push_str(&settings.effective());
    s
}

pub fn run_figure(fig: &Figure, settings: &Settings, out_dir: &Path) -> Result<FigureOutput, CliError> {
    let start = Instant::now();
    let table = compute(fig, settings)?;
    let csv = write_file(out_dir, &format!("{}.csv", fig.name), &table.to_csv())?;
    let svg = if settings.svg {
        let y_label = fig.curves.first().map(|c| c.quantity.name()).unwrap_or("");
        Some(write_file(
            out_dir,
            &format!("{}.svg", fig.name),
            &render_svg(&table, &fig.title, y_label),
        )?)
    } else {
        None
    };
    let runtime = start.elapsed().as_secs_f64();
    let manifest = write_file(
        out_dir,
        &format!("{}.manifest.txt", fig.name),
        &manifest(fig, settings, runtime),
    )?;
    Ok(FigureOutput {
        table,
        csv,
        manifest,
        svg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds() {
        let s = Settings::default();
        for p in PRESETS.iter().filter(|p| **p != "custom") {
            let f = preset(p, &s).unwrap();
            assert!(!f.grid.is_empty() && !f.curves.is_empty(), "{p}");
            assert!(Settings::is_key(&f.sweep));
        }
        assert!(matches!(preset("fig99", &s), Err(CliError::Usage(_))));
        assert!(matches!(preset("custom", &s), Err(CliError::Usage(_))));
    }

    #[test]
    fn grid_override() {
        let mut s = Settings::default();
        s.set("grid", "1,2").unwrap();
        s.set("curve_values", "2").unwrap();
        let f = preset("fig2", &s).unwrap();
        assert_eq!(f.grid, vec![1.0, 2.0]);
        assert_eq!(f.curves.len(), 1);
        let t = compute(&f, &s).unwrap();
        assert_eq!(t.columns[0].0, "k=2");
        assert!((t.columns[0].1[1] - 0.75).abs() < 1e-9);
    }
}
