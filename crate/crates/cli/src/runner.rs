//! One simulation run and its artifacts.
//!
//! A run directory holds `diagnostics.csv` (one row per step),
//! `snapshots/snap_XXXX.csv`, `final_curve.csv`, `summary.json` and
//! `timing.json`. Everything except `timing.json` is a deterministic function
//! of the configuration.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use curveflow::curve::{fmt_f64, perimeter};
use curveflow::{CurveState, Error, SavState, Shape, StepDiagnostics};
use serde_json::{json, Map, Number, Value};

use crate::config::{GammaConfig, RunConfig};
use crate::{CliError, CliResult};

pub const OUT_ENV: &str = "CURVEFLOW_OUT";

/// Output root: `CURVEFLOW_OUT` when set, otherwise `output.root`.
pub fn output_root(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root),
        _ => config.output_root.clone(),
    }
}

pub fn run_dir(config: &RunConfig) -> PathBuf {
    output_root(config).join(&config.name)
}

fn setup_error(e: Error) -> CliError {
    CliError::Validation(e.to_string())
}

/// Step indices at which snapshots are written: `count` values spread evenly
/// over `0..=steps`, always including both ends when `count >= 2`.
pub fn snapshot_steps(steps: usize, count: usize) -> Vec<usize> {
    match count {
        0 => Vec::new(),
        1 => vec![steps],
        _ => {
            let mut out: Vec<usize> = (0..count)
                .map(|i| ((i * steps) as f64 / (count - 1) as f64).round() as usize)
                .collect();
            out.dedup();
            out
        }
    }
}

/// Result of stepping a configuration to its final time.
pub struct Simulation {
    /// `records[0]` describes the initial curve; `records[m]` follows step `m`.
    pub records: Vec<StepDiagnostics>,
    pub snapshots: Vec<(f64, CurveState)>,
    pub final_curve: CurveState,
}

pub fn initial_state(config: &RunConfig) -> CliResult<SavState> {
    SavState::new(
        config.initial_curve()?,
        config.scheme,
        config.r,
        config.dt,
        config.flow(),
        config.energy()?,
    )
    .map_err(setup_error)
}

/// Advances the configured curve `config.steps` times.
pub fn simulate(config: &RunConfig) -> CliResult<Simulation> {
    let mut state = initial_state(config)?;
    let schedule = snapshot_steps(config.steps, config.snapshots);
    let mut next_snapshot = schedule.iter().peekable();
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut records = Vec::with_capacity(config.steps + 1);
    records.push(state.snapshot().map_err(setup_error)?);
    for m in 0..=config.steps {
        if next_snapshot.peek() == Some(&&m) {
            next_snapshot.next();
            snapshots.push((state.time, state.curve.clone()));
        }
        if m == config.steps {
            break;
        }
        let (next, diag) = state
            .step()
            .map_err(|e| CliError::Numerical(format!("step {}: {e}", m + 1)))?;
        records.push(diag);
        state = next;
    }
    Ok(Simulation {
        records,
        snapshots,
        final_curve: state.curve,
    })
}

/// Exact decimal JSON number; non-finite values become `null`.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn range(values: impl Iterator<Item = f64>) -> Value {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo <= hi {
        json!({ "min": number(lo), "max": number(hi) })
    } else {
        Value::Null
    }
}

fn shape_json(config: &RunConfig) -> Value {
    match &config.shape {
        Shape::Ellipse { a, b } => json!({ "kind": "ellipse", "a": number(*a), "b": number(*b) }),
        Shape::SemiEllipse { a, b } => {
            json!({ "kind": "semi_ellipse", "a": number(*a), "b": number(*b) })
        }
        Shape::Rectangle { width, height } => {
            json!({ "kind": "rectangle", "width": number(*width), "height": number(*height) })
        }
        Shape::SubstrateRectangle { width, height } => json!({
            "kind": "substrate_rectangle",
            "width": number(*width),
            "height": number(*height),
        }),
        Shape::Custom { nodes, .. } => json!({
            "kind": "file",
            "path": config.shape_path.as_ref().map(|p| p.display().to_string()),
            "nodes": nodes.len(),
        }),
    }
}

fn config_json(config: &RunConfig) -> Value {
    let gamma = match config.gamma {
        GammaConfig::Isotropic => json!({ "kind": "isotropic" }),
        GammaConfig::FourFold { beta, fold } => {
            json!({ "kind": "four_fold", "beta": number(beta), "fold": fold })
        }
    };
    let mut gamma = gamma;
    gamma["stability_factor"] = number(config.stability_factor);
    let substrate = match config.substrate {
        Some(s) => json!({
            "sigma": number(s.sigma),
            "sigma_expr": config.sigma_expr,
            "eta": number(s.eta),
        }),
        None => Value::Null,
    };
    json!({
        "name": config.name,
        "flow": config.flow.label(),
        "scheme": config.scheme.label(),
        "r": config.r,
        "N": config.segments,
        "dt": number(config.dt),
        "T": number(config.t_final),
        "steps": config.steps,
        "gamma": gamma,
        "substrate": substrate,
        "shape": shape_json(config),
        "snapshots": config.snapshots,
    })
}

fn state_json(d: &StepDiagnostics, curve: &CurveState) -> Value {
    let mut obj = json!({
        "step": d.step,
        "time": number(d.time),
        "energy": number(d.energy),
        "aux": number(d.aux),
        "area": number(d.area),
        "perimeter": number(perimeter(curve)),
        "mesh_ratio": number(d.mesh_ratio),
    });
    if let Some((l, r)) = d.contact {
        obj["contact_left"] = number(l);
        obj["contact_right"] = number(r);
    }
    obj
}

/// Summary statistics of a finished simulation.
pub fn summary(config: &RunConfig, sim: &Simulation, initial_curve: &CurveState) -> Value {
    let first = &sim.records[0];
    let last = sim.records.last().unwrap();
    let steps = &sim.records[1..];
    let absolute = (last.area - first.area).abs();
    let relative = if first.area != 0.0 {
        number((last.area - first.area) / first.area)
    } else {
        Value::Null
    };
    let max = |f: fn(&StepDiagnostics) -> f64| {
        number(sim.records.iter().map(f).fold(f64::NEG_INFINITY, f64::max))
    };
    let mut out = Map::new();
    out.insert("config".into(), config_json(config));
    out.insert("initial".into(), state_json(first, initial_curve));
    out.insert("final".into(), state_json(last, &sim.final_curve));
    out.insert(
        "area_loss".into(),
        json!({ "absolute": number(absolute), "relative": relative }),
    );
    out.insert("max_mesh_ratio".into(), max(|d| d.mesh_ratio));
    out.insert("max_energy_gap".into(), max(|d| d.energy_gap));
    out.insert("xi".into(), range(steps.iter().map(|d| d.xi)));
    out.insert("zeta".into(), range(steps.iter().map(|d| d.zeta)));
    out.insert(
        "max_fixed_point_iterations".into(),
        json!(steps.iter().map(|d| d.fp_iters).max().unwrap_or(0)),
    );
    Value::Object(out)
}

pub const DIAGNOSTIC_COLUMNS: [&str; 16] = [
    "step",
    "time",
    "xi",
    "zeta",
    "aux",
    "energy",
    "energy_gap",
    "area",
    "area_bar",
    "energy_bar",
    "mesh_ratio",
    "dissipation",
    "contact_left",
    "contact_right",
    "fp_iters",
    "residual",
];

fn write_diagnostics(path: &Path, records: &[StepDiagnostics]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DIAGNOSTIC_COLUMNS)?;
    for d in records {
        let (l, r) = match d.contact {
            Some((l, r)) => (fmt_f64(l), fmt_f64(r)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            d.step.to_string(),
            fmt_f64(d.time),
            fmt_f64(d.xi),
            fmt_f64(d.zeta),
            fmt_f64(d.aux),
            fmt_f64(d.energy),
            fmt_f64(d.energy_gap),
            fmt_f64(d.area),
            fmt_f64(d.area_bar),
            fmt_f64(d.energy_bar),
            fmt_f64(d.mesh_ratio),
            fmt_f64(d.dissipation),
            l,
            r,
            d.fp_iters.to_string(),
            fmt_f64(d.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_curve(path: &Path, time: f64, curve: &CurveState) -> CliResult<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    curve.write_csv(time, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Paths and summary of a finished run.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Value,
}

/// Runs `config` and writes its artifacts into `dir`.
pub fn execute_in(config: &RunConfig, dir: &Path) -> CliResult<RunOutcome> {
    let started = Instant::now();
    let initial_curve = config.initial_curve()?;
    let sim = simulate(config)?;
    let wall = started.elapsed().as_secs_f64();

    let snap_dir = dir.join("snapshots");
    if snap_dir.exists() {
        fs::remove_dir_all(&snap_dir)?;
    }
    fs::create_dir_all(&snap_dir)?;
    write_diagnostics(&dir.join("diagnostics.csv"), &sim.records[1..])?;
    for (i, (time, curve)) in sim.snapshots.iter().enumerate() {
        write_curve(&snap_dir.join(format!("snap_{i:04}.csv")), *time, curve)?;
    }
    let final_time = sim.records.last().unwrap().time;
    write_curve(&dir.join("final_curve.csv"), final_time, &sim.final_curve)?;
    let summary = summary(config, &sim, &initial_curve);
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(
        &dir.join("timing.json"),
        &json!({ "wall_seconds": number(wall), "steps": config.steps }),
    )?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        summary,
    })
}

/// Runs `config` in its default directory under the output root.
pub fn execute(config: &RunConfig) -> CliResult<RunOutcome> {
    execute_in(config, &run_dir(config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_schedule() {
        assert_eq!(snapshot_steps(20, 5), vec![0, 5, 10, 15, 20]);
        assert_eq!(snapshot_steps(3, 10), vec![0, 1, 2, 3]);
        assert_eq!(snapshot_steps(7, 1), vec![7]);
        assert!(snapshot_steps(7, 0).is_empty());
        let s = snapshot_steps(320, 10);
        assert_eq!((s.len(), s[0], s[9]), (10, 0, 320));
    }

    #[test]
    fn numbers_keep_every_bit() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let text = serde_json::to_string(&number(x)).unwrap();
            assert_eq!(
                text.parse::<f64>().unwrap().to_bits(),
                x.to_bits(),
                "{text}"
            );
        }
        assert_eq!(number(f64::NAN), Value::Null);
    }
}
