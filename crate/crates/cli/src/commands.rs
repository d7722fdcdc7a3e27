//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use curveflow::curve::fmt_f64;
use curveflow::metrics::{check_halving, error_table_from_finals, ErrorTable};
use curveflow::CurveState;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{parse_dt_list, RawConfig, RunConfig};
use crate::runner::{self, output_root, RunOutcome};
use crate::svg::{self, Series};
use crate::{presets, CliError, CliResult};

/// Largest accepted sweep grid.
pub const MAX_GRID_POINTS: usize = 512;
pub const MIN_DT_LIST: usize = 3;

/// Loads `source` as a file, or as a preset name when no such file exists.
/// Returns the raw settings and the default run name.
pub fn load(source: &str, overrides: &[String]) -> CliResult<(RawConfig, String)> {
    let path = Path::new(source);
    let (mut raw, name) = if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        (RawConfig::parse(&text, source)?, stem)
    } else if let Some(p) = presets::find(source) {
        (
            RawConfig::parse(&p.text, &format!("preset {}", p.name))?,
            p.name,
        )
    } else {
        return Err(CliError::Validation(format!(
            "{source:?} is neither a config file nor a preset (see `curveflow presets`)"
        )));
    };
    for o in overrides {
        raw.set(o)?;
    }
    Ok((raw, name))
}

pub fn run(raw: &RawConfig, name: &str, steps: Option<usize>) -> CliResult<RunOutcome> {
    let mut config = RunConfig::from_raw(raw, name)?;
    if let Some(m) = steps {
        config = config.with_steps(m);
    }
    runner::execute(&config)
}

/// Final curve of `config` at its final time.
fn final_curve(config: &RunConfig) -> CliResult<CurveState> {
    Ok(runner::simulate(config)?.final_curve)
}

pub struct ConvergeOutcome {
    pub dir: PathBuf,
    pub table: ErrorTable,
}

/// Runs the configuration at every step size of `dt_list` in parallel and
/// tabulates the distances between consecutive final curves.
pub fn converge(raw: &RawConfig, name: &str, dt_list: Option<&str>) -> CliResult<ConvergeOutcome> {
    let config = RunConfig::from_raw(raw, name)?;
    let dts = match dt_list {
        Some(text) => parse_dt_list(text)?,
        None => config.dt_list.clone().ok_or_else(|| {
            CliError::Validation("no time steps: pass --dt-list or set converge.dt_list".into())
        })?,
    };
    if dts.len() < MIN_DT_LIST {
        return Err(CliError::Validation(format!(
            "a convergence study needs at least {MIN_DT_LIST} halving time steps, got {}",
            dts.len()
        )));
    }
    check_halving(&dts).map_err(|e| CliError::Validation(e.to_string()))?;
    let configs: Vec<RunConfig> = dts
        .iter()
        .map(|&dt| config.with_dt(dt))
        .collect::<CliResult<_>>()?;
    let finals: Vec<CurveState> = configs
        .par_iter()
        .map(final_curve)
        .collect::<CliResult<_>>()?;
    let label = format!("{} r={}", config.scheme.label(), config.r);
    let table = error_table_from_finals(&label, config.t_final, &dts, &finals)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let dir = output_root(&config).join(&config.name);
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
    w.write_record(["dt", "dt_half", "error", "order"])?;
    for row in &table.rows {
        w.write_record([
            fmt_f64(row.dt),
            fmt_f64(row.dt / 2.0),
            fmt_f64(row.error),
            row.order.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let errors: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.dt, r.error)).collect();
    let mut series = vec![Series {
        label: format!("{label}, T = {}", config.t_final),
        points: errors.clone(),
    }];
    if let Some(&(dt0, e0)) = errors.first() {
        for p in [1, 2] {
            series.push(Series {
                label: format!("slope {p}"),
                points: errors
                    .iter()
                    .map(|&(dt, _)| (dt, e0 * (dt / dt0).powi(p)))
                    .collect(),
            });
        }
    }
    fs::write(
        dir.join("convergence.svg"),
        svg::chart(
            "temporal convergence",
            "dt",
            "manifold distance",
            &series,
            true,
        ),
    )?;
    Ok(ConvergeOutcome { dir, table })
}

const GRID_KEYS: [&str; 4] = ["scheme", "r", "beta", "dt"];

/// Parses `key=v1,v2;key=...` into ordered axes.
pub fn parse_grid(text: &str) -> CliResult<Vec<(String, Vec<String>)>> {
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("grid axis {part:?} is not of the form key=v1,v2"))
        })?;
        let key = key.trim();
        if !GRID_KEYS.contains(&key) {
            return Err(CliError::Validation(format!(
                "grid key {key:?} is not one of scheme, r, beta, dt"
            )));
        }
        if axes.iter().any(|(k, _)| k == key) {
            return Err(CliError::Validation(format!(
                "grid key {key:?} appears twice"
            )));
        }
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(CliError::Validation(format!(
                "grid axis {key:?} has an empty value"
            )));
        }
        axes.push((key.to_string(), values));
    }
    if axes.is_empty() {
        return Err(CliError::Validation("the sweep grid is empty".into()));
    }
    let points: usize = axes.iter().map(|(_, v)| v.len()).product();
    if points > MAX_GRID_POINTS {
        return Err(CliError::Validation(format!(
            "the sweep grid has {points} points, more than {MAX_GRID_POINTS}"
        )));
    }
    Ok(axes)
}

/// `(key, value)` settings of one grid point.
pub type GridPoint = Vec<(String, String)>;

/// Cartesian product of the axes; the first axis varies slowest.
pub fn grid_points(axes: &[(String, Vec<String>)]) -> Vec<GridPoint> {
    let mut points = vec![Vec::new()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, String)>| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn point_dir(index: usize, point: &[(String, String)]) -> String {
    let mut name = format!("{index:03}");
    for (k, v) in point {
        let v: String = v
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        name.push_str(&format!("_{k}-{v}"));
    }
    name
}

fn apply_point(raw: &RawConfig, point: &[(String, String)]) -> CliResult<RawConfig> {
    let mut raw = raw.clone();
    for (key, value) in point {
        let origin = format!("grid {key}");
        match key.as_str() {
            "beta" => {
                let beta: f64 = value.parse().map_err(|_| {
                    CliError::Validation(format!("grid beta value {value:?} is not a number"))
                })?;
                if beta == 0.0 {
                    raw.set_value("gamma.kind", "isotropic", &origin)?;
                    raw.remove("gamma.beta");
                    raw.remove("gamma.fold");
                } else {
                    raw.set_value("gamma.kind", "four_fold", &origin)?;
                    raw.set_value("gamma.beta", value, &origin)?;
                }
            }
            "dt" => {
                let dt = parse_dt_list(value)?[0];
                raw.set_value("dt", &fmt_f64(dt), &origin)?;
            }
            "r" | "scheme" => raw.set_value(key, value, &origin)?,
            other => unreachable!("grid key {other} passed validation"),
        }
    }
    Ok(raw)
}

/// One grid point of a sweep.
pub struct SweepPoint {
    pub dir: String,
    pub values: Vec<(String, String)>,
    pub result: CliResult<Value>,
}

pub struct SweepOutcome {
    pub dir: PathBuf,
    pub points: Vec<SweepPoint>,
}

impl SweepOutcome {
    pub fn failures(&self) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.result.is_err()).collect()
    }
}

/// Runs every grid point concurrently, one run directory each, and writes
/// `aggregate.csv` in grid order.
pub fn sweep(raw: &RawConfig, name: &str, grid: Option<&str>) -> CliResult<SweepOutcome> {
    let base = RunConfig::from_raw(raw, name)?;
    let grid = match grid {
        Some(g) => g.to_string(),
        None => base
            .grid
            .clone()
            .ok_or_else(|| CliError::Validation("no grid: pass --grid or set sweep.grid".into()))?,
    };
    let axes = parse_grid(&grid)?;
    let root = output_root(&base).join(&base.name);
    // Validate every point before running any of them.
    let configs: Vec<(String, GridPoint, RunConfig)> = grid_points(&axes)
        .into_iter()
        .enumerate()
        .map(|(i, point)| {
            let dir = point_dir(i, &point);
            let config = RunConfig::from_raw(&apply_point(raw, &point)?, &dir)
                .map_err(|e| CliError::Validation(format!("grid point {dir}: {e}")))?;
            Ok((
                dir.clone(),
                point,
                RunConfig {
                    name: dir,
                    ..config
                },
            ))
        })
        .collect::<CliResult<_>>()?;
    fs::create_dir_all(&root)?;
    let points: Vec<SweepPoint> = configs
        .into_par_iter()
        .map(|(dir, values, config)| {
            let path = root.join(&dir);
            let result = fs::create_dir_all(&path)
                .map_err(CliError::from)
                .and_then(|_| runner::execute_in(&config, &path))
                .map(|o| o.summary);
            SweepPoint {
                dir,
                values,
                result,
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(root.join("aggregate.csv"))?;
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().map(|(k, _)| k.clone()));
    header.extend(
        [
            "status",
            "steps",
            "final_energy",
            "final_aux",
            "relative_area_loss",
            "max_mesh_ratio",
            "max_energy_gap",
            "message",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for p in &points {
        let mut row: Vec<String> = vec![p.dir.clone()];
        row.extend(p.values.iter().map(|(_, v)| v.clone()));
        match &p.result {
            Ok(s) => {
                let text = |v: &Value| match v {
                    Value::Null => String::new(),
                    other => other.to_string(),
                };
                row.push("ok".into());
                row.push(text(&s["config"]["steps"]));
                row.push(text(&s["final"]["energy"]));
                row.push(text(&s["final"]["aux"]));
                row.push(text(&s["area_loss"]["relative"]));
                row.push(text(&s["max_mesh_ratio"]));
                row.push(text(&s["max_energy_gap"]));
                row.push(String::new());
            }
            Err(e) => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(SweepOutcome { dir: root, points })
}

/// Reads the numeric columns `columns` of `diagnostics.csv`.
fn read_columns(path: &Path, columns: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let index: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == *c).ok_or_else(|| {
                CliError::Validation(format!("{} lacks column {c:?}", path.display()))
            })
        })
        .collect::<CliResult<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for record in reader.records() {
        let record = record?;
        for (col, &i) in out.iter_mut().zip(&index) {
            let v: f64 = record[i].parse().map_err(|_| {
                CliError::Validation(format!("{}: bad number {:?}", path.display(), &record[i]))
            })?;
            col.push(v);
        }
    }
    Ok(out)
}

/// Renders `evolution.svg` from the snapshots of a run directory and, when
/// `diagnostics.csv` is present, `energy.svg`, `area.svg` and
/// `mesh_ratio.svg`. Returns the written files.
pub fn plot(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    let mut files: Vec<PathBuf> = match fs::read_dir(&snap_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if files.is_empty() {
        return Err(CliError::Validation(format!(
            "MissingSnapshots: no snapshot CSV files in {}",
            snap_dir.display()
        )));
    }
    files.sort();
    let mut curves = Vec::with_capacity(files.len());
    let mut times = Vec::with_capacity(files.len());
    for f in &files {
        let file = fs::File::open(f)?;
        let (curve, t) = CurveState::read_csv(std::io::BufReader::new(file))
            .map_err(|e| CliError::Validation(format!("{}: {e}", f.display())))?;
        curves.push(curve);
        times.push(t);
    }
    let title = format!(
        "{} snapshots, t = {} to {}",
        curves.len(),
        times[0],
        times[times.len() - 1]
    );
    let mut written = vec![dir.join("evolution.svg")];
    fs::write(&written[0], svg::evolution(&title, &curves))?;

    let diagnostics = dir.join("diagnostics.csv");
    if diagnostics.is_file() {
        let cols = read_columns(
            &diagnostics,
            &["time", "energy", "aux", "area", "mesh_ratio"],
        )?;
        let (time, energy, aux, area, mesh) = (&cols[0], &cols[1], &cols[2], &cols[3], &cols[4]);
        let zip = |y: &[f64]| {
            time.iter()
                .copied()
                .zip(y.iter().copied())
                .collect::<Vec<_>>()
        };
        let mut emit = |name: &str, text: String| -> CliResult<()> {
            let path = dir.join(name);
            fs::write(&path, text)?;
            written.push(path);
            Ok(())
        };
        emit(
            "energy.svg",
            svg::chart(
                "energy",
                "t",
                "energy",
                &[
                    Series {
                        label: "original W".into(),
                        points: zip(energy),
                    },
                    Series {
                        label: "modified R".into(),
                        points: zip(aux),
                    },
                ],
                false,
            ),
        )?;
        if let Some(&a0) = area.first() {
            let loss: Vec<f64> = area.iter().map(|a| (a - a0) / a0).collect();
            emit(
                "area.svg",
                svg::chart(
                    "relative area change against step 1",
                    "t",
                    "(A - A1) / A1",
                    &[Series {
                        label: "area".into(),
                        points: zip(&loss),
                    }],
                    false,
                ),
            )?;
        }
        emit(
            "mesh_ratio.svg",
            svg::chart(
                "mesh ratio",
                "t",
                "max h / min h",
                &[Series {
                    label: "mesh ratio".into(),
                    points: zip(mesh),
                }],
                false,
            ),
        )?;
    }
    Ok(written)
}

/// `name  description` lines for every preset.
pub fn preset_listing() -> String {
    let all = presets::all();
    let width = all.iter().map(|p| p.name.len()).max().unwrap_or(0);
    all.iter()
        .map(|p| format!("{:width$}  {}\n", p.name, p.description))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_names() {
        let axes = parse_grid("scheme=bdf1_sav,bdf2_sav; r=2,3").unwrap();
        let points = grid_points(&axes);
        assert_eq!(points.len(), 4);
        assert_eq!(
            points[1],
            vec![
                ("scheme".into(), "bdf1_sav".into()),
                ("r".into(), "3".into())
            ]
        );
        assert_eq!(point_dir(1, &points[1]), "001_scheme-bdf1_sav_r-3");
        let dt = grid_points(&parse_grid("dt=1/160").unwrap());
        assert_eq!(point_dir(0, &dt[0]), "000_dt-1-160");
    }

    #[test]
    fn bad_grids() {
        for bad in ["", " ; ", "r", "N=3", "r=2;r=3", "r=2,,3"] {
            assert!(
                matches!(parse_grid(bad), Err(CliError::Validation(_))),
                "{bad:?}"
            );
        }
        let big = format!(
            "r={};dt={}",
            vec!["2"; 30].join(","),
            vec!["0.1"; 30].join(",")
        );
        assert!(parse_grid(&big).is_err());
    }

    #[test]
    fn beta_zero_means_isotropic() {
        let mut raw =
            RawConfig::parse(&presets::find("fig5_2_aniso05_r3").unwrap().text, "p").unwrap();
        raw = apply_point(&raw, &[("beta".into(), "0".into())]).unwrap();
        assert_eq!(raw.get("gamma.kind"), Some("isotropic"));
        assert_eq!(raw.get("gamma.beta"), None);
    }
}
