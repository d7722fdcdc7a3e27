//! Run configuration.
//!
//! The file format is flat `key = value` text. Keys may be written dotted
//! (`gamma.beta = 0.05`) or grouped under a `[gamma]` header. `#` starts a
//! comment. Later `--set key=value` overrides replace file values.

use std::collections::BTreeMap;
use std::path::PathBuf;

use curveflow::curve::fmt_f64;
use curveflow::stepper::{step_count, MAX_R};
use curveflow::{
    initial_shape, CurveState, Flow, GammaKind, Scheme, Shape, SubstrateConfig, SurfaceEnergy,
};

use crate::{expr, CliError, CliResult};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("name", "run name, used as the output subdirectory"),
    ("flow", "sdf (closed curve) or ssd (film on a substrate)"),
    ("scheme", "bdf1_sav, bdf1_csav or bdf2_sav"),
    (
        "r",
        "correction exponent, 2..=8 (default: 2 for BDF1, 3 for BDF2)",
    ),
    ("N", "number of segments, at least 8"),
    ("dt", "time step"),
    ("T", "final time, a multiple of dt"),
    ("gamma.kind", "isotropic or four_fold"),
    (
        "gamma.beta",
        "anisotropy strength of 1 + beta cos(fold theta)",
    ),
    ("gamma.fold", "symmetry fold (default 4)"),
    (
        "gamma.stability_factor",
        "multiple of the minimal stabilizer (default 2)",
    ),
    ("substrate.sigma", "substrate tension as a number"),
    (
        "substrate.sigma_expr",
        "substrate tension as an expression, e.g. cos(3*pi/4)",
    ),
    ("substrate.eta", "contact-line mobility (default 100)"),
    (
        "shape.kind",
        "ellipse, semi_ellipse, rectangle, substrate_rectangle or file",
    ),
    ("shape.a", "ellipse semi-axis along x"),
    ("shape.b", "ellipse semi-axis along y"),
    ("shape.width", "rectangle width"),
    ("shape.height", "rectangle height"),
    ("shape.path", "curve CSV for shape.kind = file"),
    (
        "output.root",
        "output root directory (default runs; CURVEFLOW_OUT overrides)",
    ),
    (
        "output.snapshots",
        "number of curve snapshots per run (default 10)",
    ),
    (
        "converge.dt_list",
        "comma-separated halving time steps for `converge`",
    ),
    (
        "sweep.grid",
        "grid for `sweep`, e.g. scheme=bdf1_sav,bdf2_sav;r=3,6",
    ),
];

pub const DEFAULT_SNAPSHOTS: usize = 10;
pub const MIN_RUN_SEGMENTS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    origin: String,
}

/// Key/value pairs with the place each value came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    /// Parses configuration text; `source` names it in error messages.
    pub fn parse(text: &str, source: &str) -> CliResult<Self> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (index, line) in text.lines().enumerate() {
            let lineno = index + 1;
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    CliError::Validation(format!(
                        "{source} line {lineno}: unterminated section header"
                    ))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("{source} line {lineno}: expected `key = value`"))
            })?;
            let key = key.trim();
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let origin = format!("{source} line {lineno}");
            if let Some(previous) = raw.entries.get(&full) {
                return Err(CliError::Validation(format!(
                    "{origin}: key `{full}` already set at {}",
                    previous.origin
                )));
            }
            raw.insert(&full, value.trim(), origin)?;
        }
        Ok(raw)
    }

    fn insert(&mut self, key: &str, value: &str, origin: String) -> CliResult<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Validation(format!(
                "{origin}: unknown key `{key}`"
            )));
        }
        if value.is_empty() {
            return Err(CliError::Validation(format!(
                "{origin}: key `{key}` has no value"
            )));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Validation(format!(
                "override {assignment:?} is not of the form key=value"
            ))
        })?;
        self.insert(key.trim(), value.trim(), format!("--set {}", key.trim()))
    }

    /// Sets a key programmatically, replacing any earlier value.
    pub fn set_value(&mut self, key: &str, value: &str, origin: &str) -> CliResult<()> {
        self.insert(key, value, origin.to_string())
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn origin(&self, key: &str) -> String {
        self.entries
            .get(key)
            .map(|e| e.origin.clone())
            .unwrap_or_else(|| "configuration".into())
    }

    fn invalid(&self, key: &str, what: impl std::fmt::Display) -> CliError {
        CliError::Validation(format!("{}: key `{key}` {what}", self.origin(key)))
    }

    fn required(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Validation(format!("missing required key `{key}`")))
    }

    fn number(&self, key: &str) -> CliResult<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.invalid(key, format!("must be a finite number, got {v:?}"))),
            },
        }
    }

    fn required_number(&self, key: &str) -> CliResult<f64> {
        self.required(key)?;
        Ok(self.number(key)?.unwrap())
    }

    fn positive(&self, key: &str) -> CliResult<f64> {
        let x = self.required_number(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.invalid(key, format!("must be positive, got {x}")))
        }
    }

    fn integer(&self, key: &str) -> CliResult<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                self.invalid(key, format!("must be a nonnegative integer, got {v:?}"))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Sdf,
    Ssd,
}

impl FlowKind {
    pub fn label(self) -> &'static str {
        match self {
            FlowKind::Sdf => "sdf",
            FlowKind::Ssd => "ssd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaConfig {
    Isotropic,
    FourFold { beta: f64, fold: u32 },
}

/// A validated configuration for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub flow: FlowKind,
    pub scheme: Scheme,
    pub r: u32,
    pub segments: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub gamma: GammaConfig,
    pub stability_factor: f64,
    pub substrate: Option<SubstrateConfig>,
    /// The substrate tension as written, when given as an expression.
    pub sigma_expr: Option<String>,
    pub shape: Shape,
    pub shape_path: Option<PathBuf>,
    pub output_root: PathBuf,
    pub snapshots: usize,
    pub dt_list: Option<Vec<f64>>,
    pub grid: Option<String>,
}

/// Parses a comma-separated list of step sizes; entries may be `p/q`.
pub fn parse_dt_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let value = match item.split_once('/') {
                Some((p, q)) => match (p.trim().parse::<f64>(), q.trim().parse::<f64>()) {
                    (Ok(p), Ok(q)) => p / q,
                    _ => f64::NAN,
                },
                None => item.parse::<f64>().unwrap_or(f64::NAN),
            };
            if value > 0.0 && value.is_finite() {
                Ok(value)
            } else {
                Err(CliError::Validation(format!(
                    "time step list entry {item:?} is not a positive number or fraction"
                )))
            }
        })
        .collect()
}

impl RunConfig {
    /// Validates raw settings. `default_name` is used when `name` is absent.
    pub fn from_raw(raw: &RawConfig, default_name: &str) -> CliResult<Self> {
        let name = raw.get("name").unwrap_or(default_name).to_string();
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(raw.invalid("name", format!("{name:?} is not a plain directory name")));
        }

        let flow = match raw.required("flow")? {
            "sdf" => FlowKind::Sdf,
            "ssd" => FlowKind::Ssd,
            other => return Err(raw.invalid("flow", format!("must be sdf or ssd, got {other:?}"))),
        };
        let scheme: Scheme = raw
            .required("scheme")?
            .parse()
            .map_err(|e| raw.invalid("scheme", e))?;
        let r = match raw.integer("r")? {
            Some(r) => r as u32,
            None => scheme.default_r(),
        };
        if !(2..=MAX_R).contains(&r) {
            return Err(raw.invalid("r", format!("must lie in 2..={MAX_R}, got {r}")));
        }

        raw.required("N")?;
        let segments = raw.integer("N")?.unwrap() as usize;
        if segments < MIN_RUN_SEGMENTS {
            return Err(raw.invalid(
                "N",
                format!("must be at least {MIN_RUN_SEGMENTS}, got {segments}"),
            ));
        }
        let dt = raw.positive("dt")?;
        let t_final = raw.required_number("T")?;
        let steps = step_count(t_final, dt).map_err(|e| raw.invalid("T", e))?;

        let gamma = match raw.get("gamma.kind").unwrap_or("isotropic") {
            "isotropic" => {
                for key in ["gamma.beta", "gamma.fold"] {
                    if raw.get(key).is_some() {
                        return Err(raw.invalid(key, "needs gamma.kind = four_fold"));
                    }
                }
                GammaConfig::Isotropic
            }
            "four_fold" => {
                let beta = raw.required_number("gamma.beta")?;
                let fold = raw.integer("gamma.fold")?.unwrap_or(4);
                if fold == 0 {
                    return Err(raw.invalid("gamma.fold", "must be at least 1"));
                }
                GammaConfig::FourFold {
                    beta,
                    fold: fold as u32,
                }
            }
            other => {
                return Err(raw.invalid(
                    "gamma.kind",
                    format!("must be isotropic or four_fold, got {other:?}"),
                ))
            }
        };
        let stability_factor = raw
            .number("gamma.stability_factor")?
            .unwrap_or(SurfaceEnergy::DEFAULT_STABILITY_FACTOR);
        if stability_factor <= 0.0 {
            return Err(raw.invalid("gamma.stability_factor", "must be positive"));
        }

        let mut sigma_expr = None;
        let substrate = match flow {
            FlowKind::Sdf => {
                for key in ["substrate.sigma", "substrate.sigma_expr", "substrate.eta"] {
                    if raw.get(key).is_some() {
                        return Err(raw.invalid(key, "only applies to flow = ssd"));
                    }
                }
                None
            }
            FlowKind::Ssd => {
                let sigma =
                    match (raw.get("substrate.sigma"), raw.get("substrate.sigma_expr")) {
                        (Some(_), Some(_)) => {
                            return Err(raw.invalid(
                                "substrate.sigma_expr",
                                "conflicts with substrate.sigma; give one of them",
                            ))
                        }
                        (Some(_), None) => raw.number("substrate.sigma")?.unwrap(),
                        (None, Some(text)) => {
                            sigma_expr = Some(text.to_string());
                            expr::eval(text).map_err(|e| raw.invalid("substrate.sigma_expr", e))?
                        }
                        (None, None) => return Err(CliError::Validation(
                            "missing required key `substrate.sigma` (or `substrate.sigma_expr`)"
                                .into(),
                        )),
                    };
                let eta = raw.number("substrate.eta")?.unwrap_or(100.0);
                Some(
                    SubstrateConfig::new(sigma, eta)
                        .map_err(|e| CliError::Validation(e.to_string()))?,
                )
            }
        };

        let mut shape_path = None;
        let shape = match raw.required("shape.kind")? {
            "ellipse" => Shape::Ellipse {
                a: raw.positive("shape.a")?,
                b: raw.positive("shape.b")?,
            },
            "semi_ellipse" => Shape::SemiEllipse {
                a: raw.positive("shape.a")?,
                b: raw.positive("shape.b")?,
            },
            "rectangle" => Shape::Rectangle {
                width: raw.positive("shape.width")?,
                height: raw.positive("shape.height")?,
            },
            "substrate_rectangle" => Shape::SubstrateRectangle {
                width: raw.positive("shape.width")?,
                height: raw.positive("shape.height")?,
            },
            "file" => {
                let path = PathBuf::from(raw.required("shape.path")?);
                let file = std::fs::File::open(&path)
                    .map_err(|e| raw.invalid("shape.path", format!("cannot open {path:?}: {e}")))?;
                let (curve, _) = CurveState::read_csv(std::io::BufReader::new(file))
                    .map_err(|e| raw.invalid("shape.path", e))?;
                shape_path = Some(path);
                Shape::Custom {
                    topology: curve.topology(),
                    nodes: curve.into_nodes(),
                }
            }
            other => return Err(raw.invalid("shape.kind", format!("unknown shape {other:?}"))),
        };
        let wants_open = flow == FlowKind::Ssd;
        let is_open = shape.topology() == curveflow::Topology::OpenOnSubstrate;
        if wants_open != is_open {
            return Err(raw.invalid(
                "shape.kind",
                format!(
                    "gives a {} curve, which flow = {} cannot evolve",
                    shape.topology().label(),
                    flow.label()
                ),
            ));
        }

        let output_root = PathBuf::from(raw.get("output.root").unwrap_or("runs"));
        let snapshots = raw
            .integer("output.snapshots")?
            .unwrap_or(DEFAULT_SNAPSHOTS as u64) as usize;
        let dt_list = match raw.get("converge.dt_list") {
            Some(text) => {
                Some(parse_dt_list(text).map_err(|e| raw.invalid("converge.dt_list", e))?)
            }
            None => None,
        };

        let config = RunConfig {
            name,
            flow,
            scheme,
            r,
            segments,
            dt,
            t_final,
            steps,
            gamma,
            stability_factor,
            substrate,
            sigma_expr,
            shape,
            shape_path,
            output_root,
            snapshots,
            dt_list,
            grid: raw.get("sweep.grid").map(str::to_string),
        };
        // Surface the energy and shape checks as configuration errors.
        config.energy()?;
        config.initial_curve()?;
        Ok(config)
    }

    pub fn energy(&self) -> CliResult<SurfaceEnergy> {
        let kind = match self.gamma {
            GammaConfig::Isotropic => GammaKind::Isotropic,
            GammaConfig::FourFold { beta, fold } => GammaKind::FourFoldCosine { beta, fold },
        };
        let energy = SurfaceEnergy::new(kind, self.stability_factor)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if !energy.is_isotropic() {
            energy
                .require_positive_definite()
                .map_err(|e| CliError::Validation(e.to_string()))?;
        }
        Ok(energy)
    }

    pub fn flow(&self) -> Flow {
        match self.substrate {
            Some(sub) => Flow::Ssd(sub),
            None => Flow::ClosedSdf,
        }
    }

    pub fn initial_curve(&self) -> CliResult<CurveState> {
        let shape = match &self.shape {
            Shape::Custom { nodes, topology } => {
                return CurveState::new(nodes.clone(), *topology)
                    .map_err(|e| CliError::Validation(e.to_string()))
            }
            other => other,
        };
        initial_shape(shape, self.segments).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Replaces the step size, keeping `T`.
    pub fn with_dt(&self, dt: f64) -> CliResult<Self> {
        let steps = step_count(self.t_final, dt)
            .map_err(|e| CliError::Validation(format!("time step {}: {e}", fmt_f64(dt))))?;
        Ok(RunConfig {
            dt,
            steps,
            ..self.clone()
        })
    }

    /// Replaces `T` by `steps * dt`.
    pub fn with_steps(&self, steps: usize) -> Self {
        RunConfig {
            steps,
            t_final: steps as f64 * self.dt,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        flow = sdf
        scheme = bdf2_sav
        N = 32
        dt = 0.01
        T = 0.2
        [shape]
        kind = ellipse   # the standard test curve
        a = 2
        b = 1
    ";

    fn parse(text: &str) -> CliResult<RunConfig> {
        RunConfig::from_raw(&RawConfig::parse(text, "test.cfg")?, "test")
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let dotted = "flow = sdf\nscheme = bdf2_sav\nN = 32\ndt = 0.01\nT = 0.2\n\
                      shape.kind = ellipse\nshape.a = 2\nshape.b = 1\n";
        assert_eq!(parse(BASE).unwrap(), parse(dotted).unwrap());
        let c = parse(BASE).unwrap();
        assert_eq!(c.steps, 20);
        assert_eq!(c.r, 3);
        assert_eq!(c.snapshots, DEFAULT_SNAPSHOTS);
    }

    #[test]
    fn missing_dt_is_named() {
        let text = BASE.replace("dt = 0.01", "");
        let err = parse(&text).unwrap_err();
        assert!(
            matches!(&err, CliError::Validation(m) if m.contains("`dt`")),
            "{err}"
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = BASE.replace("N = 32", "N = thirty");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("`N`"), "{err}");
        let err = parse(&format!("{BASE}\nbogus = 1\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown key `shape.bogus`"), "{err}");
    }

    #[test]
    fn final_time_must_be_a_multiple_of_dt() {
        let err = parse(&BASE.replace("T = 0.2", "T = 0.205")).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }

    #[test]
    fn substrate_tension_from_expression() {
        let text = "flow = ssd\nscheme = bdf1_sav\nN = 16\ndt = 0.01\nT = 0.1\n\
                    shape.kind = semi_ellipse\nshape.a = 2\nshape.b = 1\n\
                    substrate.sigma_expr = cos(3*pi/4)\n";
        let c = parse(text).unwrap();
        let sub = c.substrate.unwrap();
        assert_eq!(sub.sigma, (3.0 * std::f64::consts::PI / 4.0).cos());
        assert_eq!(sub.eta, 100.0);
        assert_eq!(c.r, 2);
    }

    #[test]
    fn shape_must_match_flow() {
        let err =
            parse(&BASE.replace("flow = sdf", "flow = ssd\nsubstrate.sigma = 0")).unwrap_err();
        assert!(err.to_string().contains("shape.kind"), "{err}");
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse(BASE, "test.cfg").unwrap();
        raw.set("N=64").unwrap();
        raw.set("gamma.kind=four_fold").unwrap();
        raw.set("gamma.beta=0.05").unwrap();
        let c = RunConfig::from_raw(&raw, "x").unwrap();
        assert_eq!(c.segments, 64);
        assert_eq!(
            c.gamma,
            GammaConfig::FourFold {
                beta: 0.05,
                fold: 4
            }
        );
        assert!(raw.set("nonsense").is_err());
        assert!(raw.set("nope=1").is_err());
    }

    #[test]
    fn fraction_lists() {
        assert_eq!(
            parse_dt_list("1/40, 1/80,0.00625").unwrap(),
            vec![0.025, 0.0125, 0.00625]
        );
        assert!(parse_dt_list("1/0").is_err());
        assert!(parse_dt_list("a").is_err());
    }
}
