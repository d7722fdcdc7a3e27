//! Named configurations reproducing the published experiments.

/// A preset is configuration text plus a one-line description.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub text: String,
}

const SIGMA: &str = "cos(3*pi/4)";
const SCHEMES: &str = "bdf1_sav,bdf1_csav,bdf2_sav";

#[derive(Clone, Copy)]
enum Flow {
    Sdf,
    Ssd,
}

#[derive(Clone, Copy)]
enum Start {
    Ellipse,
    Rectangle,
}

struct Builder {
    lines: Vec<String>,
}

impl Builder {
    fn new(flow: Flow, start: Start, scheme: &str, n: usize, dt: &str, t: &str) -> Self {
        let mut lines = vec![
            format!(
                "flow = {}",
                match flow {
                    Flow::Sdf => "sdf",
                    Flow::Ssd => "ssd",
                }
            ),
            format!("scheme = {scheme}"),
            format!("N = {n}"),
            format!("dt = {dt}"),
            format!("T = {t}"),
        ];
        let shape = match (flow, start) {
            (Flow::Sdf, Start::Ellipse) => "ellipse",
            (Flow::Ssd, Start::Ellipse) => "semi_ellipse",
            (Flow::Sdf, Start::Rectangle) => "rectangle",
            (Flow::Ssd, Start::Rectangle) => "substrate_rectangle",
        };
        lines.push(format!("shape.kind = {shape}"));
        match start {
            Start::Ellipse => lines.extend(["shape.a = 2".into(), "shape.b = 1".into()]),
            Start::Rectangle => lines.extend(["shape.width = 4".into(), "shape.height = 1".into()]),
        }
        if let Flow::Ssd = flow {
            lines.push(format!("substrate.sigma_expr = {SIGMA}"));
            lines.push("substrate.eta = 100".into());
        }
        Builder { lines }
    }

    fn set(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }

    fn beta(self, beta: &str) -> Self {
        if beta == "0" {
            self.set("gamma.kind", "isotropic")
        } else {
            self.set("gamma.kind", "four_fold").set("gamma.beta", beta)
        }
    }

    fn finish(self, name: &str, description: String) -> Preset {
        let mut text = format!("# {description}\nname = {name}\n");
        for line in self.lines {
            text.push_str(&line);
            text.push('\n');
        }
        Preset {
            name: name.to_string(),
            description,
            text,
        }
    }
}

const BETAS: [(&str, &str); 3] = [("iso", "0"), ("aniso05", "0.05"), ("aniso10", "0.1")];

fn flow_parts(fig_sdf: u32) -> [(Flow, u32, &'static str); 2] {
    [
        (Flow::Sdf, fig_sdf, "closed curve"),
        (Flow::Ssd, fig_sdf + 6, "film on substrate"),
    ]
}

/// All presets in listing order.
pub fn all() -> Vec<Preset> {
    let mut out = Vec::new();
    for (flow, fig, what) in flow_parts(1) {
        for (scheme, r) in [("bdf1_sav", 2), ("bdf2_sav", 3)] {
            for (tag, beta) in [("iso", "0"), ("aniso", "0.05")] {
                let tag_scheme = &scheme[..4];
                out.push(
                    Builder::new(flow, Start::Ellipse, scheme, 512, "0.025", "0.1")
                        .beta(beta)
                        .set("r", r)
                        .set("converge.dt_list", "1/40,1/80,1/160,1/320,1/640")
                        .finish(
                            &format!("fig5_{fig}_{tag_scheme}_{tag}"),
                            format!("temporal convergence, {what}, {scheme} r={r}, beta={beta}"),
                        ),
                );
            }
        }
    }
    for (flow, fig, what) in flow_parts(2) {
        for (tag, beta) in BETAS {
            for r in [3, 6] {
                out.push(
                    Builder::new(flow, Start::Ellipse, "bdf1_sav", 80, "0.00625", "2")
                        .beta(beta)
                        .set("r", r)
                        .set("sweep.grid", format!("scheme={SCHEMES}"))
                        .finish(
                            &format!("fig5_{fig}_{tag}_r{r}"),
                            format!("relative area loss, {what}, beta={beta}, r={r}"),
                        ),
                );
            }
        }
        out.push(
            Builder::new(flow, Start::Ellipse, "bdf1_sav", 80, "0.00625", "2")
                .set(
                    "sweep.grid",
                    format!("scheme={SCHEMES};beta=0,0.05,0.1;r=3,6"),
                )
                .finish(
                    &format!("fig5_{fig}"),
                    format!("relative area loss, {what}, full scheme x beta x r grid"),
                ),
        );
    }
    for (flow, fig, what) in flow_parts(3) {
        for (tag, beta) in BETAS {
            out.push(
                Builder::new(flow, Start::Ellipse, "bdf1_sav", 640, "0.0015625", "1")
                    .beta(beta)
                    .set("r", 6)
                    .set("sweep.grid", format!("scheme={SCHEMES}"))
                    .finish(
                        &format!("fig5_{fig}_{tag}"),
                        format!("original and modified energy, {what}, beta={beta}"),
                    ),
            );
        }
    }
    for (flow, fig, what) in flow_parts(4) {
        for (tag, beta) in &BETAS[..2] {
            out.push(
                Builder::new(flow, Start::Ellipse, "bdf1_sav", 128, "0.001", "2")
                    .beta(beta)
                    .set("r", 3)
                    .set("sweep.grid", format!("scheme={SCHEMES}"))
                    .finish(
                        &format!("fig5_{fig}_{tag}"),
                        format!("mesh ratio, {what}, beta={beta}"),
                    ),
            );
        }
    }
    for (flow, fig, what) in flow_parts(5) {
        for (tag, beta) in BETAS {
            out.push(
                Builder::new(flow, Start::Ellipse, "bdf1_csav", 80, "0.00625", "2")
                    .beta(beta)
                    .set("r", 2)
                    .set("sweep.grid", "r=2,3,4")
                    .finish(
                        &format!("fig5_{fig}_{tag}"),
                        format!("bdf1_csav area loss against r, {what}, beta={beta}"),
                    ),
            );
        }
    }
    for (flow, fig, what) in flow_parts(6) {
        let n = match flow {
            Flow::Sdf => 640,
            Flow::Ssd => 64,
        };
        out.push(
            Builder::new(flow, Start::Ellipse, "bdf1_sav", n, "0.00625", "1")
                .beta("0.1")
                .set("r", 3)
                .set(
                    "sweep.grid",
                    format!("scheme={SCHEMES};dt=1/160,1/320,1/640"),
                )
                .finish(
                    &format!("fig5_{fig}"),
                    format!("energy gap against dt, {what}, beta=0.1"),
                ),
        );
    }
    for (flow, fig, what) in [
        (Flow::Sdf, 13, "closed curve"),
        (Flow::Ssd, 14, "film on substrate"),
    ] {
        for (tag, beta) in BETAS {
            out.push(
                Builder::new(flow, Start::Rectangle, "bdf1_sav", 72, "0.001", "6")
                    .beta(beta)
                    .set("r", 3)
                    .set("sweep.grid", format!("scheme={SCHEMES}"))
                    .finish(
                        &format!("fig5_{fig}_{tag}"),
                        format!(
                            "morphological evolution from a 4x1 rectangle, {what}, beta={beta}"
                        ),
                    ),
            );
        }
    }
    out
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{RawConfig, RunConfig};

    #[test]
    fn every_preset_validates() {
        let presets = all();
        for p in &presets {
            let raw = RawConfig::parse(&p.text, &p.name).unwrap();
            let c =
                RunConfig::from_raw(&raw, "unused").unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(c.name, p.name);
        }
        let mut names: Vec<_> = presets.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), presets.len(), "duplicate preset names");
    }

    #[test]
    fn published_parameters() {
        let c = |name: &str| {
            let p = find(name).unwrap();
            RunConfig::from_raw(&RawConfig::parse(&p.text, name).unwrap(), name).unwrap()
        };
        let area = c("fig5_2_iso_r6");
        assert_eq!(
            (area.segments, area.dt, area.r, area.steps),
            (80, 1.0 / 160.0, 6, 320)
        );
        let energy = c("fig5_9_aniso10");
        assert_eq!(
            (energy.segments, energy.dt, energy.r),
            (640, 1.0 / 640.0, 6)
        );
        assert_eq!(
            energy.substrate.unwrap().sigma,
            (0.75 * std::f64::consts::PI).cos()
        );
        let morph = c("fig5_14_iso");
        assert_eq!((morph.segments, morph.dt, morph.steps), (72, 1e-3, 6000));
        assert_eq!(c("fig5_12").segments, 64);
    }
}
