//! Assembly of the coupled position / chemical-potential systems.
//!
//! Unknowns are ordered `[x_0.., y_0.., mu_0..]` over the `n` nodes of the
//! curve (`n = N` closed, `N + 1` open). Rows `0..n` hold the kinematic
//! equation tested with nodal hats, rows `n..3n` the two components of the
//! potential equation. All products are mass lumped.

use nalgebra::Matrix2;

use crate::curve::{perp, segment_frame, CurveState, SegmentFrame, Topology, Vec2};
use crate::energy::SurfaceEnergy;
use crate::error::{Error, Result};
use crate::linalg::{self, LinearSystem};
use crate::ssd::SubstrateConfig;

/// Coefficients of the discrete time derivative
/// `(alpha X^{m+1} - history) / dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStencil {
    pub alpha: f64,
    pub history: Vec<Vec2>,
}

impl TimeStencil {
    pub fn bdf1(current: &CurveState) -> Self {
        TimeStencil {
            alpha: 1.0,
            history: current.nodes().to_vec(),
        }
    }

    pub fn bdf2(current: &CurveState, previous: &CurveState) -> Result<Self> {
        if current.node_count() != previous.node_count() {
            return Err(Error::DimensionMismatch {
                expected: current.node_count(),
                found: previous.node_count(),
            });
        }
        Ok(TimeStencil {
            alpha: 1.5,
            history: current
                .nodes()
                .iter()
                .zip(previous.nodes())
                .map(|(c, p)| c * 2.0 - p * 0.5)
                .collect(),
        })
    }
}

/// Everything needed to assemble one implicit solve.
#[derive(Clone, Copy, Debug)]
pub struct StepProblem<'a> {
    /// Geometry of the curve the products are integrated over.
    pub frame: &'a SegmentFrame,
    /// Per-segment `|h_j| n_j` used in the kinematic equation.
    pub normals: &'a [Vec2],
    pub stencil: &'a TimeStencil,
    pub energy: &'a SurfaceEnergy,
    pub dt: f64,
    pub substrate: Option<&'a SubstrateConfig>,
}

/// Outcome of one implicit solve, before any scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub curve: CurveState,
    pub mu: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `|h_j| n_j` for every segment of a frame.
pub fn weighted_normals(frame: &SegmentFrame) -> Vec<Vec2> {
    frame
        .normals
        .iter()
        .zip(&frame.lengths)
        .map(|(n, l)| n * *l)
        .collect()
}

/// `|h_j| n_j` built from the average of the segment vectors of two curves,
/// the half-step normal of the area-conserving scheme.
pub fn half_step_normals(next: &CurveState, current: &CurveState) -> Vec<Vec2> {
    let sign = current.topology().normal_sign();
    (0..current.segment_count())
        .map(|k| perp(next.segment_vector(k) + current.segment_vector(k)) * (0.5 * sign))
        .collect()
}

/// Mass-lumped nodal weights `1/2 (|h_{i}| n_{i} + |h_{i+1}| n_{i+1})`.
fn nodal_weights(frame: &SegmentFrame, normals: &[Vec2]) -> Vec<Vec2> {
    let mut w = vec![Vec2::zeros(); frame.node_count()];
    for (k, n) in normals.iter().enumerate() {
        let (a, b) = frame.segment_nodes(k);
        w[a] += n * 0.5;
        w[b] += n * 0.5;
    }
    w
}

fn check_problem(p: &StepProblem<'_>) -> Result<()> {
    let segments = p.frame.segment_count();
    if p.normals.len() != segments {
        return Err(Error::DimensionMismatch {
            expected: segments,
            found: p.normals.len(),
        });
    }
    if p.stencil.history.len() != p.frame.node_count() {
        return Err(Error::DimensionMismatch {
            expected: p.frame.node_count(),
            found: p.stencil.history.len(),
        });
    }
    if !(p.dt > 0.0 && p.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {}",
            p.dt
        )));
    }
    if let Some((index, &length)) = p
        .frame
        .lengths
        .iter()
        .enumerate()
        .find(|(_, &l)| !(l > 0.0))
    {
        return Err(Error::DegenerateSegment { index, length });
    }
    Ok(())
}

/// Shared part of both assemblies. `pinned` lists nodes whose y row is
/// replaced by `y = 0`.
fn assemble_common(p: &StepProblem<'_>, pinned: &[usize]) -> Result<LinearSystem> {
    check_problem(p)?;
    let frame = p.frame;
    let n = frame.node_count();
    let (xs, ys, mus) = (0, n, 2 * n);
    let mut sys = LinearSystem::new(3 * n);
    let w = nodal_weights(frame, p.normals);
    let inv_dt = 1.0 / p.dt;
    let a_dt = p.stencil.alpha * inv_dt;

    for i in 0..n {
        sys.add(i, xs + i, a_dt * w[i].x);
        sys.add(i, ys + i, a_dt * w[i].y);
        sys.add_rhs(i, inv_dt * w[i].dot(&p.stencil.history[i]));
        sys.add(n + i, mus + i, w[i].x);
        if !pinned.contains(&i) {
            sys.add(2 * n + i, mus + i, w[i].y);
        }
    }

    let stiff: Vec<Matrix2<f64>> = frame
        .angles
        .iter()
        .map(|&theta| p.energy.stiffness_matrix(theta))
        .collect::<Result<_>>()?;

    for k in 0..frame.segment_count() {
        let (a, b) = frame.segment_nodes(k);
        let inv_l = 1.0 / frame.lengths[k];
        sys.add(a, mus + a, inv_l);
        sys.add(a, mus + b, -inv_l);
        sys.add(b, mus + b, inv_l);
        sys.add(b, mus + a, -inv_l);

        let c = stiff[k] * inv_l;
        for d in 0..2 {
            let row_off = n + d * n;
            for e in 0..2 {
                let col_off = e * n;
                let v = c[(d, e)];
                if d == 0 || !pinned.contains(&b) {
                    sys.add(row_off + b, col_off + b, -v);
                    sys.add(row_off + b, col_off + a, v);
                }
                if d == 0 || !pinned.contains(&a) {
                    sys.add(row_off + a, col_off + b, v);
                    sys.add(row_off + a, col_off + a, -v);
                }
            }
        }
    }

    for &i in pinned {
        sys.add(2 * n + i, ys + i, 1.0);
    }
    Ok(sys)
}

/// System for a closed curve.
pub fn assemble_closed(p: &StepProblem<'_>) -> Result<LinearSystem> {
    if p.frame.topology != Topology::Closed {
        return Err(Error::InvalidCurve(
            "assemble_closed needs a closed curve".into(),
        ));
    }
    let mut sys = assemble_common(p, &[])?;
    sys.finalize();
    Ok(sys)
}

/// System for an open curve on the substrate, with contact-line friction,
/// substrate tension and pinned contact heights.
pub fn assemble_ssd(p: &StepProblem<'_>) -> Result<LinearSystem> {
    if p.frame.topology != Topology::OpenOnSubstrate {
        return Err(Error::InvalidCurve(
            "assemble_ssd needs an open curve".into(),
        ));
    }
    let substrate = p
        .substrate
        .ok_or_else(|| Error::BadSubstrate("no substrate configuration".into()))?;
    substrate.validate()?;
    let n = p.frame.node_count();
    let last = n - 1;
    let mut sys = assemble_common(p, &[0, last])?;

    let friction = 1.0 / (substrate.eta * p.dt);
    let alpha = p.stencil.alpha;
    sys.add(n, 0, -alpha * friction);
    sys.add_rhs(n, substrate.sigma - friction * p.stencil.history[0].x);
    sys.add(n + last, last, -alpha * friction);
    sys.add_rhs(
        n + last,
        -substrate.sigma - friction * p.stencil.history[last].x,
    );
    sys.finalize();
    Ok(sys)
}

pub fn assemble(p: &StepProblem<'_>) -> Result<LinearSystem> {
    match p.frame.topology {
        Topology::Closed => assemble_closed(p),
        Topology::OpenOnSubstrate => assemble_ssd(p),
    }
}

/// Assembles, solves and unpacks one implicit step.
pub fn solve_step(p: &StepProblem<'_>) -> Result<SolveResult> {
    let sys = assemble(p)?;
    let sol = linalg::solve(&sys)?;
    let n = p.frame.node_count();
    let mut nodes: Vec<Vec2> = (0..n).map(|i| Vec2::new(sol.x[i], sol.x[n + i])).collect();
    let topology = p.frame.topology;
    if topology == Topology::OpenOnSubstrate {
        let tol = 1e-12 * (1.0 + p.frame.perimeter());
        for i in [0, n - 1] {
            if nodes[i].y.abs() > tol {
                return Err(Error::InvalidCurve(format!(
                    "contact point {i} left the substrate (y = {:e})",
                    nodes[i].y
                )));
            }
            nodes[i].y = 0.0;
        }
    }
    let curve = CurveState::new(nodes, topology)?;
    Ok(SolveResult {
        curve,
        mu: sol.x[2 * n..].to_vec(),
        residual: sol.residual,
        iterations: 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Convergence threshold relative to the curve diameter.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            rel_tol: 1e-12,
            max_iter: 50,
        }
    }
}

/// Area-conserving BDF1 solve. The half-step normal depends on the unknown
/// curve, so it is lagged and the linear solve repeated until successive
/// iterates agree.
pub fn csav_fixed_point(
    current: &CurveState,
    energy: &SurfaceEnergy,
    dt: f64,
    substrate: Option<&SubstrateConfig>,
    options: FixedPointOptions,
) -> Result<SolveResult> {
    let frame = segment_frame(current)?;
    let stencil = TimeStencil::bdf1(current);
    let tol = options.rel_tol * current.diameter();
    let mut normals = weighted_normals(&frame);
    let mut previous = current.clone();
    let mut last_increment = f64::INFINITY;
    let mut before_last = f64::INFINITY;
    for iteration in 1..=options.max_iter {
        let problem = StepProblem {
            frame: &frame,
            normals: &normals,
            stencil: &stencil,
            energy,
            dt,
            substrate,
        };
        let mut result = solve_step(&problem)?;
        let increment = result
            .curve
            .nodes()
            .iter()
            .zip(previous.nodes())
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        if increment <= tol {
            result.iterations = iteration;
            return Ok(result);
        }
        before_last = last_increment;
        last_increment = increment;
        normals = half_step_normals(&result.curve, current);
        previous = result.curve;
    }
    Err(Error::FixedPointDiverged {
        iterations: options.max_iter,
        last_increment,
        growing: last_increment > before_last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{enclosed_area, initial_shape, Shape};
    use std::f64::consts::PI;

    fn bdf1_problem<'a>(
        frame: &'a SegmentFrame,
        normals: &'a [Vec2],
        stencil: &'a TimeStencil,
        energy: &'a SurfaceEnergy,
        dt: f64,
        substrate: Option<&'a SubstrateConfig>,
    ) -> StepProblem<'a> {
        StepProblem {
            frame,
            normals,
            stencil,
            energy,
            dt,
            substrate,
        }
    }

    #[test]
    fn closed_dimension() {
        let sq = initial_shape(
            &Shape::Rectangle {
                width: 1.0,
                height: 1.0,
            },
            4,
        )
        .unwrap();
        let frame = segment_frame(&sq).unwrap();
        let normals = weighted_normals(&frame);
        let stencil = TimeStencil::bdf1(&sq);
        let e = SurfaceEnergy::isotropic();
        let sys =
            assemble_closed(&bdf1_problem(&frame, &normals, &stencil, &e, 1e-3, None)).unwrap();
        assert_eq!(sys.dim(), 12);
    }

    #[test]
    fn circle_potential_is_curvature() {
        let circle = initial_shape(&Shape::Ellipse { a: 1.0, b: 1.0 }, 64).unwrap();
        let frame = segment_frame(&circle).unwrap();
        let normals = weighted_normals(&frame);
        let stencil = TimeStencil::bdf1(&circle);
        let e = SurfaceEnergy::isotropic();
        let res = solve_step(&bdf1_problem(&frame, &normals, &stencil, &e, 1e-4, None)).unwrap();
        for mu in &res.mu {
            assert!((mu - 1.0).abs() < 5e-3, "mu = {mu}");
        }
    }

    #[test]
    fn ssd_pins_contact_heights() {
        let semi = initial_shape(&Shape::SemiEllipse { a: 1.0, b: 1.0 }, 4).unwrap();
        let frame = segment_frame(&semi).unwrap();
        let normals = weighted_normals(&frame);
        let stencil = TimeStencil::bdf1(&semi);
        let e = SurfaceEnergy::isotropic();
        let sub = SubstrateConfig::new((0.75 * PI).cos(), 100.0).unwrap();
        let p = bdf1_problem(&frame, &normals, &stencil, &e, 1e-3, Some(&sub));
        let sys = assemble_ssd(&p).unwrap();
        assert_eq!(sys.dim(), 15);
        for node in [0, 4] {
            let row = 10 + node;
            assert_eq!(sys.row(row), vec![(5 + node, 1.0)]);
            assert_eq!(sys.rhs()[row], 0.0);
        }
        let res = solve_step(&p).unwrap();
        assert_eq!(res.curve.nodes()[0].y, 0.0);
        assert_eq!(res.curve.nodes()[4].y, 0.0);
    }

    #[test]
    fn ssd_needs_substrate() {
        let semi = initial_shape(&Shape::SemiEllipse { a: 1.0, b: 1.0 }, 8).unwrap();
        let frame = segment_frame(&semi).unwrap();
        let normals = weighted_normals(&frame);
        let stencil = TimeStencil::bdf1(&semi);
        let e = SurfaceEnergy::isotropic();
        let p = bdf1_problem(&frame, &normals, &stencil, &e, 1e-3, None);
        assert!(matches!(assemble_ssd(&p), Err(Error::BadSubstrate(_))));
        let bad = SubstrateConfig {
            sigma: 0.0,
            eta: -1.0,
        };
        let p = bdf1_problem(&frame, &normals, &stencil, &e, 1e-3, Some(&bad));
        assert!(matches!(assemble_ssd(&p), Err(Error::BadSubstrate(_))));
    }

    #[test]
    fn csav_on_a_circle_converges_fast() {
        let circle = initial_shape(&Shape::Ellipse { a: 1.0, b: 1.0 }, 64).unwrap();
        let res = csav_fixed_point(
            &circle,
            &SurfaceEnergy::isotropic(),
            1e-6,
            None,
            FixedPointOptions::default(),
        )
        .unwrap();
        assert!(res.iterations <= 3);
    }

    #[test]
    fn csav_conserves_intermediate_area() {
        let ellipse = initial_shape(&Shape::Ellipse { a: 2.0, b: 1.0 }, 40).unwrap();
        let res = csav_fixed_point(
            &ellipse,
            &SurfaceEnergy::isotropic(),
            1e-2,
            None,
            FixedPointOptions::default(),
        )
        .unwrap();
        assert!((enclosed_area(&res.curve) - enclosed_area(&ellipse)).abs() < 1e-10);
    }

    #[test]
    fn csav_iteration_budget() {
        let coarse = initial_shape(
            &Shape::Rectangle {
                width: 4.0,
                height: 0.5,
            },
            12,
        )
        .unwrap();
        let res = csav_fixed_point(
            &coarse,
            &SurfaceEnergy::isotropic(),
            1e-2,
            None,
            FixedPointOptions {
                rel_tol: 1e-12,
                max_iter: 1,
            },
        );
        assert!(matches!(
            res,
            Err(Error::FixedPointDiverged { iterations: 1, .. })
        ));
    }

    #[test]
    fn bdf2_stencil() {
        let a = initial_shape(&Shape::Ellipse { a: 1.0, b: 1.0 }, 8).unwrap();
        let b = a.scaled(2.0);
        let s = TimeStencil::bdf2(&b, &a).unwrap();
        assert_eq!(s.alpha, 1.5);
        assert_eq!(s.history[0], Vec2::new(3.5, 0.0));
    }
}
