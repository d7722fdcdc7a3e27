//! Helpers shared by the integration tests: a deterministic generator and a
//! dense brute-force assembly built from hat functions.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use curveflow::assembly::{
    assemble, half_step_normals, weighted_normals, StepProblem, TimeStencil,
};
use curveflow::curve::segment_frame;
use curveflow::{initial_shape, CurveState, Shape, SubstrateConfig, SurfaceEnergy, Topology, Vec2};

/// Deterministic generator for the perturbations.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn uniform(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// A mildly perturbed ellipse or semi-ellipse with `segments` segments.
pub fn perturbed(shape: &Shape, segments: usize, seed: u64) -> CurveState {
    let base = initial_shape(shape, segments).unwrap();
    let mut rng = Lcg(seed);
    let topology = base.topology();
    let last = base.node_count() - 1;
    let nodes = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let dx = 0.08 * (rng.uniform() - 0.5);
            let dy = 0.08 * (rng.uniform() - 0.5);
            let on_substrate = topology == Topology::OpenOnSubstrate && (i == 0 || i == last);
            Vec2::new(p.x + dx, if on_substrate { 0.0 } else { p.y + dy })
        })
        .collect();
    CurveState::new(nodes, topology).unwrap()
}

/// Dense oracle of the stiffness matrix in the tangent frame:
/// `B = g t t^T + g' (t p^T + p t^T) + (S - g) p p^T` with `p = t^perp`.
fn oracle_b(beta: Option<f64>, c_s: f64, t: Vec2) -> [[f64; 2]; 2] {
    let Some(beta) = beta else {
        return [[1.0, 0.0], [0.0, 1.0]];
    };
    let theta = t.y.atan2(t.x);
    let g = 1.0 + beta * (4.0 * theta).cos();
    let gp = -4.0 * beta * (4.0 * theta).sin();
    let s = c_s * (g * g + gp * gp) / g;
    let p = [-t.y, t.x];
    let t = [t.x, t.y];
    let mut b = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            b[i][j] = g * t[i] * t[j] + gp * (t[i] * p[j] + p[i] * t[j]) + (s - g) * p[i] * p[j];
        }
    }
    b
}

struct Oracle {
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

/// Brute-force assembly: loops over elements, evaluates the hat-function
/// derivatives and applies the trapezoidal rule at both element ends.
#[allow(clippy::too_many_arguments)]
fn oracle_assembly(
    curve: &CurveState,
    normals: &[Vec2],
    alpha: f64,
    history: &[Vec2],
    dt: f64,
    beta: Option<f64>,
    substrate: Option<(f64, f64)>,
) -> Oracle {
    let pts = curve.nodes();
    let closed = curve.topology() == Topology::Closed;
    let n = pts.len();
    let segs = if closed { n } else { n - 1 };
    let dim = 3 * n;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    let x = |i: usize| i;
    let y = |i: usize| n + i;
    let mu = |i: usize| 2 * n + i;

    for k in 0..segs {
        let (ia, ib) = (k, (k + 1) % n);
        let h = pts[ib] - pts[ia];
        let len = (h.x * h.x + h.y * h.y).sqrt();
        let t = h / len;
        let b = oracle_b(beta, 2.0, t);
        // d(phi)/ds on this element for the two hats.
        let ds = [(ia, -1.0 / len), (ib, 1.0 / len)];
        let nk = normals[k];
        for (node, _) in ds {
            // Lumped (X . n, phi_node) at the element end `node`.
            let w = 0.5 * nk;
            a[node][x(node)] += alpha / dt * w.x;
            a[node][y(node)] += alpha / dt * w.y;
            rhs[node] += w.dot(&history[node]) / dt;
            // Lumped (mu n, omega) with omega = phi_node e_d.
            a[n + node][mu(node)] += w.x;
            a[2 * n + node][mu(node)] += w.y;
        }
        for &(i, dphi_i) in &ds {
            for &(j, dphi_j) in &ds {
                // (d_s mu, d_s phi_i) over the element.
                a[i][mu(j)] += len * dphi_i * dphi_j;
                // -(B d_s X, d_s (phi_i e_d)).
                for d in 0..2 {
                    a[n + d * n + i][x(j)] -= len * b[d][0] * dphi_j * dphi_i;
                    a[n + d * n + i][y(j)] -= len * b[d][1] * dphi_j * dphi_i;
                }
            }
        }
    }

    if let Some((sigma, eta)) = substrate {
        let last = n - 1;
        // Substrate tension and contact friction act on the x test functions.
        a[n][x(0)] -= alpha / (eta * dt);
        rhs[n] += sigma - history[0].x / (eta * dt);
        a[n + last][x(last)] -= alpha / (eta * dt);
        rhs[n + last] += -sigma - history[last].x / (eta * dt);
        // Contact heights are prescribed strongly.
        for i in [0, last] {
            a[2 * n + i] = vec![0.0; dim];
            a[2 * n + i][y(i)] = 1.0;
            rhs[2 * n + i] = 0.0;
        }
    }
    Oracle { matrix: a, rhs }
}

fn oracle_normals(curve: &CurveState) -> Vec<Vec2> {
    let pts = curve.nodes();
    let closed = curve.topology() == Topology::Closed;
    let n = pts.len();
    let segs = if closed { n } else { n - 1 };
    (0..segs)
        .map(|k| {
            let h = pts[(k + 1) % n] - pts[k];
            // Outward for a counter-clockwise closed curve, upward for the film.
            if closed {
                Vec2::new(h.y, -h.x)
            } else {
                Vec2::new(-h.y, h.x)
            }
        })
        .collect()
}

/// Largest entry-wise mismatch, relative to `max(1, |oracle|)`, over the
/// matrix and the right-hand side.
fn mismatch(sparse: &[Vec<f64>], rhs: &[f64], oracle: &Oracle) -> f64 {
    let dim = oracle.matrix.len();
    if sparse.len() != dim || rhs.len() != dim {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let (s, o) = (sparse[i][j], oracle.matrix[i][j]);
            worst = worst.max((s - o).abs() / o.abs().max(1.0));
        }
        worst = worst.max((rhs[i] - oracle.rhs[i]).abs() / oracle.rhs[i].abs().max(1.0));
    }
    worst
}

/// Assembles one step with the library and with the oracle and returns the
/// largest mismatch. `beta = None` selects the isotropic energy.
pub fn assembly_mismatch(curve: &CurveState, beta: Option<f64>, bdf2: bool, csav: bool) -> f64 {
    let energy = match beta {
        Some(b) => SurfaceEnergy::four_fold(b).unwrap(),
        None => SurfaceEnergy::isotropic(),
    };
    let substrate = SubstrateConfig::new((0.75 * PI).cos(), 100.0).unwrap();
    let open = curve.topology() == Topology::OpenOnSubstrate;
    let frame = segment_frame(curve).unwrap();
    let previous = perturbed(
        &if open {
            Shape::SemiEllipse { a: 2.0, b: 1.0 }
        } else {
            Shape::Ellipse { a: 2.0, b: 1.0 }
        },
        curve.segment_count(),
        99,
    );
    let stencil = if bdf2 {
        TimeStencil::bdf2(curve, &previous).unwrap()
    } else {
        TimeStencil::bdf1(curve)
    };
    let normals = if csav {
        half_step_normals(&previous, curve)
    } else {
        weighted_normals(&frame)
    };
    let oracle_n: Vec<Vec2> = if csav {
        oracle_normals(&previous)
            .iter()
            .zip(oracle_normals(curve))
            .map(|(p, c)| (p + c) * 0.5)
            .collect()
    } else {
        oracle_normals(curve)
    };
    let normal_gap = normals
        .iter()
        .zip(&oracle_n)
        .map(|(s, o)| (s - o).norm() / (1.0 + o.norm()))
        .fold(0.0, f64::max);
    let dt = 1.0 / 160.0;
    let problem = StepProblem {
        frame: &frame,
        normals: &normals,
        stencil: &stencil,
        energy: &energy,
        dt,
        substrate: open.then_some(&substrate),
    };
    let sys = assemble(&problem).unwrap();
    let history: Vec<Vec2> = if bdf2 {
        curve
            .nodes()
            .iter()
            .zip(previous.nodes())
            .map(|(c, p)| 2.0 * c - 0.5 * p)
            .collect()
    } else {
        curve.nodes().to_vec()
    };
    let oracle = oracle_assembly(
        curve,
        &oracle_n,
        if bdf2 { 1.5 } else { 1.0 },
        &history,
        dt,
        beta,
        open.then_some((substrate.sigma, substrate.eta)),
    );
    mismatch(&sys.to_dense(), sys.rhs(), &oracle).max(normal_gap)
}
