//! Sparse assemblies checked entry by entry against a dense brute-force
//! assembly built from hat functions and per-element quadrature.

mod common;

use common::{assembly_mismatch, perturbed};

use curveflow::assembly::{assemble, solve_step, weighted_normals, StepProblem, TimeStencil};
use curveflow::curve::segment_frame;
use curveflow::{CurveState, Shape, SubstrateConfig, SurfaceEnergy, Vec2};

fn check(label: &str, curve: &CurveState, beta: Option<f64>, bdf2: bool, csav: bool) {
    let worst = assembly_mismatch(curve, beta, bdf2, csav);
    assert!(worst <= 1e-13, "{label}: mismatch {worst:e}");
}

#[test]
fn dense_oracle_closed_isotropic() {
    for n in 3..=8 {
        let c = perturbed(&Shape::Ellipse { a: 2.0, b: 1.0 }, n, n as u64);
        for bdf2 in [false, true] {
            check(
                &format!("closed iso N={n} bdf2={bdf2}"),
                &c,
                None,
                bdf2,
                false,
            );
        }
    }
}

#[test]
fn dense_oracle_closed_anisotropic() {
    for n in 3..=8 {
        let c = perturbed(&Shape::Ellipse { a: 2.0, b: 1.0 }, n, 10 + n as u64);
        for beta in [0.05, 0.1] {
            for bdf2 in [false, true] {
                check(
                    &format!("closed beta={beta} N={n} bdf2={bdf2}"),
                    &c,
                    Some(beta),
                    bdf2,
                    false,
                );
            }
        }
    }
}

#[test]
fn dense_oracle_substrate() {
    for n in 3..=7 {
        let c = perturbed(&Shape::SemiEllipse { a: 2.0, b: 1.0 }, n, 20 + n as u64);
        for beta in [None, Some(0.05)] {
            for bdf2 in [false, true] {
                check(
                    &format!("ssd beta={beta:?} N={n} bdf2={bdf2}"),
                    &c,
                    beta,
                    bdf2,
                    false,
                );
            }
        }
    }
}

#[test]
fn dense_oracle_half_step_normals() {
    let c = perturbed(&Shape::Ellipse { a: 2.0, b: 1.0 }, 7, 5);
    check("closed csav", &c, None, false, true);
    let c = perturbed(&Shape::SemiEllipse { a: 2.0, b: 1.0 }, 6, 6);
    check("ssd csav", &c, Some(0.05), false, true);
}

#[test]
fn contact_height_rows_are_unit() {
    let c = perturbed(&Shape::SemiEllipse { a: 2.0, b: 1.0 }, 8, 3);
    let frame = segment_frame(&c).unwrap();
    let normals = weighted_normals(&frame);
    let stencil = TimeStencil::bdf1(&c);
    let sub = SubstrateConfig::new(-0.3, 100.0).unwrap();
    let energy = SurfaceEnergy::four_fold(0.05).unwrap();
    let sys = assemble(&StepProblem {
        frame: &frame,
        normals: &normals,
        stencil: &stencil,
        energy: &energy,
        dt: 0.01,
        substrate: Some(&sub),
    })
    .unwrap();
    let n = c.node_count();
    for i in [0, n - 1] {
        let row = 2 * n + i;
        let entries: Vec<(usize, f64)> = sys
            .row(row)
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        assert_eq!(entries, vec![(n + i, 1.0)]);
        assert_eq!(sys.rhs()[row], 0.0);
    }
}

fn solve_bdf1(curve: &CurveState, energy: &SurfaceEnergy) -> (CurveState, Vec<f64>) {
    let frame = segment_frame(curve).unwrap();
    let normals = weighted_normals(&frame);
    let stencil = TimeStencil::bdf1(curve);
    let out = solve_step(&StepProblem {
        frame: &frame,
        normals: &normals,
        stencil: &stencil,
        energy,
        dt: 0.01,
        substrate: None,
    })
    .unwrap();
    (out.curve, out.mu)
}

#[test]
fn translation_moves_the_solution_rigidly() {
    let c = perturbed(&Shape::Ellipse { a: 2.0, b: 1.0 }, 24, 7);
    let shift = Vec2::new(3.25, -1.5);
    for energy in [
        SurfaceEnergy::isotropic(),
        SurfaceEnergy::four_fold(0.05).unwrap(),
    ] {
        let (x0, mu0) = solve_bdf1(&c, &energy);
        let (x1, mu1) = solve_bdf1(&c.translated(shift), &energy);
        for (p, q) in x0.nodes().iter().zip(x1.nodes()) {
            assert!((q - p - shift).norm() < 1e-10);
        }
        for (a, b) in mu0.iter().zip(&mu1) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn anisotropic_form_with_unit_density_reduces_to_isotropic() {
    // beta = 0 with S = 2 S_0 = 2 gives B = I.
    let c = perturbed(&Shape::Ellipse { a: 2.0, b: 1.0 }, 32, 8);
    let flat = SurfaceEnergy::four_fold(0.0).unwrap();
    let (x_iso, mu_iso) = solve_bdf1(&c, &SurfaceEnergy::isotropic());
    let (x_flat, mu_flat) = solve_bdf1(&c, &flat);
    for (a, b) in mu_iso.iter().zip(&mu_flat) {
        assert!((a - b).abs() < 1e-10);
    }
    for (p, q) in x_iso.nodes().iter().zip(x_flat.nodes()) {
        assert!((p - q).norm() < 1e-10);
    }
}
