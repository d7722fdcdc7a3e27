//! Behaviour of the time steppers on short runs.

use std::f64::consts::PI;

use curveflow::curve::enclosed_area;
use curveflow::ssd::{contact_angles, young_force};
use curveflow::stepper::NoObserver;
use curveflow::{
    initial_shape, run, Flow, SavState, Scheme, Shape, SubstrateConfig, SurfaceEnergy,
};

fn substrate() -> SubstrateConfig {
    SubstrateConfig::new((0.75 * PI).cos(), 100.0).unwrap()
}

fn start(scheme: Scheme, flow: Flow, beta: f64, n: usize, dt: f64, r: u32) -> SavState {
    let shape = match flow {
        Flow::ClosedSdf => Shape::Ellipse { a: 2.0, b: 1.0 },
        Flow::Ssd(_) => Shape::SemiEllipse { a: 2.0, b: 1.0 },
    };
    let energy = if beta == 0.0 {
        SurfaceEnergy::isotropic()
    } else {
        SurfaceEnergy::four_fold(beta).unwrap()
    };
    SavState::new(
        initial_shape(&shape, n).unwrap(),
        scheme,
        r,
        dt,
        flow,
        energy,
    )
    .unwrap()
}

#[test]
fn modified_energy_never_increases() {
    let mut cases = Vec::new();
    for scheme in Scheme::ALL {
        for flow in [Flow::ClosedSdf, Flow::Ssd(substrate())] {
            for (beta, n, dt) in [
                (0.0, 16, 1e-2),
                (0.05, 64, 1e-3),
                (0.1, 256, 1e-4),
                (0.05, 16, 1e-4),
            ] {
                cases.push((scheme, flow, beta, n, dt));
            }
        }
    }
    std::thread::scope(|s| {
        for (scheme, flow, beta, n, dt) in cases {
            s.spawn(move || {
                let state = start(scheme, flow, beta, n, dt, 3);
                let traj = run(state, 20.0 * dt, &mut NoObserver).unwrap();
                let r0 = traj.records[0].aux;
                let mut w_max: f64 = 0.0;
                for pair in traj.records.windows(2) {
                    assert!(
                        pair[1].aux <= pair[0].aux + 1e-12 * r0,
                        "{scheme} {flow:?} beta {beta} N {n} dt {dt}: R rose at step {}",
                        pair[1].step
                    );
                    assert!(pair[1].aux >= 0.0 && pair[1].xi >= 0.0);
                    w_max = w_max.max(pair[1].energy);
                }
                assert!(w_max.is_finite());
            });
        }
    });
}

#[test]
fn area_conserving_scheme_keeps_the_intermediate_area() {
    for flow in [Flow::ClosedSdf, Flow::Ssd(substrate())] {
        let mut state = start(Scheme::Bdf1Csav, flow, 0.05, 48, 1.0 / 160.0, 3);
        for _ in 0..30 {
            let before = enclosed_area(&state.curve);
            let (next, diag) = state.step().unwrap();
            assert!(
                (diag.area_bar - before).abs() < 1e-10 * before,
                "{flow:?}: {} vs {before}",
                diag.area_bar
            );
            state = next;
        }
    }
}

#[test]
fn corrected_curve_is_the_scaled_intermediate() {
    for scheme in Scheme::ALL {
        let mut state = start(scheme, Flow::ClosedSdf, 0.05, 40, 1e-2, 3);
        for _ in 0..5 {
            let bar = state.intermediate().unwrap().curve;
            let (next, diag) = state.step().unwrap();
            for (x, xb) in next.curve.nodes().iter().zip(bar.nodes()) {
                assert_eq!(x.x.to_bits(), (xb.x * diag.zeta).to_bits());
                assert_eq!(x.y.to_bits(), (xb.y * diag.zeta).to_bits());
                // Dividing back is exact up to one rounding.
                for (a, b) in [(x.x / diag.zeta, xb.x), (x.y / diag.zeta, xb.y)] {
                    assert!((a - b).abs() <= f64::EPSILON * b.abs());
                }
            }
            state = next;
        }
    }
}

#[test]
fn contact_points_stay_on_the_substrate() {
    for scheme in Scheme::ALL {
        let state = start(scheme, Flow::Ssd(substrate()), 0.05, 32, 1e-2, 3);
        let traj = run(state, 0.5, &mut NoObserver).unwrap();
        for d in traj.steps() {
            let (xl, xr) = d.contact.unwrap();
            assert!(xl < xr);
        }
        let nodes = traj.final_state.curve.nodes();
        assert_eq!(nodes[0].y, 0.0);
        assert_eq!(nodes[nodes.len() - 1].y, 0.0);
    }
}

#[test]
fn contact_point_moves_with_the_young_force() {
    // A semicircle starts at a right angle, below the equilibrium angle, so
    // the left contact point is pushed to the right.
    let sub = substrate();
    let energy = SurfaceEnergy::isotropic();
    let curve = initial_shape(&Shape::SemiEllipse { a: 1.0, b: 1.0 }, 32).unwrap();
    let mut state = SavState::new(
        curve,
        Scheme::Bdf1Sav,
        3,
        1e-3,
        Flow::Ssd(sub),
        energy.clone(),
    )
    .unwrap();
    for _ in 0..50 {
        let (theta_l, _) = contact_angles(&state.curve).unwrap();
        let force = young_force(&energy, theta_l, sub.sigma);
        let x_before = state.curve.nodes()[0].x;
        let (next, _) = state.step().unwrap();
        let x_after = next.curve.nodes()[0].x;
        assert!(force > 0.0, "f = {force}");
        assert!(
            x_after > x_before,
            "left contact moved from {x_before} to {x_after}"
        );
        state = next;
    }
}

#[test]
fn energy_gap_shrinks_with_the_step() {
    // Isotropic closed flow over a fixed horizon; the gap is first order.
    let mut gaps = Vec::new();
    for dt in [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0] {
        let state = start(Scheme::Bdf1Sav, Flow::ClosedSdf, 0.0, 64, dt, 3);
        let traj = run(state, 0.25, &mut NoObserver).unwrap();
        gaps.push(
            traj.records
                .iter()
                .map(|d| d.energy_gap)
                .fold(0.0, f64::max),
        );
    }
    for w in gaps.windows(2) {
        assert!(w[0] / w[1] >= 1.5, "gaps {gaps:?}");
    }
}
