//! Scalar-auxiliary-variable time stepping.
//!
//! Each step solves for an intermediate curve `X_bar`, updates the auxiliary
//! energy `R` through `xi = R / (W(X_bar) + dt D)`, and rescales the
//! intermediate solution by `zeta = 1 - (1 - xi)^r` about the origin.

use std::fmt;
use std::str::FromStr;

use crate::assembly::{
    csav_fixed_point, solve_step, weighted_normals, FixedPointOptions, SolveResult, StepProblem,
    TimeStencil,
};
use crate::curve::{
    enclosed_area, frame_mesh_ratio, segment_frame, stiffness_pairing, CurveState, SegmentFrame,
    Topology,
};
use crate::energy::{discrete_energy, SurfaceEnergy};
use crate::error::{Error, Result};
use crate::ssd::{ssd_energy, SubstrateConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf1Sav,
    Bdf1Csav,
    Bdf2Sav,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Bdf1Sav, Scheme::Bdf1Csav, Scheme::Bdf2Sav];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Bdf1Sav => "bdf1_sav",
            Scheme::Bdf1Csav => "bdf1_csav",
            Scheme::Bdf2Sav => "bdf2_sav",
        }
    }

    /// Smallest exponent `r` that keeps the scheme's order.
    pub fn default_r(self) -> u32 {
        match self {
            Scheme::Bdf1Sav | Scheme::Bdf1Csav => 2,
            Scheme::Bdf2Sav => 3,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bdf1_sav" => Ok(Scheme::Bdf1Sav),
            "bdf1_csav" => Ok(Scheme::Bdf1Csav),
            "bdf2_sav" => Ok(Scheme::Bdf2Sav),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme {other:?} (expected bdf1_sav, bdf1_csav or bdf2_sav)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Flow {
    ClosedSdf,
    Ssd(SubstrateConfig),
}

impl Flow {
    pub fn substrate(&self) -> Option<&SubstrateConfig> {
        match self {
            Flow::ClosedSdf => None,
            Flow::Ssd(s) => Some(s),
        }
    }

    pub fn topology(&self) -> Topology {
        match self {
            Flow::ClosedSdf => Topology::Closed,
            Flow::Ssd(_) => Topology::OpenOnSubstrate,
        }
    }
}

/// Largest supported correction exponent.
pub const MAX_R: u32 = 8;

#[derive(Clone, Debug)]
pub struct SavState {
    pub curve: CurveState,
    /// Curve of the previous step, kept by BDF2 only.
    pub prev_curve: Option<CurveState>,
    /// Auxiliary energy `R^m`.
    pub aux: f64,
    pub initial_aux: f64,
    pub time: f64,
    pub step: usize,
    pub scheme: Scheme,
    pub r: u32,
    pub dt: f64,
    pub flow: Flow,
    pub energy: SurfaceEnergy,
    pub fixed_point: FixedPointOptions,
    /// Scaled chemical potential of the last step; empty initially.
    pub mu: Vec<f64>,
}

/// Per-step record. Index 0 of a trajectory describes the initial curve.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub xi: f64,
    pub zeta: f64,
    /// `R^m`.
    pub aux: f64,
    /// `W^h(X^m)`.
    pub energy: f64,
    /// `|R^m - W^h(X^m)|`.
    pub energy_gap: f64,
    pub area: f64,
    /// Area and energy of the intermediate curve `X_bar`.
    pub area_bar: f64,
    pub energy_bar: f64,
    pub mesh_ratio: f64,
    pub dissipation: f64,
    pub contact: Option<(f64, f64)>,
    pub fp_iters: usize,
    pub residual: f64,
}

/// Original (unmodified) discrete energy of a curve for a flow.
pub fn flow_energy(
    curve: &CurveState,
    frame: &SegmentFrame,
    energy: &SurfaceEnergy,
    flow: &Flow,
) -> Result<f64> {
    match flow {
        Flow::ClosedSdf => Ok(discrete_energy(frame, energy)),
        Flow::Ssd(sub) => ssd_energy(curve, frame, energy, sub),
    }
}

/// `xi = R_prev / (W_bar + dt D)` and `R_next = xi W_bar`.
pub fn xi_update(r_prev: f64, w_bar: f64, dissipation: f64, dt: f64) -> Result<(f64, f64)> {
    if !(w_bar > 0.0) {
        return Err(Error::NonpositiveEnergy(w_bar));
    }
    let xi = r_prev / (w_bar + dt * dissipation);
    Ok((xi, xi * w_bar))
}

/// `1 - (1 - xi)^r`.
pub fn zeta(xi: f64, r: u32) -> f64 {
    1.0 - (1.0 - xi).powi(r as i32)
}

impl SavState {
    pub fn new(
        curve: CurveState,
        scheme: Scheme,
        r: u32,
        dt: f64,
        flow: Flow,
        energy: SurfaceEnergy,
    ) -> Result<Self> {
        if !(2..=MAX_R).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "r must lie in 2..={MAX_R}, got {r}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if curve.topology() != flow.topology() {
            return Err(Error::InvalidCurve(format!(
                "a {} curve cannot evolve under this flow",
                curve.topology().label()
            )));
        }
        if let Flow::Ssd(sub) = &flow {
            sub.validate()?;
        }
        if !energy.is_isotropic() {
            energy.require_positive_definite()?;
        }
        let frame = segment_frame(&curve)?;
        let r0 = flow_energy(&curve, &frame, &energy, &flow)?;
        if !(r0 > 0.0) {
            return Err(Error::NonpositiveEnergy(r0));
        }
        Ok(SavState {
            curve,
            prev_curve: None,
            aux: r0,
            initial_aux: r0,
            time: 0.0,
            step: 0,
            scheme,
            r,
            dt,
            flow,
            energy,
            fixed_point: FixedPointOptions::default(),
            mu: Vec::new(),
        })
    }

    /// Diagnostics of the current state as a step-0 style record.
    pub fn snapshot(&self) -> Result<StepDiagnostics> {
        let frame = segment_frame(&self.curve)?;
        let w = flow_energy(&self.curve, &frame, &self.energy, &self.flow)?;
        let area = enclosed_area(&self.curve);
        Ok(StepDiagnostics {
            step: self.step,
            time: self.time,
            xi: 1.0,
            zeta: 1.0,
            aux: self.aux,
            energy: w,
            energy_gap: (self.aux - w).abs(),
            area,
            area_bar: area,
            energy_bar: w,
            mesh_ratio: frame_mesh_ratio(&frame),
            dissipation: 0.0,
            contact: self.curve.contact_points(),
            fp_iters: 0,
            residual: 0.0,
        })
    }

    fn plain_bdf1(&self, frame: &SegmentFrame) -> Result<SolveResult> {
        let normals = weighted_normals(frame);
        let stencil = TimeStencil::bdf1(&self.curve);
        solve_step(&StepProblem {
            frame,
            normals: &normals,
            stencil: &stencil,
            energy: &self.energy,
            dt: self.dt,
            substrate: self.flow.substrate(),
        })
    }

    /// The intermediate solve for the configured scheme.
    pub fn intermediate(&self) -> Result<SolveResult> {
        match (self.scheme, &self.prev_curve) {
            (Scheme::Bdf1Csav, _) => csav_fixed_point(
                &self.curve,
                &self.energy,
                self.dt,
                self.flow.substrate(),
                self.fixed_point,
            ),
            (Scheme::Bdf2Sav, Some(prev)) => {
                let frame = segment_frame(&self.curve)?;
                let predictor = self.plain_bdf1(&frame)?;
                let frame = segment_frame(&predictor.curve)?;
                let normals = weighted_normals(&frame);
                let stencil = TimeStencil::bdf2(&self.curve, prev)?;
                let mut result = solve_step(&StepProblem {
                    frame: &frame,
                    normals: &normals,
                    stencil: &stencil,
                    energy: &self.energy,
                    dt: self.dt,
                    substrate: self.flow.substrate(),
                })?;
                result.iterations = 2;
                Ok(result)
            }
            _ => {
                let frame = segment_frame(&self.curve)?;
                self.plain_bdf1(&frame)
            }
        }
    }

    /// Advances one step.
    pub fn step(&self) -> Result<(SavState, StepDiagnostics)> {
        let next_step = self.step + 1;
        let solved = self.intermediate()?;
        let bar = &solved.curve;
        let frame_bar = segment_frame(bar)?;

        let mut dissipation = stiffness_pairing(&solved.mu, &solved.mu, &frame_bar)?;
        if let Flow::Ssd(sub) = &self.flow {
            let (xl, xr) = self.curve.contact_points().unwrap();
            let (xl_bar, xr_bar) = bar.contact_points().unwrap();
            let vl = (xl_bar - xl) / self.dt;
            let vr = (xr_bar - xr) / self.dt;
            dissipation += (vl * vl + vr * vr) / sub.eta;
        }
        let w_bar = flow_energy(bar, &frame_bar, &self.energy, &self.flow)?;
        let (xi, aux) = xi_update(self.aux, w_bar, dissipation, self.dt)?;
        if aux > self.aux + 1e-12 * self.initial_aux {
            return Err(Error::EnergyIncreased {
                step: next_step,
                before: self.aux,
                after: aux,
            });
        }
        let z = zeta(xi, self.r);
        if z <= 0.0 && (!self.energy.is_pi_periodic() || self.curve.topology() != Topology::Closed)
        {
            return Err(Error::OrientationHazard {
                step: next_step,
                zeta: z,
            });
        }
        let curve = bar.scaled(z);
        curve.validate()?;
        let mu: Vec<f64> = solved.mu.iter().map(|m| m * z).collect();

        let frame = segment_frame(&curve)?;
        let w = flow_energy(&curve, &frame, &self.energy, &self.flow)?;
        let time = next_step as f64 * self.dt;
        let diag = StepDiagnostics {
            step: next_step,
            time,
            xi,
            zeta: z,
            aux,
            energy: w,
            energy_gap: (aux - w).abs(),
            area: enclosed_area(&curve),
            area_bar: enclosed_area(bar),
            energy_bar: w_bar,
            mesh_ratio: frame_mesh_ratio(&frame),
            dissipation,
            contact: curve.contact_points(),
            fp_iters: solved.iterations,
            residual: solved.residual,
        };
        let prev_curve = match self.scheme {
            Scheme::Bdf2Sav => Some(self.curve.clone()),
            _ => None,
        };
        let next = SavState {
            curve,
            prev_curve,
            aux,
            initial_aux: self.initial_aux,
            time,
            step: next_step,
            scheme: self.scheme,
            r: self.r,
            dt: self.dt,
            flow: self.flow,
            energy: self.energy.clone(),
            fixed_point: self.fixed_point,
            mu,
        };
        Ok((next, diag))
    }
}

/// Receives every state produced by [`run`].
pub trait Observer {
    fn start(&mut self, _state: &SavState, _initial: &StepDiagnostics) -> Result<()> {
        Ok(())
    }

    fn observe(&mut self, state: &SavState, diag: &StepDiagnostics) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&SavState, &StepDiagnostics) -> Result<()>,
{
    fn observe(&mut self, state: &SavState, diag: &StepDiagnostics) -> Result<()> {
        self(state, diag)
    }
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _state: &SavState, _diag: &StepDiagnostics) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `records[0]` is the initial state, `records[m]` follows step `m`.
    pub records: Vec<StepDiagnostics>,
    pub final_state: SavState,
}

impl Trajectory {
    pub fn steps(&self) -> &[StepDiagnostics] {
        &self.records[1..]
    }
}

/// Number of steps `M` with `M dt = T`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "final time must be nonnegative, got {t_final}"
        )));
    }
    let m = (t_final / dt).round();
    if (m * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} is not a multiple of dt = {dt}"
        )));
    }
    Ok(m as usize)
}

/// Advances `state0` to `t_final`.
pub fn run(state0: SavState, t_final: f64, observer: &mut dyn Observer) -> Result<Trajectory> {
    let steps = step_count(t_final, state0.dt)?;
    let initial = state0.snapshot()?;
    observer.start(&state0, &initial)?;
    let mut records = Vec::with_capacity(steps + 1);
    records.push(initial);
    let mut state = state0;
    for _ in 0..steps {
        let (next, diag) = state.step()?;
        observer.observe(&next, &diag)?;
        records.push(diag);
        state = next;
    }
    Ok(Trajectory {
        records,
        final_state: state,
    })
}
