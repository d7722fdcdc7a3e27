//! Substrate parameters, contact angles and the dewetting energy.

use std::f64::consts::PI;

use crate::curve::{CurveState, SegmentFrame, Topology};
use crate::energy::{discrete_energy, SurfaceEnergy};
use crate::error::{Error, Result};

/// Scan resolution used to bracket roots of the Young force.
pub const ROOT_SCAN: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubstrateConfig {
    /// `(gamma_VS - gamma_FS) / gamma_FV`.
    pub sigma: f64,
    /// Contact-line mobility.
    pub eta: f64,
}

impl SubstrateConfig {
    pub fn new(sigma: f64, eta: f64) -> Result<Self> {
        let config = SubstrateConfig { sigma, eta };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() {
            return Err(Error::BadSubstrate(format!(
                "sigma must be finite, got {}",
                self.sigma
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::BadSubstrate(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// `f(theta; sigma) = gamma cos(theta) - gamma' sin(theta) - sigma`.
pub fn young_force(energy: &SurfaceEnergy, theta: f64, sigma: f64) -> f64 {
    let (g, gp, _) = energy.gamma_eval(theta);
    g * theta.cos() - gp * theta.sin() - sigma
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumAngle {
    /// Smallest root in `(0, pi)`.
    pub angle: f64,
    /// Every root found, increasing.
    pub roots: Vec<f64>,
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Roots of the Young force on `(0, pi)`.
pub fn equilibrium_angle(energy: &SurfaceEnergy, sigma: f64) -> Result<EquilibriumAngle> {
    let f = |theta: f64| young_force(energy, theta, sigma);
    let grid: Vec<f64> = (0..=ROOT_SCAN)
        .map(|i| PI * i as f64 / ROOT_SCAN as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut roots = Vec::new();
    for i in 0..ROOT_SCAN {
        let (fa, fb) = (values[i], values[i + 1]);
        if fb == 0.0 && fa != 0.0 && i + 1 < ROOT_SCAN {
            roots.push(grid[i + 1]);
        } else if fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect(f, grid[i], grid[i + 1]));
        }
    }
    match roots.first() {
        Some(&angle) => Ok(EquilibriumAngle { angle, roots }),
        None => Err(Error::NoRoot),
    }
}

/// `sum |h_j| gamma(theta_j) - (x_r - x_l) sigma`.
pub fn ssd_energy(
    curve: &CurveState,
    frame: &SegmentFrame,
    energy: &SurfaceEnergy,
    substrate: &SubstrateConfig,
) -> Result<f64> {
    let (xl, xr) = curve
        .contact_points()
        .ok_or_else(|| Error::InvalidCurve("the dewetting energy needs an open curve".into()))?;
    Ok(discrete_energy(frame, energy) - (xr - xl) * substrate.sigma)
}

/// Interior angles `(theta_l, theta_r)` at the two contact points, measured
/// from the substrate towards the film.
pub fn contact_angles(curve: &CurveState) -> Result<(f64, f64)> {
    if curve.topology() != Topology::OpenOnSubstrate {
        return Err(Error::InvalidCurve(
            "contact angles need an open curve".into(),
        ));
    }
    let n = curve.segment_count();
    let first = curve.segment_vector(0);
    let last = curve.segment_vector(n - 1);
    for (index, h) in [(0, first), (n - 1, last)] {
        if !(h.norm() > 0.0) {
            return Err(Error::DegenerateSegment {
                index,
                length: h.norm(),
            });
        }
    }
    Ok((first.y.atan2(first.x), (-last.y).atan2(last.x)))
}
