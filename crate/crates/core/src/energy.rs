//! Surface energy densities `gamma(theta)` and the stabilized matrix `B(theta)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::curve::SegmentFrame;
use crate::error::{Error, Result};

/// Grid used for the construction-time checks on `gamma`.
pub const CHECK_GRID: usize = 4096;

pub type GammaFn = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;

#[derive(Clone)]
pub enum GammaKind {
    Isotropic,
    /// `1 + beta cos(fold theta)`.
    FourFoldCosine {
        beta: f64,
        fold: u32,
    },
    /// User callback returning `(gamma, gamma', gamma'')`.
    Custom(GammaFn),
}

impl fmt::Debug for GammaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaKind::Isotropic => write!(f, "Isotropic"),
            GammaKind::FourFoldCosine { beta, fold } => f
                .debug_struct("FourFoldCosine")
                .field("beta", beta)
                .field("fold", fold)
                .finish(),
            GammaKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// How the stability function `S(theta)` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stability {
    /// `S = c_s * S_0(theta)`.
    Scaled(f64),
    /// A fixed value, regardless of `theta`. Mostly useful in tests.
    Constant(f64),
}

#[derive(Clone, Debug)]
pub struct SurfaceEnergy {
    kind: GammaKind,
    stability: Stability,
    pi_periodic: bool,
}

/// Result of scanning the smallest eigenvalue of `B(theta)` over a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdReport {
    pub min_eigenvalue: f64,
    pub argmin: f64,
    pub grid_size: usize,
    pub passed: bool,
}

impl SurfaceEnergy {
    pub const DEFAULT_STABILITY_FACTOR: f64 = 2.0;

    pub fn new(kind: GammaKind, stability_factor: f64) -> Result<Self> {
        if !(stability_factor.is_finite() && stability_factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stability factor must be positive, got {stability_factor}"
            )));
        }
        if let GammaKind::FourFoldCosine { beta, fold } = kind {
            if !beta.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "beta must be finite, got {beta}"
                )));
            }
            if fold == 0 {
                return Err(Error::InvalidParameter("fold must be at least 1".into()));
            }
        }
        let mut energy = SurfaceEnergy {
            kind,
            stability: Stability::Scaled(stability_factor),
            pi_periodic: false,
        };
        let mut periodic = true;
        for i in 0..CHECK_GRID {
            let theta = -PI + 2.0 * PI * i as f64 / CHECK_GRID as f64;
            let (g, _, _) = energy.gamma_eval(theta);
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::NonpositiveGamma { theta, value: g });
            }
            let (g_shift, _, _) = energy.gamma_eval(theta + PI);
            if (g - g_shift).abs() > 1e-13 {
                periodic = false;
            }
        }
        energy.pi_periodic = periodic;
        Ok(energy)
    }

    pub fn isotropic() -> Self {
        SurfaceEnergy {
            kind: GammaKind::Isotropic,
            stability: Stability::Scaled(Self::DEFAULT_STABILITY_FACTOR),
            pi_periodic: true,
        }
    }

    /// `1 + beta cos(4 theta)` with the default stability factor.
    pub fn four_fold(beta: f64) -> Result<Self> {
        Self::new(
            GammaKind::FourFoldCosine { beta, fold: 4 },
            Self::DEFAULT_STABILITY_FACTOR,
        )
    }

    /// Replaces the stability rule. The positivity of `B` is not rechecked.
    pub fn with_stability(mut self, stability: Stability) -> Self {
        self.stability = stability;
        self
    }

    pub fn kind(&self) -> &GammaKind {
        &self.kind
    }

    pub fn stability(&self) -> Stability {
        self.stability
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.kind, GammaKind::Isotropic)
    }

    /// Whether `gamma(theta) = gamma(theta + pi)` held on the check grid.
    pub fn is_pi_periodic(&self) -> bool {
        self.pi_periodic
    }

    pub fn gamma_eval(&self, theta: f64) -> (f64, f64, f64) {
        match &self.kind {
            GammaKind::Isotropic => (1.0, 0.0, 0.0),
            GammaKind::FourFoldCosine { beta, fold } => {
                let k = *fold as f64;
                let (s, c) = (k * theta).sin_cos();
                (1.0 + beta * c, -k * beta * s, -k * k * beta * c)
            }
            GammaKind::Custom(f) => f(theta),
        }
    }

    #[inline]
    pub fn gamma(&self, theta: f64) -> f64 {
        self.gamma_eval(theta).0
    }

    /// Smallest stability value for which `B(theta)` is positive definite:
    /// `(gamma^2 + gamma'^2) / gamma`.
    pub fn stability_min(&self, theta: f64) -> Result<f64> {
        let (g, gp, _) = self.gamma_eval(theta);
        if !(g > 0.0) {
            return Err(Error::NonpositiveGamma { theta, value: g });
        }
        Ok((g * g + gp * gp) / g)
    }

    pub fn stability_value(&self, theta: f64) -> f64 {
        match self.stability {
            Stability::Scaled(c) => {
                let (g, gp, _) = self.gamma_eval(theta);
                c * (g * g + gp * gp) / g
            }
            Stability::Constant(s) => s,
        }
    }

    /// `B(theta)` without the definiteness check.
    ///
    /// `B = [[g, -g'], [g', g]] M(theta) + S (I - M(theta)) / 2` with the
    /// reflection `M = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]`.
    pub fn b_matrix_raw(&self, theta: f64) -> Matrix2<f64> {
        let (g, gp, _) = self.gamma_eval(theta);
        let s = self.stability_value(theta);
        let (s2, c2) = (2.0 * theta).sin_cos();
        let p00 = g * c2 - gp * s2;
        let p01 = g * s2 + gp * c2;
        let p11 = gp * s2 - g * c2;
        Matrix2::new(
            p00 + 0.5 * s * (1.0 - c2),
            p01 - 0.5 * s * s2,
            p01 - 0.5 * s * s2,
            p11 + 0.5 * s * (1.0 + c2),
        )
    }

    pub fn b_matrix(&self, theta: f64) -> Result<Matrix2<f64>> {
        let b = self.b_matrix_raw(theta);
        let min_eigenvalue = min_symmetric_eigenvalue(&b);
        if min_eigenvalue > 0.0 {
            Ok(b)
        } else {
            Err(Error::NotPositiveDefinite {
                theta,
                min_eigenvalue,
            })
        }
    }

    /// Matrix used in the stiffness block of the assembly. The isotropic
    /// energy uses the identity, which is what `B` reduces to for `S = 2`.
    pub fn stiffness_matrix(&self, theta: f64) -> Result<Matrix2<f64>> {
        if self.is_isotropic() {
            Ok(Matrix2::identity())
        } else {
            self.b_matrix(theta)
        }
    }

    pub fn pd_check(&self, grid_size: usize) -> PdReport {
        let grid_size = grid_size.max(64);
        let mut min_eigenvalue = f64::INFINITY;
        let mut argmin = 0.0;
        for i in 0..grid_size {
            let theta = -PI + 2.0 * PI * (i as f64 + 1.0) / grid_size as f64;
            let lambda = min_symmetric_eigenvalue(&self.b_matrix_raw(theta));
            if lambda < min_eigenvalue || lambda.is_nan() {
                min_eigenvalue = lambda;
                argmin = theta;
            }
        }
        PdReport {
            min_eigenvalue,
            argmin,
            grid_size,
            passed: min_eigenvalue > 0.0,
        }
    }

    /// Like [`SurfaceEnergy::pd_check`] but as an error.
    pub fn require_positive_definite(&self) -> Result<()> {
        let report = self.pd_check(CHECK_GRID);
        if report.passed {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite {
                theta: report.argmin,
                min_eigenvalue: report.min_eigenvalue,
            })
        }
    }
}

/// Smallest eigenvalue of the symmetric part of a 2x2 matrix.
pub fn min_symmetric_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let half_trace = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    half_trace - half_diff.hypot(b)
}

/// `sum_j |h_j| gamma(theta_j)`.
pub fn discrete_energy(frame: &SegmentFrame, energy: &SurfaceEnergy) -> f64 {
    frame
        .lengths
        .iter()
        .zip(&frame.angles)
        .map(|(&l, &theta)| l * energy.gamma(theta))
        .sum()
}
