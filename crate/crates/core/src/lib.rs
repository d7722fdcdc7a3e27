//! Parametric finite elements for surface diffusion of closed curves and for
//! solid-state dewetting of open curves on a flat substrate, advanced in time
//! by energy-stable scalar-auxiliary-variable schemes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the nodal and segment numbering of the formulas.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod curve;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod ssd;
pub mod stepper;

pub use curve::{initial_shape, CurveState, SegmentFrame, Shape, Topology, Vec2};
pub use energy::{GammaKind, Stability, SurfaceEnergy};
pub use error::{Error, Result};
pub use ssd::SubstrateConfig;
pub use stepper::{run, Flow, SavState, Scheme, StepDiagnostics, Trajectory};
