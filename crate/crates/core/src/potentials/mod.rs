//! Model potentials, the unknown vector of the construction and the
//! assembled potential on the plumbed Riemann surface.

pub mod assemble;
pub mod model;
pub mod rational;
pub mod unknowns;

pub use assemble::{Coord, GluedForm, RegularityData, TimeZero};
pub use model::{b_s, f_s, f_s_frame, inv_stereo, model_potential, n_c, n_s, phi_c, phi_s, ModelKind, ModelPotential, SphericalGauge};
pub use rational::{dual, Dual, Mobius, PointForm, Pointwise, Pt, RationalLoopForm};
pub use unknowns::{DirSlot, Layout, UnknownVector};

/// Default plumbing radii.
pub const EPS: f64 = 0.5;
pub const EPS_PRIME: f64 = 0.25;
