//! Sym–Bobenko immersion, meshing, OBJ output and diagnostics.

pub mod diagnose;
pub mod frame;
pub mod immerse;
pub mod mesh;
pub mod patches;

pub use diagnose::{diagnose, monodromy_check, MonodromyCheck, SurfaceReport};
pub use frame::{dress, frame_point, nor, psi, sym, FramePoint};
pub use immerse::{immerse, immerse_central, Immersion};
pub use mesh::{Group, Mesh};
pub use patches::{MeshOptions, PartKind};
