//! Numerical DPW construction of CMC-1 surfaces from balanced planar graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`wiener`]: truncated Laurent series in the loop parameter λ.
//! * [`loopgroup`]: 2×2 loop matrices, Iwasawa splitting, loop log/exp, gauges.
//! * [`graph`]: weighted planar graphs, forces, non-degeneracy, deformation.
//! * [`potentials`]: model potentials, plumbing atlas, assembled potentials.
//! * [`monodromy`]: path integration, residual systems, Newton solver.
//! * [`surface`]: Sym–Bobenko immersion, meshing, OBJ output, diagnostics.
//! * [`suites`]: seeded self-check suites shared by the CLI and the tests.

pub mod error;
pub mod graph;
pub mod linalg;
pub mod loopgroup;
pub mod monodromy;
pub mod potentials;
pub mod suites;
pub mod surface;
pub mod wiener;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C;
