//! Path integration, monodromy residuals and the Newton solver.

pub mod jacobian;
pub mod neck;
pub mod ode;
pub mod paths;
pub mod residuals;
pub mod solve;

pub use ode::{transport, transport_potential, Curve, Stepper, TaylorOptions};
pub use paths::MonodromyOptions;
pub use residuals::{residuals, Residuals};
pub use solve::{fd_jacobian, newton_solve, IterationRecord, Solution, SolveOptions};
pub use jacobian::{jacobian_check, JacobianCheck};
pub use neck::{log_grid, neck_limit, sample_family, NeckReport};
