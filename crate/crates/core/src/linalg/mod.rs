//! Linear solvers for the Newton systems.

pub mod direct;
pub mod krylov;
pub mod multigrid;

pub use direct::{direct_solve, DirectSolver};
pub use multigrid::{mg_solve, InnerSolve, MgConfig, MgHierarchy};
