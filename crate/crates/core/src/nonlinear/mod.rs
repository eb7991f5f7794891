//! Newton iterations, trust-region globalization and nested iteration.

mod nested;
mod newton;
pub mod trust_region;

pub use nested::{nested_iteration, work_units, SolveReport};
pub use newton::{
    newton_solve, renormalize, DampingSchedule, LevelReport, LinearSolver, Method, NewtonConfig, Stepping,
};
pub use trust_region::{
    lagrangian_accept_adjust, quadratic_model, rho_lagrangian, rho_penalty, tr_accept_adjust, Ratio,
    TrLagrangianParams, TrPenaltyParams, TrStep, TrSubproblem,
};
