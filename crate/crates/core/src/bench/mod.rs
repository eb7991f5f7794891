//! Benchmark problems, runs, sweeps and report emission.

mod problems;
mod report;
mod run;

pub use problems::{flexo_problem, nano_pattern, nano_problem, tilt_twist_problem, twist_problem, ProblemKind, ProblemSpec};
pub use report::{
    csv_string, gamma_csv, read_csv, sig6, write_csv, GammaRow, LevelSummary, ReportRow, RunReport, TableReport, CSV_COLUMNS,
    DASH,
};
pub use run::{
    decades, finest_newton_systems, reproduce, run, state_energy, sweep_gamma, sweep_zeta, table_configs, RunConfig, RunResult,
    SolverChoice,
};
