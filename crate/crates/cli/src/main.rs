//! `nematic`: command-line driver for the director-field benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nematic_core::bench::{self, ProblemKind, RunConfig, SolverChoice, TableReport};
use nematic_core::nonlinear::{Method, Stepping};

#[derive(Parser, Debug)]
#[command(name = "nematic", version, about = "Nematic liquid crystal equilibrium benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration.
    Run(RunArgs),
    /// Repeat a penalty run for several penalty weights.
    SweepZeta {
        #[command(flatten)]
        args: RunArgs,
        /// Penalty weights, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Average multigrid cycles for several relaxation weights.
    SweepGamma {
        #[command(flatten)]
        args: RunArgs,
        /// Relaxation weights, comma separated (default 1.10 to 2.00 by 0.05).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Option<Vec<f64>>,
    },
    /// Rerun the configurations behind one of the benchmark tables.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..=10))]
        table: u32,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    Twist,
    TiltTwist,
    Nano,
    Flexo,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Lagrangian,
    Penalty,
    PenaltyRenorm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SteppingArg {
    Damped,
    TrSimple,
    #[value(name = "tr-2d")]
    Tr2d,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Direct,
    Mg,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "twist")]
    problem: ProblemArg,
    #[arg(long, value_enum, default_value = "lagrangian")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "tr-simple")]
    stepping: SteppingArg,
    /// Penalty weight (penalty methods only).
    #[arg(long)]
    zeta: Option<f64>,
    /// Number of grids in the nested iteration.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Cells per side on the coarsest grid.
    #[arg(long, default_value_t = 8)]
    coarse_n: usize,
    /// Solve on the finest grid only.
    #[arg(long)]
    no_ni: bool,
    #[arg(long, value_enum, default_value = "direct")]
    solver: SolverArg,
    #[arg(long, default_value_t = 1.2)]
    gamma_b: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Maximum Newton iterations per grid.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Out-of-plane start perturbation amplitude.
    #[arg(long)]
    perturb: Option<f64>,
    /// Log progress to stderr.
    #[arg(long, short)]
    verbose: bool,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            problem: match self.problem {
                ProblemArg::Twist => ProblemKind::Twist,
                ProblemArg::TiltTwist => ProblemKind::TiltTwist,
                ProblemArg::Nano => ProblemKind::Nano,
                ProblemArg::Flexo => ProblemKind::Flexo,
            },
            method: match self.method {
                MethodArg::Lagrangian => Method::Lagrangian,
                MethodArg::Penalty => Method::Penalty,
                MethodArg::PenaltyRenorm => Method::PenaltyRenorm,
            },
            stepping: match self.stepping {
                SteppingArg::Damped => Stepping::Damped,
                SteppingArg::TrSimple => Stepping::TrSimple,
                SteppingArg::Tr2d => Stepping::Tr2d,
            },
            zeta: self.zeta,
            levels: self.levels,
            coarse_n: self.coarse_n,
            nested: !self.no_ni,
            solver: match self.solver {
                SolverArg::Direct => SolverChoice::Direct,
                SolverArg::Mg => SolverChoice::Mg,
            },
            gamma_b: self.gamma_b,
            tol: self.tol,
            perturb: self.perturb,
            max_iters: self.max_iters,
        }
    }
}

fn write_outputs(prefix: &Path, csv: &str, json: &str) -> Result<(), String> {
    let write = |ext: &str, body: &str| {
        let p = prefix.with_extension(ext);
        fs::write(&p, body).map_err(|e| format!("cannot write {}: {e}", p.display()))
    };
    write("csv", csv)?;
    write("json", json)
}

fn emit_table(table: &TableReport, out: Option<&Path>) -> Result<ExitCode, String> {
    let csv = bench::csv_string(&table.rows()).map_err(|e| e.to_string())?;
    print!("{csv}");
    if let Some(p) = out {
        write_outputs(p, &csv, &table.to_json().map_err(|e| e.to_string())?)?;
    }
    for r in &table.runs {
        if let Some(e) = &r.error {
            eprintln!("{}: {e}", r.row.method);
        }
    }
    if table.runs.iter().any(|r| r.error.is_some()) {
        Ok(ExitCode::from(1))
    } else if table.runs.iter().any(|r| !r.row.converged) {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn execute(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config();
            let res = bench::run(&cfg).map_err(|e| e.to_string())?;
            let table = TableReport { title: format!("{} run", cfg.problem), runs: vec![res.report] };
            emit_table(&table, args.out.as_deref())
        }
        Command::SweepZeta { args, values } => {
            let table = bench::sweep_zeta(&args.config(), &values).map_err(|e| e.to_string())?;
            emit_table(&table, args.out.as_deref())
        }
        Command::SweepGamma { args, values } => {
            let values = values.unwrap_or_else(|| (0..=18).map(|k| 1.10 + 0.05 * k as f64).collect());
            let rows = bench::sweep_gamma(&args.config(), &values).map_err(|e| e.to_string())?;
            let csv = bench::gamma_csv(&rows).map_err(|e| e.to_string())?;
            print!("{csv}");
            if let Some(p) = args.out.as_deref() {
                let json = serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?;
                write_outputs(p, &csv, &json)?;
            }
            Ok(if rows.iter().all(|r| r.converged) { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Reproduce { table, args } => {
            let report = bench::reproduce(table, &args.config()).map_err(|e| e.to_string())?;
            emit_table(&report, args.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage errors exit with 1; exit status 2 is reserved for divergence
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let verbose = match &cli.command {
        Command::Run(a) | Command::SweepZeta { args: a, .. } | Command::SweepGamma { args: a, .. } => a.verbose,
        Command::Reproduce { args, .. } => args.verbose,
    };
    env_logger::Builder::new()
        .filter_level(if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
