//! Driving benchmark runs, sweeps and table reproductions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::problems::{ProblemKind, ProblemSpec};
use super::report::{GammaRow, LevelSummary, ReportRow, RunReport, TableReport};
use crate::assembly::{Assembler, BlockSystem, Layout};
use crate::energy::{deviation_stats, flexo_energy, frank_energy, FlexoEnergy};
use crate::error::{Error, Result};
use crate::linalg::{direct_solve, mg_solve, MgConfig, MgHierarchy};
use crate::mesh::Mesh;
use crate::nonlinear::{nested_iteration, LinearSolver, Method, NewtonConfig, SolveReport, Stepping};
use crate::scalar::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Direct,
    Mg,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub method: Method,
    pub stepping: Stepping,
    /// Penalty weight; required by the penalty methods only.
    pub zeta: Option<f64>,
    /// Number of grids; the finest has `coarse_n * 2^(levels-1)` cells per side.
    pub levels: usize,
    pub coarse_n: usize,
    /// Nested iteration; without it only the finest grid is solved.
    pub nested: bool,
    pub solver: SolverChoice,
    pub gamma_b: f64,
    pub tol: f64,
    /// Out-of-plane start perturbation; `None` uses the problem default.
    pub perturb: Option<f64>,
    pub max_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Twist,
            method: Method::Lagrangian,
            stepping: Stepping::TrSimple,
            zeta: None,
            levels: 5,
            coarse_n: 8,
            nested: true,
            solver: SolverChoice::Direct,
            gamma_b: 1.2,
            tol: 1e-4,
            perturb: None,
            max_iters: 200,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.method.is_penalty() != self.zeta.is_some() {
            return Err(Error::invalid(if self.zeta.is_some() {
                "a penalty weight only applies to the penalty methods"
            } else {
                "penalty methods need --zeta"
            }));
        }
        if self.levels == 0 || self.coarse_n == 0 {
            return Err(Error::invalid("levels and coarse size must be positive"));
        }
        if self.levels > 12 {
            return Err(Error::invalid("at most 12 levels are supported"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.gamma_b > 0.0) {
            return Err(Error::invalid("gamma_b must be positive"));
        }
        Ok(())
    }

    /// Row label: method, stepping, solver and the absence of nested iteration.
    pub fn label(&self) -> String {
        let mut s = format!("{}/{}", self.method.name(), self.stepping.name());
        if self.solver == SolverChoice::Mg {
            s.push_str("/mg");
        }
        if !self.nested {
            s.push_str("/no-ni");
        }
        s
    }

    pub fn finest_cells(&self) -> usize {
        self.coarse_n << (self.levels - 1)
    }

    pub fn mg_config(&self) -> MgConfig<f64> {
        MgConfig { gamma_b: self.gamma_b, coarse_cells: self.coarse_n.min(8), ..MgConfig::default() }
    }

    pub fn newton_config(&self) -> NewtonConfig<f64> {
        let mut c = NewtonConfig::new(self.method, self.stepping);
        c.tolerance = self.tol;
        c.max_iters = self.max_iters;
        c.solver = match self.solver {
            SolverChoice::Direct => LinearSolver::Direct,
            SolverChoice::Mg => LinearSolver::Multigrid(self.mg_config()),
        };
        c
    }

    fn perturbation(&self, spec: &ProblemSpec) -> f64 {
        self.perturb.unwrap_or_else(|| spec.default_perturbation())
    }

    fn coarse_layout(&self, spec: &ProblemSpec) -> Result<(Layout, usize)> {
        let (n, levels) = if self.nested { (self.coarse_n, self.levels) } else { (self.finest_cells(), 1) };
        Ok((spec.layout(Mesh::new(n, n, spec.periodic_x)?, self.method)?, levels))
    }
}

/// A finished run together with its final state.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: RunReport,
    pub solve: Option<SolveReport<f64>>,
    pub state: Vec<f64>,
    pub layout: Option<Layout>,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.report.row.converged
    }
}

/// Reported free energy of a state: `∫ w_F`, or for the flexoelectric
/// problem half the full functional.
pub fn state_energy(spec: &ProblemSpec, layout: &Layout, x: &[f64]) -> Result<(f64, Option<FlexoEnergy<f64>>)> {
    let space = layout.space();
    let field = &x[..layout.field_dofs()];
    match spec.electric {
        Some(ec) => {
            let f = flexo_energy(&space, field, &spec.frank, &ec)?;
            Ok((0.5 * f.total, Some(f)))
        }
        None => Ok((frank_energy(&space, field, &spec.frank)?, None)),
    }
}

/// Executes one configuration. Divergence is reported in the row, solver
/// errors in `report.error`; only invalid configurations fail.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let spec = cfg.problem.spec();
    let model = spec.model(cfg.method, cfg.zeta)?;
    let (coarse, levels) = cfg.coarse_layout(&spec)?;
    let ncfg = cfg.newton_config();
    ncfg.validate()?;
    let perturb = cfg.perturbation(&spec);
    let start = Instant::now();
    let outcome = nested_iteration(model, coarse, levels, &|l: &Layout| spec.initial_guess(l, perturb), &ncfg);
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = RunReport {
        problem: spec.name().to_string(),
        stepping: cfg.stepping.name().to_string(),
        nested: cfg.nested,
        finest_cells: cfg.finest_cells(),
        row: ReportRow::dash(cfg.label(), cfg.zeta, elapsed),
        levels: Vec::new(),
        reference_energy: spec.reference_energy,
        diverged: false,
        flexo: None,
        error: None,
    };
    let solve = match outcome {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{} failed: {e}", cfg.label());
            report.error = Some(e.to_string());
            return Ok(RunResult { report, solve: None, state: Vec::new(), layout: None });
        }
    };
    report.levels = solve
        .levels
        .iter()
        .map(|l| LevelSummary {
            cells: l.cells_x,
            iterations: l.iterations,
            accepted: l.accepted,
            rejected: l.rejected,
            final_residual: l.final_residual(),
            nnz: l.nnz,
            converged: l.converged,
            mg_cycles: l.mg_cycles.clone(),
            residuals: l.residuals.clone(),
        })
        .collect();
    report.diverged = solve.diverged || !solve.converged;
    let layout = solve.layout.expect("solve reports its layout");
    if solve.converged {
        let (energy, flexo) = state_energy(&spec, &layout, &solve.state)?;
        let (lo, hi) = deviation_stats(&layout.space(), &solve.state[..layout.field_dofs()])?;
        report.row.energy = Some(energy);
        report.row.l2_error = if spec.has_analytic() { Some(spec.l2_error(&layout, &solve.state)?) } else { None };
        report.row.min_dev = Some(lo);
        report.row.max_dev = Some(hi);
        report.row.wu = Some(solve.work_units);
        report.row.converged = true;
        report.flexo = flexo;
    }
    Ok(RunResult { state: solve.state.clone(), layout: Some(layout), report, solve: Some(solve) })
}

/// One run per penalty weight; failures become dash rows and the sweep goes on.
pub fn sweep_zeta(base: &RunConfig, zetas: &[f64]) -> Result<TableReport> {
    let mut runs = Vec::with_capacity(zetas.len());
    for &z in zetas {
        let cfg = RunConfig { zeta: Some(z), ..base.clone() };
        runs.push(run(&cfg)?.report);
    }
    Ok(TableReport { title: format!("{} penalty sweep", base.problem), runs })
}

/// Newton systems on the finest grid of `cfg`, starting from the nested
/// iteration solution of the next coarser grid. At most `count` systems are
/// returned; fewer if the iteration converges first.
pub fn finest_newton_systems(cfg: &RunConfig, count: usize) -> Result<Vec<BlockSystem<f64>>> {
    if cfg.method != Method::Lagrangian {
        return Err(Error::invalid("multigrid studies need the multiplier formulation"));
    }
    let spec = cfg.problem.spec();
    let model = spec.model(cfg.method, None)?;
    let perturb = cfg.perturbation(&spec);
    let init = |l: &Layout| spec.initial_guess(l, perturb);
    let coarse = spec.layout(Mesh::new(cfg.coarse_n, cfg.coarse_n, spec.periodic_x)?, cfg.method)?;
    let mut ncfg = cfg.newton_config();
    ncfg.solver = LinearSolver::Direct;
    let (layout, mut x) = if cfg.levels > 1 {
        let pre = nested_iteration(model, coarse, cfg.levels - 1, &init, &ncfg)?;
        let prev = pre.layout.expect("solve reports its layout");
        let fine = prev.refined();
        let mut xf = prev.prolongation::<f64>(&fine)?.mul_vec(&pre.state);
        let bc = init(&fine);
        for (i, m) in fine.dirichlet_mask().into_iter().enumerate() {
            if m {
                xf[i] = bc[i];
            }
        }
        (fine, xf)
    } else {
        (coarse, init(&coarse))
    };
    let asm = Assembler::new(layout, model)?;
    let mut systems = Vec::new();
    while systems.len() < count {
        let sys = asm.system(&x)?;
        if norm2(&sys.rhs) < cfg.tol {
            break;
        }
        let dx = direct_solve(&sys.matrix, &sys.rhs)?;
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        systems.push(sys);
    }
    Ok(systems)
}

/// Average V-cycle counts on the finest-grid Newton systems for each weight.
pub fn sweep_gamma(cfg: &RunConfig, gammas: &[f64]) -> Result<Vec<GammaRow>> {
    if gammas.is_empty() {
        return Ok(Vec::new());
    }
    let systems = finest_newton_systems(cfg, 3)?;
    let mgc = cfg.mg_config();
    let hierarchies = systems
        .iter()
        .map(|s| MgHierarchy::build(s, &mgc))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let c = MgConfig { gamma_b: g, ..mgc };
        let mut cycles = Vec::new();
        let mut converged = true;
        for (h, s) in hierarchies.iter().zip(&systems) {
            let out = mg_solve(h, &s.rhs, &c)?;
            converged &= out.converged;
            cycles.push(out.cycles);
        }
        let avg = if cycles.is_empty() { 0.0 } else { cycles.iter().sum::<usize>() as f64 / cycles.len() as f64 };
        log::info!("gamma_b {g}: cycles {cycles:?}");
        rows.push(GammaRow { gamma_b: g, avg_cycles: avg, cycles, converged });
    }
    Ok(rows)
}

/// Decades `10^lo ..= 10^hi`.
pub fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powi(k)).collect()
}

/// Run configurations behind one of the benchmark tables (3 to 10).
pub fn table_configs(table: u32, base: &RunConfig) -> Result<(String, Vec<RunConfig>)> {
    let with = |problem: ProblemKind, method: Method, stepping: Stepping, zeta: Option<f64>, nested: bool| RunConfig {
        problem,
        method,
        stepping,
        zeta,
        nested,
        solver: SolverChoice::Direct,
        perturb: base.perturb,
        ..base.clone()
    };
    let stats = |p: ProblemKind| {
        let mut v = Vec::new();
        for s in [Stepping::Damped, Stepping::TrSimple] {
            v.push(with(p, Method::Lagrangian, s, None, true));
        }
        for z in decades(1, 9) {
            for s in [Stepping::Damped, Stepping::TrSimple] {
                v.push(with(p, Method::Penalty, s, Some(z), true));
            }
        }
        v
    };
    let renorm = |p: ProblemKind| {
        let mut v = Vec::new();
        for z in decades(1, 6) {
            for s in [Stepping::Damped, Stepping::TrSimple, Stepping::Tr2d] {
                v.push(with(p, Method::PenaltyRenorm, s, Some(z), true));
            }
        }
        v
    };
    let costs = |p: ProblemKind, penalty_tail: bool| {
        let mut v = Vec::new();
        for nested in [false, true] {
            for s in [Stepping::Damped, Stepping::TrSimple] {
                v.push(with(p, Method::Lagrangian, s, None, nested));
            }
        }
        for m in [Method::PenaltyRenorm, Method::Penalty] {
            for nested in [false, true] {
                for s in [Stepping::Damped, Stepping::TrSimple, Stepping::Tr2d] {
                    v.push(with(p, m, s, Some(1e5), nested));
                }
            }
        }
        if penalty_tail {
            for nested in [false, true] {
                for s in [Stepping::Damped, Stepping::TrSimple, Stepping::Tr2d] {
                    v.push(with(p, Method::Penalty, s, Some(1e9), nested));
                }
            }
        }
        v
    };
    let out = match table {
        3 => ("twist: formulations and penalty weights", stats(ProblemKind::Twist)),
        4 => ("twist: renormalized penalty with and without trust regions", renorm(ProblemKind::Twist)),
        5 => ("twist: nested iteration and trust-region cost", costs(ProblemKind::Twist, true)),
        6 => ("tilt-twist: formulations, penalty weights and renormalization", {
            let mut v = stats(ProblemKind::TiltTwist);
            v.extend(renorm(ProblemKind::TiltTwist));
            v
        }),
        7 => ("tilt-twist: nested iteration and trust-region cost", costs(ProblemKind::TiltTwist, false)),
        8 => ("nano: formulations, penalty weights and renormalization", {
            let mut v = stats(ProblemKind::Nano);
            v.extend(renorm(ProblemKind::Nano));
            v
        }),
        9 => ("nano: nested iteration and trust-region cost", costs(ProblemKind::Nano, false)),
        10 => ("flexo: direct and multigrid solves", {
            let mut v = Vec::new();
            for solver in [SolverChoice::Direct, SolverChoice::Mg] {
                for s in [Stepping::Damped, Stepping::TrSimple] {
                    v.push(RunConfig { solver, ..with(ProblemKind::Flexo, Method::Lagrangian, s, None, true) });
                }
            }
            v
        }),
        _ => return Err(Error::invalid(format!("no table {table}; tables 3 to 10 are available"))),
    };
    Ok((out.0.to_string(), out.1))
}

/// Runs every configuration of a table.
pub fn reproduce(table: u32, base: &RunConfig) -> Result<TableReport> {
    let (title, cfgs) = table_configs(table, base)?;
    let mut runs = Vec::with_capacity(cfgs.len());
    for c in &cfgs {
        log::info!("table {table}: {} zeta {:?}", c.label(), c.zeta);
        runs.push(run(c)?.report);
    }
    Ok(TableReport { title, runs })
}
