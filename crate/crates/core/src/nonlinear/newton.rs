//! Newton iteration on one mesh.

use serde::{Deserialize, Serialize};

use super::trust_region::{
    lagrangian_accept_adjust, rho_lagrangian, rho_penalty, tr_accept_adjust, Ratio, TrLagrangianParams,
    TrPenaltyParams, TrSubproblem,
};
use crate::assembly::{Assembler, BlockSystem, Layout};
use crate::error::{Error, Result};
use crate::linalg::{mg_solve, DirectSolver, MgConfig, MgHierarchy};
use crate::scalar::{norm2, Real};

/// How the unit-length constraint is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lagrangian,
    Penalty,
    /// Penalty steps followed by nodal renormalization.
    PenaltyRenorm,
}

impl Method {
    pub fn is_penalty(self) -> bool {
        !matches!(self, Method::Lagrangian)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Lagrangian => "lagrangian",
            Method::Penalty => "penalty",
            Method::PenaltyRenorm => "penalty-renorm",
        }
    }
}

/// Globalization of the Newton update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    Damped,
    /// Trust region restricted to the Newton line.
    TrSimple,
    /// Trust region on the span of the gradient and the Newton step.
    Tr2d,
}

impl Stepping {
    pub fn name(self) -> &'static str {
        match self {
            Stepping::Damped => "damped",
            Stepping::TrSimple => "tr-simple",
            Stepping::Tr2d => "tr-2d",
        }
    }
}

/// Solver for the Newton systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearSolver<T> {
    Direct,
    Multigrid(MgConfig<T>),
}

/// Damping factor `min(initial + level * increment, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSchedule<T> {
    pub initial: T,
    pub increment: T,
    pub max: T,
}

impl<T: Real> Default for DampingSchedule<T> {
    fn default() -> Self {
        Self { initial: T::lit(0.2), increment: T::lit(0.2), max: T::one() }
    }
}

impl<T: Real> DampingSchedule<T> {
    pub fn for_level(&self, level: usize) -> T {
        (self.initial + T::from_count(level) * self.increment).min(self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig<T> {
    pub method: Method,
    pub stepping: Stepping,
    pub tolerance: T,
    /// Linearizations allowed per level.
    pub max_iters: usize,
    pub damping: DampingSchedule<T>,
    pub tr_penalty: TrPenaltyParams<T>,
    pub tr_lagrangian: TrLagrangianParams<T>,
    pub solver: LinearSolver<T>,
    /// Growth of the residual over its running minimum flagged as divergence.
    pub divergence_factor: T,
    /// Rejected trust-region trials allowed for one linearization.
    pub max_rejections: usize,
    /// Linearizations performed before the stopping test is consulted.
    pub min_iters: usize,
}

impl<T: Real> NewtonConfig<T> {
    pub fn new(method: Method, stepping: Stepping) -> Self {
        Self {
            method,
            stepping,
            tolerance: T::lit(1e-4),
            max_iters: 200,
            damping: DampingSchedule::default(),
            tr_penalty: TrPenaltyParams::default(),
            tr_lagrangian: TrLagrangianParams::default(),
            solver: LinearSolver::Direct,
            divergence_factor: T::lit(1e4),
            max_rejections: 60,
            min_iters: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(Error::invalid("Newton tolerance must be positive"));
        }
        if self.max_iters == 0 || self.min_iters > self.max_iters {
            return Err(Error::invalid("iteration limits need 0 < max_iters and min_iters <= max_iters"));
        }
        self.tr_penalty.validate()?;
        self.tr_lagrangian.validate()
    }
}

/// Counters and histories of one Newton solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport<T> {
    /// Refinements above the coarsest grid of the run.
    pub level: usize,
    pub cells_x: usize,
    pub cells_y: usize,
    /// Assembled and solved Newton systems.
    pub iterations: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Optimality residual before every linearization and at exit.
    pub residuals: Vec<T>,
    /// Minimized functional after every update.
    pub objectives: Vec<T>,
    pub nnz: usize,
    pub converged: bool,
    pub diverged: bool,
    /// V-cycles per Newton system when multigrid is used.
    pub mg_cycles: Vec<usize>,
}

impl<T: Real> LevelReport<T> {
    pub fn final_residual(&self) -> T {
        self.residuals.last().copied().unwrap_or_else(T::nan)
    }
}

/// Scales every nodal director to unit length; boundary nodes included.
pub fn renormalize<T: Real>(x: &mut [T], layout: &Layout) -> Result<()> {
    let s = layout.stride();
    for node in 0..layout.node_count() {
        let v = &mut x[node * s..node * s + 3];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n >= T::lit(1e-14)) {
            return Err(Error::DegenerateNode { node, norm: n.to_f64_lossy() });
        }
        v.iter_mut().for_each(|c| *c /= n);
    }
    Ok(())
}

struct Linear<T: Real> {
    direct: Option<DirectSolver<T>>,
}

impl<T: Real> Linear<T> {
    fn solve(&mut self, sys: &BlockSystem<T>, solver: &LinearSolver<T>, report: &mut LevelReport<T>) -> Result<Vec<T>> {
        match solver {
            LinearSolver::Direct => {
                match self.direct.as_mut() {
                    Some(d) => d.refactor(&sys.matrix)?,
                    None => self.direct = Some(DirectSolver::new(&sys.matrix)?),
                }
                self.direct.as_ref().expect("factored").solve(&sys.rhs)
            }
            LinearSolver::Multigrid(cfg) => {
                if !sys.layout.has_multiplier() {
                    return Err(Error::invalid("multigrid needs a multiplier formulation"));
                }
                let h = MgHierarchy::build(sys, cfg)?;
                let out = mg_solve(&h, &sys.rhs, cfg)?;
                report.mg_cycles.push(out.cycles);
                if !out.converged {
                    log::warn!("multigrid stopped at relative residual {:e}", out.relative_residual);
                }
                Ok(out.x)
            }
        }
    }
}

fn add_scaled<T: Real>(x: &[T], alpha: T, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(&a, &b)| a + alpha * b).collect()
}

/// Runs Newton's method from `x0` until the optimality residual (or, with
/// renormalization, the relative change of the energy) drops below the
/// tolerance. `level` selects the damping and trust-region start values.
pub fn newton_solve<T: Real>(
    asm: &Assembler<T>,
    x0: Vec<T>,
    cfg: &NewtonConfig<T>,
    level: usize,
) -> Result<(Vec<T>, LevelReport<T>)> {
    cfg.validate()?;
    let layout = *asm.layout();
    if layout.has_multiplier() == cfg.method.is_penalty() {
        return Err(Error::invalid(format!("assembler layout does not match method {}", cfg.method.name())));
    }
    let mesh = layout.mesh();
    let mut report = LevelReport {
        level,
        cells_x: mesh.nx(),
        cells_y: mesh.ny(),
        iterations: 0,
        accepted: 0,
        rejected: 0,
        residuals: Vec::new(),
        objectives: Vec::new(),
        nnz: asm.nnz(),
        converged: false,
        diverged: false,
        mg_cycles: Vec::new(),
    };
    let mut x = x0;
    let renorm = cfg.method == Method::PenaltyRenorm;
    let omega = cfg.damping.for_level(level);
    let mut delta = cfg.tr_penalty.radius_for_level(level);
    let mut w = cfg.tr_lagrangian.scale_for_level(level);
    let mut linear = Linear { direct: None };
    let mut min_res = T::infinity();
    let mut energy = asm.objective(&x)?;
    let mut prev_energy: Option<T> = None;

    loop {
        let g = asm.gradient(&x)?;
        let res = norm2(&g);
        report.residuals.push(res);
        if !res.is_finite() || !energy.is_finite() || res > cfg.divergence_factor * min_res {
            report.diverged = true;
            log::info!("level {level}: divergence flagged at residual {res:e}");
            break;
        }
        min_res = min_res.min(res);
        let converged = if renorm {
            prev_energy.map_or(false, |e0| (e0 / energy - T::one()).abs() < cfg.tolerance) || res < cfg.tolerance
        } else {
            res < cfg.tolerance
        };
        if converged && report.iterations >= cfg.min_iters {
            report.converged = true;
            break;
        }
        if report.iterations >= cfg.max_iters {
            break;
        }
        let sys = asm.system(&x)?;
        report.iterations += 1;
        let dx = linear.solve(&sys, &cfg.solver, &mut report)?;
        prev_energy = Some(energy);

        match (cfg.stepping, cfg.method) {
            (Stepping::Damped, _) => {
                x = add_scaled(&x, omega, &dx);
                report.accepted += 1;
            }
            (_, Method::Lagrangian) => {
                let mut tries = 0;
                loop {
                    let trial = add_scaled(&x, w, &dx);
                    let r1 = norm2(&asm.gradient(&trial)?);
                    let rho = if r1.is_finite() { rho_lagrangian(res, r1, w) } else { T::neg_infinity() };
                    let (accept, w_next) = lagrangian_accept_adjust(rho, w, &cfg.tr_lagrangian);
                    w = w_next;
                    if accept {
                        x = trial;
                        report.accepted += 1;
                        break;
                    }
                    report.rejected += 1;
                    tries += 1;
                    if tries > cfg.max_rejections {
                        return Err(Error::SolverFailure("scaling trust region stalled".into()));
                    }
                }
            }
            (stepping, _) => {
                let f: Vec<T> = sys.rhs.iter().map(|&v| -v).collect();
                let wn: Vec<T> = dx.iter().map(|&v| -v).collect();
                let sub = TrSubproblem::new(&sys.matrix, f, wn);
                let mut tries = 0;
                loop {
                    let step = if stepping == Stepping::Tr2d { sub.two_d_step(delta) } else { sub.simple_step(delta) };
                    let trial = add_scaled(&x, T::one(), &step.step);
                    let p1 = asm.objective(&trial)?;
                    let (accept, d_next) = match rho_penalty(energy, p1, step.predicted_decrease) {
                        Ratio::Escape if step.is_newton => (true, delta),
                        Ratio::Escape => tr_accept_adjust(T::zero(), delta, step.norm, &cfg.tr_penalty),
                        Ratio::Finite(rho) if rho.is_finite() => tr_accept_adjust(rho, delta, step.norm, &cfg.tr_penalty),
                        Ratio::Finite(_) => tr_accept_adjust(T::zero(), delta, step.norm, &cfg.tr_penalty),
                    };
                    delta = d_next;
                    if accept {
                        x = trial;
                        report.accepted += 1;
                        break;
                    }
                    report.rejected += 1;
                    tries += 1;
                    if tries > cfg.max_rejections {
                        return Err(Error::SolverFailure("trust region stalled".into()));
                    }
                }
            }
        }
        if renorm {
            renormalize(&mut x, &layout)?;
        }
        energy = asm.objective(&x)?;
        report.objectives.push(energy);
    }
    Ok((x, report))
}
