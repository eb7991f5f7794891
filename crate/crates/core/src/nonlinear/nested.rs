//! Nested iteration: solve on a coarse grid, interpolate, re-solve.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, renormalize, LevelReport, Method, NewtonConfig};
use crate::assembly::{Assembler, Layout, Model};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome of a full run across all levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub levels: Vec<LevelReport<T>>,
    pub work_units: T,
    pub wall_time_s: f64,
    pub converged: bool,
    pub diverged: bool,
    /// Final state on the finest level reached.
    pub state: Vec<T>,
    #[serde(skip)]
    pub layout: Option<Layout>,
}

/// Nonzeros times linearizations, summed over levels, over the finest nonzeros.
pub fn work_units<T: Real>(levels: &[LevelReport<T>]) -> T {
    let Some(finest) = levels.iter().max_by_key(|l| l.nnz) else { return T::zero() };
    let total: usize = levels.iter().map(|l| l.nnz * l.iterations).sum();
    T::from_count(total) / T::from_count(finest.nnz)
}

/// Solves on `coarse` and on `levels - 1` successive refinements, each solve
/// starting from the interpolated previous solution.
///
/// `initial` returns a starting state for a layout; on the coarsest level it
/// is used as is, on finer levels only its Dirichlet entries are kept.
pub fn nested_iteration<T: Real>(
    model: Model<T>,
    coarse: Layout,
    levels: usize,
    initial: &dyn Fn(&Layout) -> Vec<T>,
    cfg: &NewtonConfig<T>,
) -> Result<SolveReport<T>> {
    if levels == 0 {
        return Err(Error::invalid("nested iteration needs at least one level"));
    }
    let start = Instant::now();
    let mut reports = Vec::with_capacity(levels);
    let mut layout = coarse;
    let mut x = initial(&layout);
    let mut converged = false;
    let mut diverged = false;
    for level in 0..levels {
        if level > 0 {
            let fine = layout.refined();
            let p = layout.prolongation::<T>(&fine)?;
            let mut xf = p.mul_vec(&x);
            let bc = initial(&fine);
            for (i, m) in fine.dirichlet_mask().into_iter().enumerate() {
                if m {
                    xf[i] = bc[i];
                }
            }
            layout = fine;
            x = xf;
        }
        if cfg.method == Method::PenaltyRenorm {
            renormalize(&mut x, &layout)?;
        }
        let asm = Assembler::new(layout, model)?;
        let (xn, rep) = newton_solve(&asm, x, cfg, level)?;
        x = xn;
        log::info!(
            "level {level} ({}x{}): {} iterations, residual {:e}, converged {}",
            rep.cells_x,
            rep.cells_y,
            rep.iterations,
            rep.final_residual(),
            rep.converged
        );
        converged = rep.converged;
        diverged = rep.diverged;
        reports.push(rep);
        if diverged {
            break;
        }
    }
    let work_units = work_units(&reports);
    Ok(SolveReport {
        converged: converged && !diverged && reports.len() == levels,
        diverged,
        levels: reports,
        work_units,
        wall_time_s: start.elapsed().as_secs_f64(),
        state: x,
        layout: Some(layout),
    })
}
