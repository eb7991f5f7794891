//! Coupled geometric multigrid for saddle-point Newton systems.
//!
//! Smoothing is Braess-Sarazin relaxation: the update solves
//! `[[gamma R, B], [B^T, 0]] dx = r`, where `R` holds the per-node diagonal
//! blocks of the nodal block `Â` (3x3 for the director, 4x4 with the
//! potential). The multiplier part is obtained from the Schur system
//! `B^T R^-1 B dl = B^T R^-1 r_u - gamma r_l`, solved approximately by a few
//! l1-Jacobi sweeps, followed by `du = (gamma R)^-1 (r_u - B dl)`.
//!
//! Coarse operators are Galerkin products `P^T M P` with the finite-element
//! interpolation `P`; columns of `P` belonging to Dirichlet unknowns are
//! dropped and the coarse Dirichlet rows are set to the identity.

use serde::{Deserialize, Serialize};

use crate::assembly::{BlockSystem, Layout};
use crate::error::{Error, Result};
use crate::linalg::direct::DirectSolver;
use crate::scalar::{norm2, Real};
use crate::sparse::SparseMatrix;

/// Approximate solve of the multiplier Schur system inside a relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerSolve {
    /// Fixed number of l1-Jacobi sweeps from a zero guess.
    Jacobi(usize),
    /// Direct factorization (for verification on small systems).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig<T> {
    pub gamma_b: T,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Relative residual target.
    pub tol: T,
    pub max_cycles: usize,
    pub inner: InnerSolve,
    /// Cells per direction on the coarsest grid.
    pub coarse_cells: usize,
}

impl<T: Real> Default for MgConfig<T> {
    fn default() -> Self {
        Self {
            gamma_b: T::lit(1.2),
            pre_sweeps: 1,
            post_sweeps: 1,
            tol: T::lit(1e-6),
            max_cycles: 100,
            inner: InnerSolve::Jacobi(2),
            coarse_cells: 8,
        }
    }
}

/// Per-node diagonal blocks of `a_hat` (node-major with `block` unknowns per node).
pub fn build_collocation_preconditioner<T: Real>(a_hat: &SparseMatrix<T>, block: usize) -> Result<SparseMatrix<T>> {
    if block == 0 || a_hat.nrows() % block != 0 || a_hat.nrows() != a_hat.ncols() {
        return Err(Error::invalid(format!(
            "{}x{} matrix does not split into {block}x{block} node blocks",
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    let mut trip = Vec::with_capacity(a_hat.nrows() * block);
    for r in 0..a_hat.nrows() {
        let node = r / block;
        for c in node * block..(node + 1) * block {
            trip.push((r, c, a_hat.get(r, c)));
        }
    }
    SparseMatrix::from_triplets(a_hat.nrows(), a_hat.ncols(), &trip)
}

/// Inverts a block-diagonal matrix block by block.
pub fn invert_blocks<T: Real>(r: &SparseMatrix<T>, block: usize) -> Result<SparseMatrix<T>> {
    let n = r.nrows();
    let mut trip = Vec::with_capacity(n * block);
    for node in 0..n / block {
        let base = node * block;
        let m = faer::Mat::<T>::from_fn(block, block, |i, j| r.get(base + i, base + j));
        let inv = {
            use faer::linalg::solvers::DenseSolveCore;
            m.partial_piv_lu().inverse()
        };
        for i in 0..block {
            for j in 0..block {
                let v = inv[(i, j)];
                if !v.is_finite() {
                    return Err(Error::SolverFailure(format!("singular collocation block at node {node}")));
                }
                trip.push((base + i, base + j, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &trip)
}

enum Collocation<T: Real> {
    Blocks(SparseMatrix<T>),
    Exact(DirectSolver<T>),
}

impl<T: Real> Collocation<T> {
    fn apply(&self, r: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Blocks(inv) => Ok(inv.mul_vec(r)),
            Self::Exact(s) => s.solve(r),
        }
    }
}

enum Schur<T: Real> {
    /// Explicit `B^T R^-1 B` with its l1 row sums.
    Sparse { s: SparseMatrix<T>, l1: Vec<T>, exact: Option<DirectSolver<T>> },
    /// Exact solver of a dense-assembled Schur complement.
    Exact(DirectSolver<T>),
    None,
}

/// One grid of the hierarchy.
pub struct MgLevel<T: Real> {
    pub layout: Layout,
    pub matrix: SparseMatrix<T>,
    /// Interpolation from the next coarser level (Dirichlet columns removed).
    pub prolongation: Option<SparseMatrix<T>>,
    n_u: usize,
    b_hat: SparseMatrix<T>,
    b_hat_t: SparseMatrix<T>,
    collocation: Collocation<T>,
    schur: Schur<T>,
}

impl<T: Real> MgLevel<T> {
    fn new(layout: Layout, matrix: SparseMatrix<T>, prolongation: Option<SparseMatrix<T>>, inner: InnerSolve) -> Result<Self> {
        let n_u = layout.field_dofs();
        let u_idx: Vec<usize> = (0..n_u).collect();
        let l_idx = layout.multiplier_indices();
        let a_hat = matrix.submatrix(&u_idx, &u_idx);
        let r = build_collocation_preconditioner(&a_hat, layout.stride())?;
        let r_inv = invert_blocks(&r, layout.stride())?;
        let b_hat = matrix.submatrix(&u_idx, &l_idx);
        let b_hat_t = b_hat.transpose();
        let schur = if l_idx.is_empty() {
            Schur::None
        } else {
            let s = b_hat_t.matmul(&r_inv.matmul(&b_hat));
            let l1 = (0..s.nrows()).map(|i| s.row(i).1.iter().fold(T::zero(), |a, v| a + v.abs())).collect();
            let exact = if inner == InnerSolve::Exact { Some(DirectSolver::new(&s)?) } else { None };
            Schur::Sparse { s, l1, exact }
        };
        Ok(Self { layout, matrix, prolongation, n_u, b_hat, b_hat_t, collocation: Collocation::Blocks(r_inv), schur })
    }

    /// Level whose relaxation uses `Â` itself in place of its node blocks and
    /// an exact Schur solve, so one relaxation with `gamma = 1` is an exact solve.
    pub fn with_exact_collocation(layout: Layout, matrix: SparseMatrix<T>) -> Result<Self> {
        let n_u = layout.field_dofs();
        let u_idx: Vec<usize> = (0..n_u).collect();
        let l_idx = layout.multiplier_indices();
        let a_hat = matrix.submatrix(&u_idx, &u_idx);
        let solver = DirectSolver::new(&a_hat)?;
        let b_hat = matrix.submatrix(&u_idx, &l_idx);
        let b_hat_t = b_hat.transpose();
        let schur = if l_idx.is_empty() {
            Schur::None
        } else {
            let m = l_idx.len();
            let mut dense = vec![vec![T::zero(); m]; m];
            let mut col = vec![T::zero(); m];
            for j in 0..m {
                col.iter_mut().for_each(|v| *v = T::zero());
                col[j] = T::one();
                let bj = b_hat.mul_vec(&col);
                let y = solver.solve(&bj)?;
                let sj = b_hat_t.mul_vec(&y);
                for i in 0..m {
                    dense[i][j] = sj[i];
                }
            }
            let s = SparseMatrix::from_dense(&dense);
            Schur::Exact(DirectSolver::new(&s)?)
        };
        Ok(Self { layout, matrix, prolongation: None, n_u, b_hat, b_hat_t, collocation: Collocation::Exact(solver), schur })
    }

    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let ax = self.matrix.mul_vec(x);
        b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect()
    }

    /// One Braess-Sarazin relaxation `x <- x + K^-1 (b - M x)`.
    pub fn relax(&self, x: &mut [T], b: &[T], gamma: T, inner: InnerSolve) -> Result<()> {
        let r = self.residual(x, b);
        let (r_u, r_l) = r.split_at(self.n_u);
        let rinv_ru = self.collocation.apply(r_u)?;
        let dl = match &self.schur {
            Schur::None => Vec::new(),
            schur => {
                let bt = self.b_hat_t.mul_vec(&rinv_ru);
                let rhs: Vec<T> = bt.iter().zip(r_l).map(|(a, l)| *a - gamma * *l).collect();
                match schur {
                    Schur::Sparse { exact: Some(s), .. } | Schur::Exact(s) => s.solve(&rhs)?,
                    Schur::Sparse { s, l1, exact: None } => {
                        let sweeps = match inner {
                            InnerSolve::Jacobi(k) => k,
                            InnerSolve::Exact => {
                                return Err(Error::invalid("exact inner solve was not prepared for this level"))
                            }
                        };
                        let mut dl = vec![T::zero(); rhs.len()];
                        for _ in 0..sweeps {
                            let sd = s.mul_vec(&dl);
                            for i in 0..dl.len() {
                                if l1[i] > T::zero() {
                                    dl[i] += (rhs[i] - sd[i]) / l1[i];
                                }
                            }
                        }
                        dl
                    }
                    Schur::None => unreachable!(),
                }
            }
        };
        let mut ru2 = r_u.to_vec();
        if !dl.is_empty() {
            let bdl = self.b_hat.mul_vec(&dl);
            ru2.iter_mut().zip(&bdl).for_each(|(a, b)| *a -= *b);
        }
        let du = self.collocation.apply(&ru2)?;
        for (xi, d) in x[..self.n_u].iter_mut().zip(&du) {
            *xi += *d / gamma;
        }
        for (xi, d) in x[self.n_u..].iter_mut().zip(&dl) {
            *xi += *d;
        }
        Ok(())
    }
}

/// Level hierarchy built from the finest Newton system by Galerkin coarsening.
pub struct MgHierarchy<T: Real> {
    /// Coarsest first.
    pub levels: Vec<MgLevel<T>>,
    coarse: DirectSolver<T>,
}

/// Interpolation with columns of coarse Dirichlet unknowns removed.
fn constrained_prolongation<T: Real>(coarse: &Layout, fine: &Layout) -> Result<SparseMatrix<T>> {
    let p = coarse.prolongation::<T>(fine)?;
    let mask = coarse.dirichlet_mask();
    let mut trip = Vec::with_capacity(p.nnz());
    for r in 0..p.nrows() {
        let (cols, vals) = p.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if !mask[c] {
                trip.push((r, c, v));
            }
        }
    }
    SparseMatrix::from_triplets(p.nrows(), p.ncols(), &trip)
}

/// `P^T M P` plus the identity on coarse Dirichlet unknowns.
pub fn galerkin_coarse<T: Real>(fine: &SparseMatrix<T>, p: &SparseMatrix<T>, coarse_mask: &[bool]) -> Result<SparseMatrix<T>> {
    let g = fine.galerkin(p);
    let mut trip = Vec::with_capacity(g.nnz() + coarse_mask.len());
    for r in 0..g.nrows() {
        let (cols, vals) = g.row(r);
        trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        // keep a structural diagonal on every row for the smoother and the factorization
        trip.push((r, r, if coarse_mask[r] { T::one() } else { T::zero() }));
    }
    SparseMatrix::from_triplets(g.nrows(), g.ncols(), &trip)
}

impl<T: Real> MgHierarchy<T> {
    /// Coarsens `finest` down to `cfg.coarse_cells` cells per direction.
    pub fn build(finest: &BlockSystem<T>, cfg: &MgConfig<T>) -> Result<Self> {
        let mut layouts = vec![finest.layout];
        loop {
            let m = layouts.last().expect("non-empty").mesh();
            if m.nx() % 2 != 0 || m.ny() % 2 != 0 || m.nx() / 2 < cfg.coarse_cells.max(1) || m.ny() / 2 < cfg.coarse_cells.max(1) {
                break;
            }
            let coarse_mesh = crate::mesh::Mesh::new(m.nx() / 2, m.ny() / 2, m.periodic_x())?;
            let l = layouts.last().expect("non-empty");
            layouts.push(if l.has_potential() {
                Layout::flexo(coarse_mesh)
            } else if l.has_multiplier() {
                Layout::lagrangian(coarse_mesh)
            } else {
                Layout::penalty(coarse_mesh)
            });
        }
        layouts.reverse();
        let nl = layouts.len();
        let mut mats: Vec<SparseMatrix<T>> = vec![finest.matrix.clone()];
        let mut prolongs: Vec<Option<SparseMatrix<T>>> = vec![None; nl];
        for k in (1..nl).rev() {
            let p = constrained_prolongation::<T>(&layouts[k - 1], &layouts[k])?;
            let coarse = galerkin_coarse(mats.last().expect("non-empty"), &p, &layouts[k - 1].dirichlet_mask())?;
            prolongs[k] = Some(p);
            mats.push(coarse);
        }
        mats.reverse();
        let coarse = DirectSolver::new(&mats[0])?;
        let mut levels = Vec::with_capacity(nl);
        for ((layout, m), p) in layouts.into_iter().zip(mats).zip(prolongs) {
            levels.push(MgLevel::new(layout, m, p, cfg.inner)?);
        }
        Ok(Self { levels, coarse })
    }

    pub fn finest(&self) -> &MgLevel<T> {
        self.levels.last().expect("hierarchy has at least one level")
    }

    fn cycle(&self, l: usize, x: &mut [T], b: &[T], cfg: &MgConfig<T>) -> Result<()> {
        if l == 0 {
            let lev = &self.levels[0];
            let r = lev.residual(x, b);
            let dx = self.coarse.solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += *d);
            return Ok(());
        }
        let lev = &self.levels[l];
        for _ in 0..cfg.pre_sweeps {
            lev.relax(x, b, cfg.gamma_b, cfg.inner)?;
        }
        let r = lev.residual(x, b);
        let p = lev.prolongation.as_ref().expect("fine levels carry a prolongation");
        let mut rc = vec![T::zero(); p.ncols()];
        p.matvec_transpose(&r, &mut rc);
        let mut ec = vec![T::zero(); rc.len()];
        self.cycle(l - 1, &mut ec, &rc, cfg)?;
        let ef = p.mul_vec(&ec);
        x.iter_mut().zip(&ef).for_each(|(a, e)| *a += *e);
        for _ in 0..cfg.post_sweeps {
            lev.relax(x, b, cfg.gamma_b, cfg.inner)?;
        }
        Ok(())
    }
}

/// Result of [`mg_solve`].
#[derive(Debug, Clone)]
pub struct MgOutcome<T> {
    pub x: Vec<T>,
    pub cycles: usize,
    pub relative_residual: T,
    pub converged: bool,
    /// Relative residual after each cycle.
    pub history: Vec<T>,
}

/// V-cycles until the relative residual drops below `cfg.tol`.
pub fn mg_solve<T: Real>(h: &MgHierarchy<T>, rhs: &[T], cfg: &MgConfig<T>) -> Result<MgOutcome<T>> {
    let top = h.levels.len() - 1;
    let fin = h.finest();
    let bn = norm2(rhs);
    let mut x = vec![T::zero(); rhs.len()];
    if bn == T::zero() {
        return Ok(MgOutcome { x, cycles: 0, relative_residual: T::zero(), converged: true, history: Vec::new() });
    }
    let mut history = Vec::new();
    let mut rel = T::one();
    for cycle in 1..=cfg.max_cycles {
        h.cycle(top, &mut x, rhs, cfg)?;
        rel = norm2(&fin.residual(&x, rhs)) / bn;
        history.push(rel);
        if !rel.is_finite() {
            return Err(Error::SolverFailure(format!("multigrid diverged after {cycle} cycles")));
        }
        if rel < cfg.tol {
            return Ok(MgOutcome { x, cycles: cycle, relative_residual: rel, converged: true, history });
        }
    }
    Ok(MgOutcome { x, cycles: cfg.max_cycles, relative_residual: rel, converged: false, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_gives_diagonal_blocks() {
        let a = SparseMatrix::from_dense(&[
            vec![2.0, 0.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0, 0.0],
            vec![0.0, 0.0, 4.0, 0.0],
            vec![0.0, 0.0, 0.0, 5.0],
        ]);
        let r = build_collocation_preconditioner(&a, 2).unwrap();
        assert_eq!(r.diagonal(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(r.max_abs_diff(&a), 0.0);
        assert!(build_collocation_preconditioner(&a, 3).is_err());
    }

    #[test]
    fn node_blocks_are_extracted_and_inverted() {
        // two nodes with 4 unknowns each and off-block coupling
        let mut d = vec![vec![0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                d[i][j] = if i == j { 10.0 + i as f64 } else { 1.0 / (1.0 + (i + j) as f64) };
            }
        }
        let a = SparseMatrix::from_dense(&d);
        let r = build_collocation_preconditioner(&a, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i / 4 == j / 4 { d[i][j] } else { 0.0 };
                assert_eq!(r.get(i, j), want);
            }
        }
        let inv = invert_blocks(&r, 4).unwrap();
        let prod = r.matmul(&inv).to_dense();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(invert_blocks(&a, 2).is_err());
    }

    fn constant_state(layout: &Layout) -> Vec<f64> {
        let n = [0.6, 0.0, 0.8];
        let mut x = vec![0.0; layout.dof_count()];
        for node in 0..layout.node_count() {
            x[node * layout.stride()..node * layout.stride() + 3].copy_from_slice(&n);
        }
        for i in layout.multiplier_indices() {
            x[i] = 0.7;
        }
        x
    }

    #[test]
    fn galerkin_product_reproduces_coarse_assembly() {
        use crate::assembly::{Assembler, Model};
        use crate::energy::{ElectricConstants, FrankConstants};
        use crate::mesh::Mesh;
        let fc = FrankConstants::new(1.0, 1.7, 1.3).unwrap();
        let ec = ElectricConstants { eps0: 1.4, eps_par: 7.0, eps_perp: 5.0, e_s: 1.5, e_b: -1.5 };
        let cases: Vec<(fn(Mesh) -> Layout, Model<f64>)> = vec![
            (Layout::penalty, Model::penalty(fc, 10.0)),
            (Layout::lagrangian, Model::lagrangian(fc)),
            (Layout::flexo, Model::flexo(fc, ec)),
        ];
        for (make, model) in cases {
            let coarse = make(Mesh::new(4, 4, true).unwrap());
            let fine = coarse.refined();
            let fine_sys = Assembler::new(fine, model).unwrap().system(&constant_state(&fine)).unwrap();
            let coarse_sys = Assembler::new(coarse, model).unwrap().system(&constant_state(&coarse)).unwrap();
            let p = constrained_prolongation::<f64>(&coarse, &fine).unwrap();
            let g = galerkin_coarse(&fine_sys.matrix, &p, &coarse.dirichlet_mask()).unwrap();
            let diff = g.max_abs_diff(&coarse_sys.matrix);
            assert!(diff < 1e-10 * coarse_sys.matrix.max_abs(), "stride {}: {diff}", coarse.stride());
        }
    }
}
