//! Sparse symmetric-indefinite direct solver.
//!
//! The Newton matrices are symmetric with a zero multiplier block, so they
//! are factored as `P S M S P^T = L D L^T` without pivoting:
//!
//! * `S` is a diagonal scaling that brings every row to unit size, including
//!   multiplier rows whose diagonal is zero;
//! * `P` is an approximate-minimum-degree ordering, adjusted so that every
//!   zero-diagonal unknown is eliminated only after all of its neighbours,
//!   which keeps its pivot away from zero;
//! * tiny pivots that still occur are regularized, and the result is polished
//!   by iterative refinement with a preconditioned GMRES fallback.
//!
//! The symbolic factorization depends only on the sparsity pattern and is
//! reused across Newton steps.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::{LdltParams, LdltRegularization};
use faer::sparse::linalg::amd;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::SparseColMat;
use faer::{Conj, Par, Side, Spec};

use crate::error::{Error, Result};
use crate::linalg::krylov::{gmres, GmresConfig};
use crate::scalar::{norm2, Real};
use crate::sparse::SparseMatrix;

/// Relative residual the solver guarantees on success.
pub const DIRECT_TOLERANCE: f64 = 1e-10;

/// Factorization of one symmetric matrix, reusable for many right-hand sides.
pub struct DirectSolver<T: Real> {
    symbolic: SymbolicCholesky<usize>,
    pattern: (Vec<usize>, Vec<usize>),
    matrix: SparseMatrix<T>,
    scale: Vec<T>,
    l_values: Vec<T>,
    regularized: usize,
}

impl<T: Real> std::fmt::Debug for DirectSolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .field("factor_nnz", &self.l_values.len())
            .field("regularized", &self.regularized)
            .finish()
    }
}

fn faer_err(e: impl std::fmt::Debug) -> Error {
    Error::Factorization(format!("{e:?}"))
}

impl<T: Real> DirectSolver<T> {
    /// Analyses and factors `m`. The matrix must be structurally symmetric.
    pub fn new(m: &SparseMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Factorization(format!("matrix is {}x{}", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let perm = constrained_amd(m)?;
        let scaled = scaled_copy(m, &unit_scaling(m));
        let fm = scaled.to_faer();
        let inv: Vec<usize> = {
            let mut inv = vec![0; n];
            for (k, &p) in perm.iter().enumerate() {
                inv[p] = k;
            }
            inv
        };
        let perm_ref = faer::perm::PermRef::new_checked(&perm, &inv, n);
        let symbolic = factorize_symbolic_cholesky(
            fm.symbolic(),
            Side::Lower,
            SymmetricOrdering::Custom(perm_ref),
            Default::default(),
        )
        .map_err(faer_err)?;
        let mut solver = Self {
            symbolic,
            pattern: (m.row_ptr().to_vec(), m.col_idx().to_vec()),
            matrix: m.clone(),
            scale: Vec::new(),
            l_values: Vec::new(),
            regularized: 0,
        };
        solver.factor_numeric(m)?;
        Ok(solver)
    }

    /// Refactors a matrix with the same pattern, reusing the analysis.
    pub fn refactor(&mut self, m: &SparseMatrix<T>) -> Result<()> {
        if m.row_ptr() != self.pattern.0.as_slice() || m.col_idx() != self.pattern.1.as_slice() {
            *self = Self::new(m)?;
            return Ok(());
        }
        self.factor_numeric(m)
    }

    fn factor_numeric(&mut self, m: &SparseMatrix<T>) -> Result<()> {
        self.scale = unit_scaling(m);
        let fm = scaled_copy(m, &self.scale).to_faer();
        self.matrix = m.clone();
        self.l_values = vec![T::zero(); self.symbolic.len_val()];
        let params: Spec<LdltParams, T> = Default::default();
        let req = self.symbolic.factorize_numeric_ldlt_scratch::<T>(Par::Seq, params);
        let mut buf = MemBuffer::try_new(req).map_err(|_| Error::Factorization("out of memory".into()))?;
        let stack = MemStack::new(&mut buf);
        let reg = LdltRegularization {
            dynamic_regularization_signs: None,
            dynamic_regularization_delta: T::lit(1e-8),
            dynamic_regularization_epsilon: T::lit(1e-13),
        };
        self.symbolic
            .factorize_numeric_ldlt(&mut self.l_values, fm.as_ref(), Side::Lower, reg, Par::Seq, stack, params)
            .map_err(faer_err)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Stored entries of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.l_values.len()
    }

    /// One application of the factorization, without refinement.
    pub fn apply(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut rhs = faer::Mat::<T>::from_fn(n, 1, |i, _| b[i] * self.scale[i]);
        let ldlt = LdltRef::<'_, usize, T>::new(&self.symbolic, &self.l_values);
        let req = self.symbolic.solve_in_place_scratch::<T>(1, Par::Seq);
        let mut buf = MemBuffer::new(req);
        let stack = MemStack::new(&mut buf);
        ldlt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, stack);
        (0..n).map(|i| rhs[(i, 0)] * self.scale[i]).collect()
    }

    /// Solves `M x = b` to a relative residual below [`DIRECT_TOLERANCE`].
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        assert_eq!(b.len(), self.dim());
        let bn = norm2(b);
        if bn == T::zero() {
            return Ok(vec![T::zero(); b.len()]);
        }
        let target = T::lit(DIRECT_TOLERANCE);
        let polish = target * T::lit(1e-2);
        let mut x = self.apply(b);
        let mut res = self.residual(&x, b);
        let mut rel = norm2(&res) / bn;
        for _ in 0..4 {
            if !(rel > polish) {
                break;
            }
            let dx = self.apply(&res);
            let trial: Vec<T> = x.iter().zip(&dx).map(|(a, d)| *a + *d).collect();
            let tres = self.residual(&trial, b);
            let trel = norm2(&tres) / bn;
            if !(trel < rel * T::lit(0.5)) {
                break;
            }
            x = trial;
            res = tres;
            rel = trel;
        }
        if rel > polish || !rel.is_finite() {
            let cfg = GmresConfig { tol: polish, restart: 60, max_iters: 600 };
            let out = gmres(
                |v, y| self.matrix.matvec(v, y),
                |v| self.apply(v),
                b,
                Some(&x),
                &cfg,
            );
            x = out.x;
            rel = norm2(&self.residual(&x, b)) / bn;
        }
        if !(rel < target) {
            return Err(Error::Factorization(format!("direct solve stalled at relative residual {rel:e}")));
        }
        Ok(x)
    }

    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let ax = self.matrix.mul_vec(x);
        b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect()
    }
}

/// One-shot factor and solve.
pub fn direct_solve<T: Real>(m: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    DirectSolver::new(m)?.solve(b)
}

/// Symmetric scaling `s` so that `diag(s) M diag(s)` has entries of order one.
///
/// Rows with a nonzero diagonal get `1/sqrt|m_ii|`; the remaining rows are
/// scaled by the largest entry they couple to after the first pass.
fn unit_scaling<T: Real>(m: &SparseMatrix<T>) -> Vec<T> {
    let n = m.nrows();
    let diag = m.diagonal();
    let mut s: Vec<T> = diag
        .iter()
        .map(|&d| if d != T::zero() { T::one() / d.abs().sqrt() } else { T::zero() })
        .collect();
    for i in 0..n {
        if s[i] == T::zero() {
            let (cols, vals) = m.row(i);
            let big = cols.iter().zip(vals).fold(T::zero(), |acc, (&c, &v)| acc.max((v * s[c]).abs()));
            s[i] = if big > T::zero() { T::one() / big } else { T::one() };
        }
    }
    s
}

fn scaled_copy<T: Real>(m: &SparseMatrix<T>, s: &[T]) -> SparseMatrix<T> {
    let mut out = m.clone();
    let rp = m.row_ptr().to_vec();
    let ci = m.col_idx().to_vec();
    let vals = out.values_mut();
    for r in 0..m.nrows() {
        for k in rp[r]..rp[r + 1] {
            vals[k] *= s[r] * s[ci[k]];
        }
    }
    out
}

/// Minimum-degree ordering with zero-diagonal unknowns moved behind their
/// last neighbour. Returns `perm[new] = old`.
fn constrained_amd<T: Real>(m: &SparseMatrix<T>) -> Result<Vec<usize>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let pattern: SparseColMat<usize, T> = m.to_faer();
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let req = amd::order_scratch::<usize>(n, m.nnz());
    let mut buf = MemBuffer::try_new(req).map_err(|_| Error::Factorization("out of memory".into()))?;
    amd::order(&mut perm, &mut perm_inv, pattern.symbolic(), amd::Control::default(), MemStack::new(&mut buf))
        .map_err(faer_err)?;
    let diag = m.diagonal();
    let mut keys: Vec<(usize, usize, usize)> = (0..n)
        .map(|i| {
            if diag[i] == T::zero() {
                let (cols, _) = m.row(i);
                let last = cols.iter().filter(|&&c| c != i).map(|&c| perm_inv[c]).max().unwrap_or(perm_inv[i]);
                (last.max(perm_inv[i]), 1, i)
            } else {
                (perm_inv[i], 0, i)
            }
        })
        .collect();
    keys.sort_unstable();
    Ok(keys.into_iter().map(|(_, _, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let m = SparseMatrix::<f64>::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let x = direct_solve(&m, &b).unwrap();
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two() {
        let m = SparseMatrix::<f64>::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = direct_solve(&m, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_point_with_zero_block() {
        // [[A, B], [B^T, 0]] with A SPD, B full column rank
        let m = SparseMatrix::<f64>::from_dense(&[
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 3.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
        ]);
        let xs = [1.0, -1.0, 2.0, 0.5];
        let b = m.mul_vec(&xs);
        let x = direct_solve(&m, &b).unwrap();
        for (a, c) in x.iter().zip(&xs) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(direct_solve(&m, &[1.0, 0.0]).is_err());
        let rect = SparseMatrix::from_dense(&[vec![1.0, 1.0]]);
        assert!(DirectSolver::new(&rect).is_err());
    }

    #[test]
    fn refactor_reuses_pattern() {
        let mut m = SparseMatrix::<f64>::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let mut s = DirectSolver::new(&m).unwrap();
        m.values_mut().iter_mut().for_each(|v| *v *= 2.0);
        s.refactor(&m).unwrap();
        let x = s.solve(&[6.0, 6.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_precision_factor() {
        let m = SparseMatrix::<f32>::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let s = DirectSolver::new(&m).unwrap();
        let x = s.apply(&[5.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }
}
