//! Compressed sparse row matrices with a fixed pattern.
//!
//! Assembly builds the pattern once from cell connectivity and then
//! scatters element contributions into it, so `add` only touches existing
//! entries.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Zero matrix over the given per-row column lists (sorted and deduplicated here).
    pub fn from_rows(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().map_or(true, |&c| c < ncols));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![T::zero(); col_idx.len()];
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::invalid(format!("triplet ({r},{c}) outside {nrows}x{ncols}")));
            }
            rows[r].push(c);
        }
        let mut m = Self::from_rows(nrows, ncols, rows);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_rows(n, n, (0..n).map(|i| vec![i]).collect());
        m.values.iter_mut().for_each(|v| *v = T::one());
        m
    }

    /// Dense-to-sparse conversion dropping exact zeros.
    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let s = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[s.clone()], &self.values[s])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    /// Entry `(r, c)`, zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c).map_or(T::zero(), |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`.
    ///
    /// # Panics
    /// If `(r, c)` is not part of the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r},{c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn scale(&mut self, alpha: T) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn matvec_transpose(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// Sparse product `self * other` (row-wise Gustavson).
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![T::zero(); n];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (a, v) = (self.col_idx[k], self.values[k]);
                for kk in other.row_ptr[a]..other.row_ptr[a + 1] {
                    let c = other.col_idx[kk];
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = T::zero();
                        touched.push(c);
                    }
                    acc[c] += v * other.values[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: self.nrows, ncols: n, row_ptr, col_idx, values }
    }

    /// Galerkin triple product `Pᵀ A P`.
    pub fn galerkin(&self, p: &Self) -> Self {
        p.transpose().matmul(&self.matmul(p))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Replaces rows and columns flagged in `mask` by identity rows.
    ///
    /// The pattern must contain the diagonal for every flagged index.
    pub fn constrain(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.nrows);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let rm = mask[r];
                let cm = c < mask.len() && mask[c];
                if rm || cm {
                    self.values[k] = if r == c { T::one() } else { T::zero() };
                }
            }
        }
    }

    /// Rows `rows` and columns `cols` as a new matrix (index lists must be sorted).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            map[c] = j;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let j = map[self.col_idx[k]];
                if j != usize::MAX {
                    col_idx.push(j);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // cols sorted and rows sorted by column, so output stays sorted
        Self { nrows: rows.len(), ncols: cols.len(), row_ptr, col_idx, values }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        let mut worst = T::zero();
        for r in 0..self.nrows {
            let (c1, v1) = self.row(r);
            for (&c, &v) in c1.iter().zip(v1) {
                worst = worst.max((v - t.get(r, c)).abs());
            }
            let (c2, v2) = t.row(r);
            for (&c, &v) in c2.iter().zip(v2) {
                if self.position(r, c).is_none() {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference, taken over the union of both patterns.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut worst = T::zero();
        for r in 0..self.nrows {
            let (c1, v1) = self.row(r);
            for (&c, &v) in c1.iter().zip(v1) {
                worst = worst.max((v - other.get(r, c)).abs());
            }
            let (c2, v2) = other.row(r);
            for (&c, &v) in c2.iter().zip(v2) {
                if self.position(r, c).is_none() {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        d
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r, c, v.to_f64_lossy())?;
            }
        }
        Ok(())
    }

    /// Column-major copy for faer (built from the transpose so no sorting is needed).
    pub fn to_faer(&self) -> faer::sparse::SparseColMat<usize, T> {
        let t = self.transpose();
        let symbolic = faer::sparse::SymbolicSparseColMat::new_checked(
            self.nrows,
            self.ncols,
            t.row_ptr,
            None,
            t.col_idx,
        );
        faer::sparse::SparseColMat::new(symbolic, t.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix<f64> {
        SparseMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 2.0],
            vec![0.0, 2.0, 5.0],
        ])
    }

    #[test]
    fn matvec_and_transpose() {
        let a = sample();
        assert_eq!(a.nnz(), 7);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 6.0, 7.0]);
        let b = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0], vec![4.0, 0.0]]);
        let bt = b.transpose();
        assert_eq!(bt.to_dense(), vec![vec![1.0, 0.0, 4.0], vec![2.0, 3.0, 0.0]]);
        let mut y = vec![0.0; 2];
        b.matvec_transpose(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![5.0, 5.0]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.5), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(SparseMatrix::<f64>::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn product_matches_dense() {
        let a = sample();
        let p = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        let g = a.galerkin(&p).to_dense();
        let ad = a.to_dense();
        let pd = p.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += pd[k][i] * ad[k][l] * pd[l][j];
                    }
                }
                assert!((g[i][j] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constrain_keeps_symmetry() {
        let mut a = sample();
        a.constrain(&[false, true, false]);
        assert_eq!(a.to_dense(), vec![vec![4.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 5.0]]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn submatrix_and_coordinate_dump() {
        let a = sample();
        let s = a.submatrix(&[1, 2], &[0, 2]);
        assert_eq!(s.to_dense(), vec![vec![1.0, 2.0], vec![0.0, 5.0]]);
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("3 3 7"));
    }

    #[test]
    fn faer_round_trip() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let f = a.to_faer();
        let d = f.to_dense();
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(1, 0)], 0.0);
    }
}
