//! Restarted GMRES with right preconditioning.

use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig<T> {
    /// Relative residual target.
    pub tol: T,
    pub restart: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub struct GmresOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final relative residual (of the Arnoldi recurrence).
    pub relative_residual: T,
    pub converged: bool,
}

/// Solves `A x = b` with `A` applied by `apply_a(v, out)` and the right
/// preconditioner by `apply_m(v)`.
pub fn gmres<T: Real>(
    apply_a: impl Fn(&[T], &mut [T]),
    apply_m: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    x0: Option<&[T]>,
    cfg: &GmresConfig<T>,
) -> GmresOutcome<T> {
    let n = b.len();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |v| v.to_vec());
    let bn = norm2(b);
    if bn == T::zero() {
        return GmresOutcome { x: vec![T::zero(); n], iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let m = cfg.restart.max(1);
    let mut total = 0;
    let mut tmp = vec![T::zero(); n];
    let mut rel;
    while total < cfg.max_iters {
        apply_a(&x, &mut tmp);
        let r: Vec<T> = b.iter().zip(&tmp).map(|(bi, ai)| *bi - *ai).collect();
        let beta = norm2(&r);
        rel = beta / bn;
        if rel < cfg.tol {
            return GmresOutcome { x, iterations: total, relative_residual: rel, converged: true };
        }
        let mut basis: Vec<Vec<T>> = vec![r.iter().map(|&v| v / beta).collect()];
        let mut zs: Vec<Vec<T>> = Vec::new();
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < cfg.max_iters {
            let z = apply_m(&basis[k]);
            apply_a(&z, &mut tmp);
            zs.push(z);
            let mut w = tmp.clone();
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][k] = hij;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * *vi);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            total += 1;
            k += 1;
            rel = g[k].abs() / bn;
            if rel < cfg.tol || hn == T::zero() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hn).collect());
        }
        // back substitution for the k-dimensional least-squares problem
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != T::zero() { s / h[i][i] } else { T::zero() };
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += *yi * *zi);
        }
        if rel < cfg.tol {
            break;
        }
    }
    apply_a(&x, &mut tmp);
    let true_rel = norm2(&b.iter().zip(&tmp).map(|(bi, ai)| *bi - *ai).collect::<Vec<_>>()) / bn;
    GmresOutcome { x, iterations: total, relative_residual: true_rel, converged: true_rel < cfg.tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.5));
                trip.push((i + 1, i, -0.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&xs);
        let cfg = GmresConfig { tol: 1e-12, restart: 8, max_iters: 500 };
        let out = gmres(|v, y| a.matvec(v, y), |v| v.to_vec(), &b, None, &cfg);
        assert!(out.converged);
        for (p, q) in out.x.iter().zip(&xs) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 5.0]]);
        let cfg = GmresConfig { tol: 1e-14, restart: 5, max_iters: 5 };
        let out = gmres(|v, y| a.matvec(v, y), |v| vec![v[0] / 2.0, v[1] / 5.0], &[2.0, 5.0], None, &cfg);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }
}
