//! Tensor-product Gauss-Legendre rules on the reference cell `[0,1]^2`.

use crate::scalar::Real;

/// Polynomial degree integrated exactly by the default rule (3x3 points).
pub const DEFAULT_ORDER: usize = 5;

/// Points and weights on the unit reference square.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    points: Vec<[T; 2]>,
    weights: Vec<T>,
    order: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// Gauss rule exact for polynomials of degree `order` in each variable.
    ///
    /// `order` is clamped to at least 1.
    pub fn gauss(order: usize) -> Self {
        let npts = (order.max(1) + 2) / 2;
        let (x1, w1) = gauss_legendre_unit::<T>(npts);
        let mut points = Vec::with_capacity(npts * npts);
        let mut weights = Vec::with_capacity(npts * npts);
        for j in 0..npts {
            for i in 0..npts {
                points.push([x1[i], x1[j]]);
                weights.push(w1[i] * w1[j]);
            }
        }
        Self { points, weights, order: 2 * npts - 1 }
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Highest per-variable degree integrated exactly.
    pub fn order(&self) -> usize {
        self.order
    }
}

impl<T: Real> Default for QuadratureRule<T> {
    fn default() -> Self {
        Self::gauss(DEFAULT_ORDER)
    }
}

/// Gauss-Legendre nodes and weights mapped to `[0,1]`.
///
/// Roots of `P_n` are polished by Newton's method from the Chebyshev-like
/// initial guess; the iteration runs in `f64` and is converted at the end.
pub fn gauss_legendre_unit<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // ascending order on [0,1]
        x[n - 1 - i] = T::lit(0.5 * (1.0 + z));
        w[n - 1 - i] = T::lit(0.5 * wi);
    }
    (x, w)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
