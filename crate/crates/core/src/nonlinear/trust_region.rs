//! Trust-region subproblems and acceptance rules.
//!
//! The penalty formulation uses a radius `delta` on a quadratic model of the
//! penalized energy; the Lagrangian formulation scales the full Newton update
//! by a factor `w` judged on the residual norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Real};
use crate::sparse::SparseMatrix;

/// Parameters of the radius-based trust region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrPenaltyParams<T> {
    pub eta1: T,
    pub eta2: T,
    pub eta3: T,
    pub c1: T,
    pub c3: T,
    pub delta_init: T,
    pub delta_inc: T,
    pub delta_max: T,
}

impl<T: Real> Default for TrPenaltyParams<T> {
    fn default() -> Self {
        Self {
            eta1: T::lit(0.25),
            eta2: T::lit(0.75),
            eta3: T::lit(0.125),
            c1: T::lit(0.5),
            c3: T::lit(1.3),
            delta_init: T::lit(0.3),
            delta_inc: T::lit(0.3),
            delta_max: T::lit(100.0),
        }
    }
}

impl<T: Real> TrPenaltyParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(z < self.eta3 && self.eta3 < self.eta1 && self.eta1 < self.eta2) {
            return Err(Error::invalid("trust-region thresholds need 0 < eta3 < eta1 < eta2"));
        }
        if !(z < self.c1 && self.c1 < T::one() && T::one() < self.c3) {
            return Err(Error::invalid("trust-region factors need 0 < C1 < 1 < C3"));
        }
        if !(self.delta_init > z && self.delta_max >= self.delta_init && self.delta_inc >= z) {
            return Err(Error::invalid("trust-region radii must be positive and below the cap"));
        }
        Ok(())
    }

    /// Starting radius on refinement `level` of a nested iteration.
    pub fn radius_for_level(&self, level: usize) -> T {
        (self.delta_init + T::from_count(level) * self.delta_inc).min(self.delta_max)
    }
}

/// Parameters of the step-scaling trust region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrLagrangianParams<T> {
    pub eta1: T,
    pub eta2: T,
    pub w_inc: T,
    pub w_dec: T,
    pub w_lev: T,
    pub w_min: T,
    pub w_init: T,
}

impl<T: Real> Default for TrLagrangianParams<T> {
    fn default() -> Self {
        Self {
            eta1: T::lit(0.5),
            eta2: T::lit(0.25),
            w_inc: T::lit(0.1),
            w_dec: T::lit(0.1),
            w_lev: T::lit(0.1),
            w_min: T::lit(0.1),
            w_init: T::lit(0.2),
        }
    }
}

impl<T: Real> TrLagrangianParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(T::zero() < self.eta2 && self.eta2 < self.eta1) {
            return Err(Error::invalid("scaling thresholds need 0 < eta2 < eta1"));
        }
        if !(T::zero() < self.w_min && self.w_min <= self.w_init && self.w_init <= T::one()) {
            return Err(Error::invalid("scaling factors need 0 < w_min <= w_init <= 1"));
        }
        Ok(())
    }

    /// Starting scale factor on refinement `level`.
    pub fn scale_for_level(&self, level: usize) -> T {
        (self.w_init + T::from_count(level) * self.w_lev).min(T::one())
    }
}

/// `M(d) = p + f.d + d.U d / 2`
pub fn quadratic_model<T: Real>(p: T, f: &[T], u: &SparseMatrix<T>, d: &[T]) -> T {
    let ud = u.mul_vec(d);
    p + dot(f, d) + T::lit(0.5) * dot(d, &ud)
}

/// A candidate trust-region step.
#[derive(Debug, Clone)]
pub struct TrStep<T> {
    pub step: Vec<T>,
    /// `M(0) - M(step)`
    pub predicted_decrease: T,
    pub norm: T,
    /// Whether the step is the unconstrained Newton step `-U^-1 f`.
    pub is_newton: bool,
}

/// Data of the quadratic subproblem at one iterate, reused across rejected steps.
#[derive(Debug, Clone)]
pub struct TrSubproblem<T> {
    f: Vec<T>,
    /// `U^-1 f`
    w: Vec<T>,
    /// `U f`
    uf: Vec<T>,
    fw: T,
    w_norm: T,
}

/// Threshold on `|f x w| / (|f| |w|)` below which the 2D subspace is a line.
const DEGENERATE_SUBSPACE: f64 = 1e-10;

impl<T: Real> TrSubproblem<T> {
    /// `f` is the gradient, `w = U^-1 f` the solution of the Newton system.
    pub fn new(u: &SparseMatrix<T>, f: Vec<T>, w: Vec<T>) -> Self {
        let uf = u.mul_vec(&f);
        let fw = dot(&f, &w);
        let w_norm = norm2(&w);
        Self { f, w, uf, fw, w_norm }
    }

    /// Norm of the full Newton step.
    pub fn newton_norm(&self) -> T {
        self.w_norm
    }

    /// Model decrease `M(0) - M(-mu w)` along the Newton line.
    fn line_decrease(&self, mu: T) -> T {
        // f.(-mu w) + mu^2 w.U w / 2 with U w = f
        mu * self.fw - T::lit(0.5) * mu * mu * self.fw
    }

    fn line_step(&self, mu: T, is_newton: bool) -> TrStep<T> {
        TrStep {
            step: self.w.iter().map(|&v| -mu * v).collect(),
            predicted_decrease: self.line_decrease(mu),
            norm: mu.abs() * self.w_norm,
            is_newton,
        }
    }

    /// Best point of the ball on the line through the Newton step.
    pub fn simple_step(&self, delta: T) -> TrStep<T> {
        if self.w_norm == T::zero() {
            return self.line_step(T::zero(), true);
        }
        let mut best: Option<TrStep<T>> = None;
        if self.w_norm <= delta {
            best = Some(self.line_step(T::one(), true));
        }
        let mu = delta / self.w_norm;
        for cand in [self.line_step(mu, false), self.line_step(-mu, false)] {
            if best.as_ref().map_or(true, |b| cand.predicted_decrease > b.predicted_decrease) {
                best = Some(cand);
            }
        }
        best.expect("at least one candidate")
    }

    /// Best point of the ball within `span{f, U^-1 f}`.
    pub fn two_d_step(&self, delta: T) -> TrStep<T> {
        let simple = self.simple_step(delta);
        let fn_ = norm2(&self.f);
        if fn_ == T::zero() || self.w_norm == T::zero() {
            return simple;
        }
        let q1: Vec<T> = self.f.iter().map(|&v| v / fn_).collect();
        let c = dot(&q1, &self.w);
        let mut q2: Vec<T> = self.w.iter().zip(&q1).map(|(&w, &q)| w - c * q).collect();
        let q2n = norm2(&q2);
        if q2n <= T::lit(DEGENERATE_SUBSPACE) * self.w_norm {
            return simple;
        }
        q2.iter_mut().for_each(|v| *v /= q2n);
        // U q1 = U f / |f|,  U q2 = (f - c U q1) / |q2|
        let uq1: Vec<T> = self.uf.iter().map(|&v| v / fn_).collect();
        let uq2: Vec<T> = self.f.iter().zip(&uq1).map(|(&f, &u)| (f - c * u) / q2n).collect();
        let h11 = dot(&q1, &uq1).to_f64_lossy();
        let h12 = T::lit(0.5).to_f64_lossy() * (dot(&q1, &uq2) + dot(&q2, &uq1)).to_f64_lossy();
        let h22 = dot(&q2, &uq2).to_f64_lossy();
        let g = [dot(&q1, &self.f).to_f64_lossy(), dot(&q2, &self.f).to_f64_lossy()];
        let y = minimize_2d([[h11, h12], [h12, h22]], g, delta.to_f64_lossy());
        let model = |y: [f64; 2]| {
            -(g[0] * y[0] + g[1] * y[1])
                - 0.5 * (h11 * y[0] * y[0] + 2.0 * h12 * y[0] * y[1] + h22 * y[1] * y[1])
        };
        let Some(y) = y else { return simple };
        let dec = model(y);
        if !(dec > simple.predicted_decrease.to_f64_lossy()) {
            return simple;
        }
        let (y0, y1) = (T::lit(y[0]), T::lit(y[1]));
        let step: Vec<T> = q1.iter().zip(&q2).map(|(&a, &b)| y0 * a + y1 * b).collect();
        let norm = norm2(&step);
        TrStep { step, predicted_decrease: T::lit(dec), norm, is_newton: false }
    }
}

/// Minimizer of `g.y + y.H y / 2` over `|y| <= delta` in two dimensions.
///
/// Enumerates the interior stationary point and every stationary point on the
/// circle. The latter solve `(H + s I) y = -g`, `|y| = delta`, which in the
/// eigenbasis of `H` is a quartic in `s`; its roots are the eigenvalues of the
/// companion matrix. When a component of `g` vanishes in the eigenbasis the
/// circle may also be touched at `s = -d_i` (the hard case).
pub fn minimize_2d(h: [[f64; 2]; 2], g: [f64; 2], delta: f64) -> Option<[f64; 2]> {
    let model = |y: [f64; 2]| {
        g[0] * y[0] + g[1] * y[1] + 0.5 * (h[0][0] * y[0] * y[0] + 2.0 * h[0][1] * y[0] * y[1] + h[1][1] * y[1] * y[1])
    };
    let mut cands: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    if h[0][0] > 0.0 && det > 0.0 {
        let y = [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[0][1] * g[0]) / det];
        if (y[0] * y[0] + y[1] * y[1]).sqrt() <= delta {
            cands.push(y);
        }
    }
    // symmetric 2x2 eigen-decomposition
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let d = [mean - rad, mean + rad];
    let v1 = if b.abs() > 1e-300 || (a - d[0]).abs() > 1e-300 {
        let v = if (a - d[0]).abs() >= (c - d[0]).abs() { [-b, a - d[0]] } else { [c - d[0], -b] };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if n > 0.0 {
            [v[0] / n, v[1] / n]
        } else {
            [1.0, 0.0]
        }
    } else {
        [1.0, 0.0]
    };
    let basis = [v1, [-v1[1], v1[0]]];
    let gp = [basis[0][0] * g[0] + basis[0][1] * g[1], basis[1][0] * g[0] + basis[1][1] * g[1]];
    let to_std = |z: [f64; 2]| [basis[0][0] * z[0] + basis[1][0] * z[1], basis[0][1] * z[0] + basis[1][1] * z[1]];
    // delta^2 (d1+s)^2 (d2+s)^2 - g1^2 (d2+s)^2 - g2^2 (d1+s)^2
    let sq = |r: f64| [r * r, 2.0 * r, 1.0];
    let p1 = sq(d[0]);
    let p2 = sq(d[1]);
    let mut quartic = [0.0f64; 5];
    for i in 0..3 {
        for j in 0..3 {
            quartic[i + j] += delta * delta * p1[i] * p2[j];
        }
    }
    for i in 0..3 {
        quartic[i] -= gp[0] * gp[0] * p2[i] + gp[1] * gp[1] * p1[i];
    }
    for s in real_roots(&quartic) {
        let (e0, e1) = (d[0] + s, d[1] + s);
        if e0.abs() < 1e-300 || e1.abs() < 1e-300 {
            continue;
        }
        cands.push(to_std([-gp[0] / e0, -gp[1] / e1]));
    }
    // hard case: s = -d_i with the matching gradient component zero
    for i in 0..2 {
        let j = 1 - i;
        let gap = d[j] - d[i];
        if gap.abs() < 1e-300 {
            continue;
        }
        let zj = -gp[j] / gap;
        let rest = delta * delta - zj * zj;
        if rest >= 0.0 {
            let t = rest.sqrt();
            for sign in [1.0, -1.0] {
                let mut z = [0.0; 2];
                z[j] = zj;
                z[i] = sign * t;
                cands.push(to_std(z));
            }
        }
    }
    cands
        .into_iter()
        .filter(|y| y[0].is_finite() && y[1].is_finite() && (y[0] * y[0] + y[1] * y[1]).sqrt() <= delta * (1.0 + 1e-10))
        .min_by(|p, q| model(*p).total_cmp(&model(*q)))
}

/// Real roots of `sum c_k s^k` (ascending coefficients) via companion-matrix eigenvalues.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |&v| v == 0.0) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let comp = faer::Mat::<f64>::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let Ok(eigs) = comp.eigenvalues() else { return Vec::new() };
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())) / lead.abs();
    eigs.into_iter()
        .filter(|z| z.im.abs() < 1e-10 * (1.0 + z.re.abs()))
        .map(|z| {
            // one Newton polish
            let (mut p, mut dp) = (0.0, 0.0);
            for &ck in c.iter().rev() {
                dp = dp * z.re + p;
                p = p * z.re + ck;
            }
            if dp != 0.0 && (p / dp).abs() < 1e-6 * (1.0 + scale) {
                z.re - p / dp
            } else {
                z.re
            }
        })
        .collect()
}

/// Outcome of a ratio test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio<T> {
    Finite(T),
    /// Predicted reduction is numerically zero.
    Escape,
}

/// Actual over predicted reduction of the penalized energy.
pub fn rho_penalty<T: Real>(p_old: T, p_new: T, predicted: T) -> Ratio<T> {
    if predicted.abs() < T::lit(1e-12) * (T::one() + p_old.abs()) {
        return Ratio::Escape;
    }
    Ratio::Finite((p_old - p_new) / predicted)
}

/// Acceptance and radius update for the penalty trust region.
pub fn tr_accept_adjust<T: Real>(rho: T, delta: T, step_norm: T, params: &TrPenaltyParams<T>) -> (bool, T) {
    let accept = rho > params.eta3;
    let on_boundary = (step_norm - delta).abs() <= T::lit(1e-12) * delta.max(T::one());
    let new_delta = if rho < params.eta1 {
        params.c1 * delta
    } else if rho > params.eta2 && on_boundary {
        (params.c3 * delta).min(params.delta_max)
    } else {
        delta
    };
    (accept, new_delta)
}

/// Relative residual reduction for a step scaled by `w`.
pub fn rho_lagrangian<T: Real>(res_old: T, res_new: T, w: T) -> T {
    (res_old - res_new) / (w * res_old)
}

/// Acceptance and scale update for the Lagrangian trust region.
pub fn lagrangian_accept_adjust<T: Real>(rho: T, w: T, params: &TrLagrangianParams<T>) -> (bool, T) {
    let at_floor = w <= params.w_min * (T::one() + T::lit(1e-12));
    let accept = rho > params.eta2 || at_floor;
    let new_w = if rho < params.eta2 {
        (w - params.w_dec).max(params.w_min)
    } else if rho < params.eta1 {
        w
    } else {
        (w + params.w_inc).min(T::one())
    };
    (accept, new_w)
}
