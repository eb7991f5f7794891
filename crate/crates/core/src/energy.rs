//! Frank-Oseen, penalty and flexoelectric energies of Q2 director fields.
//!
//! The director occupies components `0..3` of a node-major Q2 coefficient
//! vector; a fourth component, when present, is the electric potential.
//! Fields are independent of `z`, so the divergence only sees the in-plane
//! components while the curl keeps all three.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{CellTables, FeSpace, Family, NODES_PER_CELL};
use crate::quadrature::QuadratureRule;
use crate::scalar::{cross3, dot3, Real};

/// Splay, twist and bend constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankConstants<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
}

impl<T: Real> FrankConstants<T> {
    pub fn new(k1: T, k2: T, k3: T) -> Result<Self> {
        if !(k1 >= T::zero()) || !(k2 > T::zero()) || !(k3 > T::zero()) {
            return Err(Error::invalid(format!("Frank constants need K1 >= 0, K2, K3 > 0; got ({k1}, {k2}, {k3})")));
        }
        Ok(Self { k1, k2, k3 })
    }

    pub fn kappa(&self) -> T {
        self.k2 / self.k3
    }
}

/// Dielectric and flexoelectric constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricConstants<T> {
    pub eps0: T,
    pub eps_par: T,
    pub eps_perp: T,
    pub e_s: T,
    pub e_b: T,
}

impl<T: Real> ElectricConstants<T> {
    pub fn eps_a(&self) -> T {
        self.eps_par - self.eps_perp
    }

    /// Constants with every coupling switched off except the isotropic dielectric term.
    pub fn uncoupled(eps0: T, eps_perp: T) -> Self {
        Self { eps0, eps_par: eps_perp, eps_perp, e_s: T::zero(), e_b: T::zero() }
    }
}

/// Weight of the unit-length penalty term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig<T> {
    pub zeta: T,
}

impl<T: Real> PenaltyConfig<T> {
    pub fn new(zeta: T) -> Result<Self> {
        if !(zeta > T::zero()) || !zeta.is_finite() {
            return Err(Error::invalid(format!("penalty weight must be positive, got {zeta}")));
        }
        Ok(Self { zeta })
    }
}

/// `Z = I - (1 - kappa) n n^T`.
pub fn z_tensor<T: Real>(n: &[T; 3], kappa: T) -> [[T; 3]; 3] {
    let s = T::one() - kappa;
    let mut z = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            z[i][j] = -s * n[i] * n[j];
        }
        z[i][i] += T::one();
    }
    z
}

/// Director, its derivatives and the potential gradient at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointState<T> {
    pub n: [T; 3],
    pub n_x: [T; 3],
    pub n_y: [T; 3],
    pub phi: T,
    /// `(phi_x, phi_y, 0)`
    pub grad_phi: [T; 3],
}

impl<T: Real> PointState<T> {
    pub fn div(&self) -> T {
        self.n_x[0] + self.n_y[1]
    }

    pub fn curl(&self) -> [T; 3] {
        [self.n_y[2], -self.n_x[2], self.n_x[1] - self.n_y[0]]
    }

    /// `n . n - 1`
    pub fn length_defect(&self) -> T {
        dot3(&self.n, &self.n) - T::one()
    }

    /// Elastic integrand in the functional scale: `K1 div^2 + K3 (Z curl).curl`.
    pub fn elastic_density(&self, fc: &FrankConstants<T>) -> T {
        let d = self.div();
        let c = self.curl();
        let nc = dot3(&self.n, &c);
        fc.k1 * d * d + fc.k3 * dot3(&c, &c) + (fc.k2 - fc.k3) * nc * nc
    }
}

/// Node values of `cell`, padded to four components.
pub(crate) fn gather_cell<T: Real>(space: &FeSpace, u: &[T], cell: usize) -> [[T; 4]; NODES_PER_CELL] {
    let k = space.components();
    let mut loc = [[T::zero(); 4]; NODES_PER_CELL];
    for (l, &node) in space.cell_nodes(cell).iter().enumerate() {
        for c in 0..k.min(4) {
            loc[l][c] = u[node * k + c];
        }
    }
    loc
}

pub(crate) fn point_state<T: Real>(tables: &CellTables<T>, loc: &[[T; 4]; NODES_PER_CELL], q: usize) -> PointState<T> {
    let (v, gx, gy) = (&tables.values[q], &tables.grad_x[q], &tables.grad_y[q]);
    let mut s = PointState::<T>::default();
    for l in 0..NODES_PER_CELL {
        for a in 0..3 {
            s.n[a] += v[l] * loc[l][a];
            s.n_x[a] += gx[l] * loc[l][a];
            s.n_y[a] += gy[l] * loc[l][a];
        }
        s.phi += v[l] * loc[l][3];
        s.grad_phi[0] += gx[l] * loc[l][3];
        s.grad_phi[1] += gy[l] * loc[l][3];
    }
    s
}

/// Iterates over every quadrature point of a Q2 field.
pub(crate) struct FieldSampler<'a, T> {
    pub space: &'a FeSpace,
    pub tables: CellTables<T>,
}

impl<'a, T: Real> FieldSampler<'a, T> {
    pub fn new(space: &'a FeSpace) -> Self {
        Self::with_rule(space, &QuadratureRule::default())
    }

    pub fn with_rule(space: &'a FeSpace, rule: &QuadratureRule<T>) -> Self {
        Self { space, tables: CellTables::new(space.mesh(), rule) }
    }

    pub fn gather(&self, u: &[T], cell: usize) -> [[T; 4]; NODES_PER_CELL] {
        gather_cell(self.space, u, cell)
    }

    pub fn state(&self, loc: &[[T; 4]; NODES_PER_CELL], q: usize) -> PointState<T> {
        point_state(&self.tables, loc, q)
    }

    /// Sums `f(cell, state) * jxw` over all quadrature points.
    pub fn integrate(&self, u: &[T], mut f: impl FnMut(usize, &PointState<T>) -> T) -> T {
        let mut total = T::zero();
        for cell in 0..self.space.mesh().cell_count() {
            let loc = self.gather(u, cell);
            let mut cell_sum = T::zero();
            for q in 0..self.tables.len() {
                let s = self.state(&loc, q);
                cell_sum += f(cell, &s) * self.tables.jxw[q];
            }
            total += cell_sum;
        }
        total
    }

    pub fn for_each_point(&self, u: &[T], mut f: impl FnMut(usize, &PointState<T>)) {
        for cell in 0..self.space.mesh().cell_count() {
            let loc = self.gather(u, cell);
            for q in 0..self.tables.len() {
                f(cell, &self.state(&loc, q));
            }
        }
    }
}

fn check_field<T>(space: &FeSpace, u: &[T]) -> Result<()> {
    match space.family() {
        Family::Q2 { components } if components >= 3 => {}
        _ => return Err(Error::invalid("director fields live in a Q2 space with at least 3 components")),
    }
    if u.len() != space.dof_count() {
        return Err(Error::invalid(format!(
            "field has {} coefficients, space expects {}",
            u.len(),
            space.dof_count()
        )));
    }
    Ok(())
}

/// Reported Frank-Oseen energy `∫ w_F`, half the minimized functional.
pub fn frank_energy<T: Real>(space: &FeSpace, u: &[T], fc: &FrankConstants<T>) -> Result<T> {
    check_field(space, u)?;
    let s = FieldSampler::new(space);
    Ok(s.integrate(u, |_, p| p.elastic_density(fc)) * T::lit(0.5))
}

/// `∫ (n.n - 1)^2`.
pub fn constraint_value<T: Real>(space: &FeSpace, u: &[T]) -> Result<T> {
    check_field(space, u)?;
    let s = FieldSampler::new(space);
    Ok(s.integrate(u, |_, p| {
        let e = p.length_defect();
        e * e
    }))
}

/// Penalized functional: elastic part in functional scale plus `zeta ∫ (n.n - 1)^2`.
pub fn penalty_energy<T: Real>(space: &FeSpace, u: &[T], fc: &FrankConstants<T>, pc: &PenaltyConfig<T>) -> Result<T> {
    check_field(space, u)?;
    let s = FieldSampler::new(space);
    Ok(s.integrate(u, |_, p| {
        let e = p.length_defect();
        p.elastic_density(fc) + pc.zeta * e * e
    }))
}

/// Lagrangian `F(n) + ∫ lambda (n.n - 1)` with one multiplier per cell.
pub fn lagrangian_value<T: Real>(space: &FeSpace, u: &[T], lambda: &[T], fc: &FrankConstants<T>) -> Result<T> {
    check_field(space, u)?;
    if lambda.len() != space.mesh().cell_count() {
        return Err(Error::invalid("multiplier needs one value per cell"));
    }
    let s = FieldSampler::new(space);
    Ok(s.integrate(u, |cell, p| p.elastic_density(fc) + lambda[cell] * p.length_defect()))
}

/// Extremes of `n.n - 1` over all quadrature points.
pub fn deviation_stats<T: Real>(space: &FeSpace, u: &[T]) -> Result<(T, T)> {
    check_field(space, u)?;
    let s = FieldSampler::new(space);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    s.for_each_point(u, |_, p| {
        let e = p.length_defect();
        lo = lo.min(e);
        hi = hi.max(e);
    });
    Ok((lo, hi))
}

/// Terms of the flexoelectric functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexoEnergy<T> {
    /// Full functional value.
    pub total: T,
    /// Elastic part in the functional scale (no 1/2).
    pub elastic: T,
    /// `-eps0 eps_perp |grad phi|^2 - eps0 eps_a (n.grad phi)^2`
    pub dielectric: T,
    /// `2 e_s div(n)(n.grad phi) + 2 e_b (n x curl n).grad phi`
    pub coupling: T,
}

impl<T: Real> FlexoEnergy<T> {
    /// The same energy with the elastic part halved, matching `∫ w_F`.
    pub fn half_elastic_total(&self) -> T {
        self.total - self.elastic * T::lit(0.5)
    }
}

/// Evaluates the flexoelectric functional on a four-component field `(n, phi)`.
pub fn flexo_energy<T: Real>(
    space: &FeSpace,
    u: &[T],
    fc: &FrankConstants<T>,
    ec: &ElectricConstants<T>,
) -> Result<FlexoEnergy<T>> {
    if space.family() != (Family::Q2 { components: 4 }) {
        return Err(Error::invalid("flexoelectric energy needs collocated (n, phi) Q2 field"));
    }
    check_field(space, u)?;
    let s = FieldSampler::new(space);
    let (mut el, mut di, mut co) = (T::zero(), T::zero(), T::zero());
    let two = T::lit(2.0);
    for cell in 0..space.mesh().cell_count() {
        let loc = s.gather(u, cell);
        for q in 0..s.tables.len() {
            let p = s.state(&loc, q);
            let w = s.tables.jxw[q];
            let g = p.grad_phi;
            let ng = dot3(&p.n, &g);
            el += w * p.elastic_density(fc);
            di += w * (-ec.eps0 * ec.eps_perp * dot3(&g, &g) - ec.eps0 * ec.eps_a() * ng * ng);
            co += w * two * (ec.e_s * p.div() * ng + ec.e_b * dot3(&cross3(&p.n, &p.curl()), &g));
        }
    }
    Ok(FlexoEnergy { total: el + di + co, elastic: el, dielectric: di, coupling: co })
}

/// `sqrt(∫ |n_h - n*|^2)` against a pointwise reference director, using a
/// 5x5 Gauss rule so the nodal superconvergence of Q2 does not bias the result.
pub fn director_l2_distance<T: Real>(space: &FeSpace, u: &[T], exact: impl Fn(T, T) -> [T; 3]) -> Result<T> {
    check_field(space, u)?;
    let rule = QuadratureRule::gauss(9);
    let s = FieldSampler::with_rule(space, &rule);
    let (hx, hy) = space.mesh().spacing::<T>();
    let mut total = T::zero();
    for cell in 0..space.mesh().cell_count() {
        let (x0, y0) = space.mesh().cell_origin::<T>(cell);
        let loc = s.gather(u, cell);
        for q in 0..s.tables.len() {
            let [rx, ry] = s.tables.ref_points[q];
            let e = exact(x0 + rx * hx, y0 + ry * hy);
            let p = s.state(&loc, q);
            let d = [p.n[0] - e[0], p.n[1] - e[1], p.n[2] - e[2]];
            total += dot3(&d, &d) * s.tables.jxw[q];
        }
    }
    Ok(total.sqrt())
}
