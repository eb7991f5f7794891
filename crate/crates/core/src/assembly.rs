//! Gradients and Newton systems for the penalty, Lagrange-multiplier and
//! flexoelectric formulations.
//!
//! Every formulation is a smooth functional of the node-major unknown vector
//! `[u; lambda]`, with `u` holding `(n1, n2, n3)` or `(n1, n2, n3, phi)` per
//! Q2 node and `lambda` one value per cell. The assembled right-hand side is
//! the negative gradient and the matrix is the exact second derivative, with
//! Dirichlet rows and columns replaced by the identity.

use crate::energy::{gather_cell, point_state, ElectricConstants, FrankConstants, PointState};
use crate::error::{Error, Result};
use crate::fe::{CellTables, FeSpace, Family, NODES_PER_CELL};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::scalar::{cross3, dot3, Real};
use crate::sparse::SparseMatrix;

/// Placement of the unknowns of one formulation on one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    mesh: Mesh,
    stride: usize,
    multiplier: bool,
}

impl Layout {
    /// Director only.
    pub fn penalty(mesh: Mesh) -> Self {
        Self { mesh, stride: 3, multiplier: false }
    }

    /// Director plus a piecewise-constant multiplier.
    pub fn lagrangian(mesh: Mesh) -> Self {
        Self { mesh, stride: 3, multiplier: true }
    }

    /// Collocated director and potential plus a multiplier.
    pub fn flexo(mesh: Mesh) -> Self {
        Self { mesh, stride: 4, multiplier: true }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Values per Q2 node (3, or 4 with the potential).
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn has_multiplier(&self) -> bool {
        self.multiplier
    }

    pub fn has_potential(&self) -> bool {
        self.stride == 4
    }

    /// Q2 space carrying the nodal unknowns.
    pub fn space(&self) -> FeSpace {
        FeSpace::new(self.mesh, Family::Q2 { components: self.stride }).expect("stride is positive")
    }

    pub fn node_count(&self) -> usize {
        self.space().node_count()
    }

    /// Number of nodal unknowns; the multipliers start here.
    pub fn field_dofs(&self) -> usize {
        self.stride * self.node_count()
    }

    pub fn multiplier_count(&self) -> usize {
        if self.multiplier {
            self.mesh.cell_count()
        } else {
            0
        }
    }

    pub fn dof_count(&self) -> usize {
        self.field_dofs() + self.multiplier_count()
    }

    /// Dirichlet flags for every unknown.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = self.space().boundary_mask();
        mask.resize(self.dof_count(), false);
        mask
    }

    /// Global indices of the director unknowns.
    pub fn director_indices(&self) -> Vec<usize> {
        (0..self.node_count()).flat_map(|n| (0..3).map(move |a| n * self.stride + a)).collect()
    }

    pub fn potential_indices(&self) -> Vec<usize> {
        if self.stride < 4 {
            return Vec::new();
        }
        (0..self.node_count()).map(|n| n * self.stride + 3).collect()
    }

    pub fn multiplier_indices(&self) -> Vec<usize> {
        (self.field_dofs()..self.dof_count()).collect()
    }

    /// Same formulation on the refined mesh.
    pub fn refined(&self) -> Self {
        Self { mesh: self.mesh.refine(), ..*self }
    }

    /// Interpolation from this layout to `fine`: Q2 transfer for nodal
    /// unknowns, parent injection for multipliers.
    pub fn prolongation<T: Real>(&self, fine: &Layout) -> Result<SparseMatrix<T>> {
        if self.stride != fine.stride || self.multiplier != fine.multiplier {
            return Err(Error::invalid("prolongation between different formulations"));
        }
        let pu = self.space().prolongation::<T>(&fine.space())?;
        let mut trip = Vec::with_capacity(pu.nnz() + fine.multiplier_count());
        for r in 0..pu.nrows() {
            let (cols, vals) = pu.row(r);
            trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        if self.multiplier {
            let pl = FeSpace::p0(self.mesh).prolongation::<T>(&FeSpace::p0(fine.mesh))?;
            for r in 0..pl.nrows() {
                let (cols, vals) = pl.row(r);
                trip.extend(
                    cols.iter().zip(vals).map(|(&c, &v)| (r + fine.field_dofs(), c + self.field_dofs(), v)),
                );
            }
        }
        SparseMatrix::from_triplets(fine.dof_count(), self.dof_count(), &trip)
    }
}

/// Material constants of one formulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model<T> {
    pub frank: FrankConstants<T>,
    /// Penalty weight; `None` for multiplier formulations.
    pub zeta: Option<T>,
    pub electric: Option<ElectricConstants<T>>,
}

impl<T: Real> Model<T> {
    pub fn penalty(frank: FrankConstants<T>, zeta: T) -> Self {
        Self { frank, zeta: Some(zeta), electric: None }
    }

    pub fn lagrangian(frank: FrankConstants<T>) -> Self {
        Self { frank, zeta: None, electric: None }
    }

    pub fn flexo(frank: FrankConstants<T>, electric: ElectricConstants<T>) -> Self {
        Self { frank, zeta: None, electric: Some(electric) }
    }
}

/// Named blocks of an assembled saddle-point system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// director-director
    A,
    /// director-potential
    B1,
    /// director-multiplier
    B2,
    /// potential-potential, stored with the sign flipped
    D,
}

/// Newton system `M dx = rhs` for one formulation.
#[derive(Debug, Clone)]
pub struct BlockSystem<T> {
    pub layout: Layout,
    pub matrix: SparseMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> BlockSystem<T> {
    pub fn block(&self, block: Block) -> SparseMatrix<T> {
        let n = self.layout.director_indices();
        let p = self.layout.potential_indices();
        let l = self.layout.multiplier_indices();
        match block {
            Block::A => self.matrix.submatrix(&n, &n),
            Block::B1 => self.matrix.submatrix(&n, &p),
            Block::B2 => self.matrix.submatrix(&n, &l),
            Block::D => {
                let mut d = self.matrix.submatrix(&p, &p);
                d.scale(-T::one());
                d
            }
        }
    }

    /// Right-hand side restricted to the given unknowns.
    pub fn rhs_segment(&self, indices: &[usize]) -> Vec<T> {
        indices.iter().map(|&i| self.rhs[i]).collect()
    }
}

/// A test or trial direction at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
struct Variation<T> {
    v: [T; 3],
    d: T,
    c: [T; 3],
    h: [T; 3],
    /// `v.curl n + n.curl v`
    p: T,
    /// `v.grad phi + n.h`
    q: T,
}

/// Assembles one formulation on one mesh; the sparsity pattern is built once.
#[derive(Debug, Clone)]
pub struct Assembler<T> {
    layout: Layout,
    model: Model<T>,
    space: FeSpace,
    tables: CellTables<T>,
    pattern: SparseMatrix<T>,
    mask: Vec<bool>,
}

impl<T: Real> Assembler<T> {
    pub fn new(layout: Layout, model: Model<T>) -> Result<Self> {
        if layout.has_potential() != model.electric.is_some() {
            return Err(Error::invalid("potential unknowns and electric constants must come together"));
        }
        if layout.has_multiplier() == model.zeta.is_some() {
            return Err(Error::invalid("exactly one of penalty weight or multiplier is required"));
        }
        let space = layout.space();
        let tables = CellTables::new(space.mesh(), &QuadratureRule::default());
        let pattern = Self::build_pattern(&layout, &space);
        let mask = layout.dirichlet_mask();
        Ok(Self { layout, model, space, tables, pattern, mask })
    }

    fn build_pattern(layout: &Layout, space: &FeSpace) -> SparseMatrix<T> {
        let n = layout.dof_count();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut dofs = Vec::with_capacity(NODES_PER_CELL * 4 + 1);
        for cell in 0..layout.mesh.cell_count() {
            Self::cell_dofs(layout, space, cell, &mut dofs);
            for &r in &dofs {
                rows[r].extend_from_slice(&dofs);
            }
        }
        SparseMatrix::from_rows(n, n, rows)
    }

    fn cell_dofs(layout: &Layout, space: &FeSpace, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        for &node in space.cell_nodes(cell).iter() {
            for c in 0..layout.stride {
                out.push(node * layout.stride + c);
            }
        }
        if layout.multiplier {
            out.push(layout.field_dofs() + cell);
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    /// Nonzeros of the system matrix.
    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.layout.dof_count() {
            return Err(Error::invalid(format!(
                "state has {} entries, layout expects {}",
                x.len(),
                self.layout.dof_count()
            )));
        }
        Ok(())
    }

    /// Integrand of the functional at one point.
    fn density(&self, s: &PointState<T>, lambda: T) -> T {
        let m = &self.model;
        let e = s.length_defect();
        let mut w = s.elastic_density(&m.frank);
        if let Some(z) = m.zeta {
            w += z * e * e;
        }
        if self.layout.multiplier {
            w += lambda * e;
        }
        if let Some(ec) = m.electric {
            let g = s.grad_phi;
            let ng = dot3(&s.n, &g);
            w += -ec.eps0 * ec.eps_perp * dot3(&g, &g) - ec.eps0 * ec.eps_a() * ng * ng
                + T::lit(2.0) * (ec.e_s * s.div() * ng + ec.e_b * dot3(&cross3(&s.n, &s.curl()), &g));
        }
        w
    }

    /// Value of the minimized functional: the penalized energy, the Lagrangian,
    /// or the flexoelectric Lagrangian, all in the functional scale.
    pub fn objective(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        let (u, lam) = x.split_at(self.layout.field_dofs());
        let mut total = T::zero();
        for cell in 0..self.layout.mesh.cell_count() {
            let loc = gather_cell(&self.space, u, cell);
            let l = if self.layout.multiplier { lam[cell] } else { T::zero() };
            for q in 0..self.tables.len() {
                total += self.tables.jxw[q] * self.density(&point_state(&self.tables, &loc, q), l);
            }
        }
        Ok(total)
    }

    fn variations(&self, s: &PointState<T>, q: usize, out: &mut Vec<Variation<T>>) {
        out.clear();
        let (val, gx, gy) = (&self.tables.values[q], &self.tables.grad_x[q], &self.tables.grad_y[q]);
        let z = T::zero();
        let curl = s.curl();
        for l in 0..NODES_PER_CELL {
            let (nv, nx, ny) = (val[l], gx[l], gy[l]);
            for a in 0..self.layout.stride {
                let mut w = Variation::default();
                match a {
                    0 => {
                        w.v = [nv, z, z];
                        w.d = nx;
                        w.c = [z, z, -ny];
                    }
                    1 => {
                        w.v = [z, nv, z];
                        w.d = ny;
                        w.c = [z, z, nx];
                    }
                    2 => {
                        w.v = [z, z, nv];
                        w.c = [ny, -nx, z];
                    }
                    _ => w.h = [nx, ny, z],
                }
                w.p = dot3(&w.v, &curl) + dot3(&s.n, &w.c);
                w.q = dot3(&w.v, &s.grad_phi) + dot3(&s.n, &w.h);
                out.push(w);
            }
        }
    }

    fn first_variation(&self, s: &PointState<T>, lambda: T, w: &Variation<T>) -> T {
        let m = &self.model;
        let k = &m.frank;
        let two = T::lit(2.0);
        let c = s.curl();
        let nc = dot3(&s.n, &c);
        let e = s.length_defect();
        let nv = dot3(&s.n, &w.v);
        let mut r = two * k.k1 * s.div() * w.d + two * k.k3 * dot3(&c, &w.c) + two * (k.k2 - k.k3) * nc * w.p;
        if let Some(z) = m.zeta {
            r += T::lit(4.0) * z * e * nv;
        }
        if self.layout.multiplier {
            r += two * lambda * nv;
        }
        if let Some(ec) = m.electric {
            let g = &s.grad_phi;
            let ng = dot3(&s.n, g);
            r += -two * ec.eps0 * ec.eps_perp * dot3(g, &w.h) - two * ec.eps0 * ec.eps_a() * ng * w.q
                + two * ec.e_s * (w.d * ng + s.div() * w.q)
                + two
                    * ec.e_b
                    * (dot3(&cross3(&w.v, &c), g) + dot3(&cross3(&s.n, &w.c), g) + dot3(&cross3(&s.n, &c), &w.h));
        }
        r
    }

    fn second_variation(&self, s: &PointState<T>, lambda: T, t: &Variation<T>, w: &Variation<T>) -> T {
        let m = &self.model;
        let k = &m.frank;
        let two = T::lit(2.0);
        let c = s.curl();
        let nc = dot3(&s.n, &c);
        let tv = dot3(&t.v, &w.v);
        let mut r = two * k.k1 * t.d * w.d
            + two * k.k3 * dot3(&t.c, &w.c)
            + two * (k.k2 - k.k3) * (t.p * w.p + nc * (dot3(&w.v, &t.c) + dot3(&t.v, &w.c)));
        if let Some(z) = m.zeta {
            let e = s.length_defect();
            r += T::lit(4.0) * z * (two * dot3(&s.n, &t.v) * dot3(&s.n, &w.v) + e * tv);
        }
        if self.layout.multiplier {
            r += two * lambda * tv;
        }
        if let Some(ec) = m.electric {
            let g = &s.grad_phi;
            let ng = dot3(&s.n, g);
            let cross = |a: &[T; 3], b: &[T; 3], d: &[T; 3]| dot3(&cross3(a, b), d);
            r += -two * ec.eps0 * ec.eps_perp * dot3(&t.h, &w.h)
                - two * ec.eps0 * ec.eps_a() * (t.q * w.q + ng * (dot3(&w.v, &t.h) + dot3(&t.v, &w.h)))
                + two * ec.e_s * (w.d * t.q + t.d * w.q + s.div() * (dot3(&w.v, &t.h) + dot3(&t.v, &w.h)))
                + two
                    * ec.e_b
                    * (cross(&w.v, &t.c, g)
                        + cross(&w.v, &c, &t.h)
                        + cross(&t.v, &w.c, g)
                        + cross(&s.n, &w.c, &t.h)
                        + cross(&t.v, &c, &w.h)
                        + cross(&s.n, &t.c, &w.h));
        }
        r
    }

    /// Element vector and (optionally) matrix of one cell, in `cell_dofs` order.
    fn cell_contrib(&self, x: &[T], cell: usize, vec: &mut [T], mat: Option<&mut [T]>, scratch: &mut Vec<Variation<T>>) {
        let (u, lam) = x.split_at(self.layout.field_dofs());
        let loc = gather_cell(&self.space, u, cell);
        let lambda = if self.layout.multiplier { lam[cell] } else { T::zero() };
        let nf = NODES_PER_CELL * self.layout.stride;
        let ld = nf + usize::from(self.layout.multiplier);
        vec.iter_mut().for_each(|v| *v = T::zero());
        let mut mat = mat;
        if let Some(m) = mat.as_deref_mut() {
            m.iter_mut().for_each(|v| *v = T::zero());
        }
        let two = T::lit(2.0);
        for q in 0..self.tables.len() {
            let s = point_state(&self.tables, &loc, q);
            let jxw = self.tables.jxw[q];
            self.variations(&s, q, scratch);
            for (i, w) in scratch.iter().enumerate() {
                vec[i] += jxw * self.first_variation(&s, lambda, w);
            }
            if self.layout.multiplier {
                vec[nf] += jxw * s.length_defect();
            }
            if let Some(m) = mat.as_deref_mut() {
                for i in 0..nf {
                    for j in i..nf {
                        let h = jxw * self.second_variation(&s, lambda, &scratch[j], &scratch[i]);
                        m[i * ld + j] += h;
                    }
                    if self.layout.multiplier {
                        m[i * ld + nf] += jxw * two * dot3(&s.n, &scratch[i].v);
                    }
                }
            }
        }
        if let Some(m) = mat {
            for i in 0..ld {
                for j in 0..i {
                    m[i * ld + j] = m[j * ld + i];
                }
            }
        }
    }

    /// Gradient of [`Self::objective`], zero at Dirichlet unknowns.
    pub fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x)?;
        let mut g = vec![T::zero(); self.layout.dof_count()];
        let mut dofs = Vec::new();
        let mut scratch = Vec::new();
        let ld = NODES_PER_CELL * self.layout.stride + usize::from(self.layout.multiplier);
        let mut ve = vec![T::zero(); ld];
        for cell in 0..self.layout.mesh.cell_count() {
            Self::cell_dofs(&self.layout, &self.space, cell, &mut dofs);
            self.cell_contrib(x, cell, &mut ve, None, &mut scratch);
            for (i, &r) in dofs.iter().enumerate() {
                g[r] += ve[i];
            }
        }
        for (gi, &m) in g.iter_mut().zip(&self.mask) {
            if m {
                *gi = T::zero();
            }
        }
        Ok(g)
    }

    /// Second derivative of [`Self::objective`] with Dirichlet rows and
    /// columns replaced by the identity, and the negative gradient.
    pub fn system(&self, x: &[T]) -> Result<BlockSystem<T>> {
        self.check(x)?;
        let mut mat = self.pattern.clone();
        let mut rhs = vec![T::zero(); self.layout.dof_count()];
        let mut dofs = Vec::new();
        let mut scratch = Vec::new();
        let ld = NODES_PER_CELL * self.layout.stride + usize::from(self.layout.multiplier);
        let mut ve = vec![T::zero(); ld];
        let mut me = vec![T::zero(); ld * ld];
        for cell in 0..self.layout.mesh.cell_count() {
            Self::cell_dofs(&self.layout, &self.space, cell, &mut dofs);
            self.cell_contrib(x, cell, &mut ve, Some(&mut me), &mut scratch);
            for (i, &r) in dofs.iter().enumerate() {
                rhs[r] -= ve[i];
                scatter_row(&mut mat, r, &dofs, &me[i * ld..(i + 1) * ld]);
            }
        }
        mat.constrain(&self.mask);
        for (ri, &m) in rhs.iter_mut().zip(&self.mask) {
            if m {
                *ri = T::zero();
            }
        }
        Ok(BlockSystem { layout: self.layout, matrix: mat, rhs })
    }

    /// Unconstrained Hessian (no Dirichlet elimination), for oracle tests.
    pub fn raw_hessian(&self, x: &[T]) -> Result<SparseMatrix<T>> {
        self.check(x)?;
        let mut mat = self.pattern.clone();
        let mut dofs = Vec::new();
        let mut scratch = Vec::new();
        let ld = NODES_PER_CELL * self.layout.stride + usize::from(self.layout.multiplier);
        let mut ve = vec![T::zero(); ld];
        let mut me = vec![T::zero(); ld * ld];
        for cell in 0..self.layout.mesh.cell_count() {
            Self::cell_dofs(&self.layout, &self.space, cell, &mut dofs);
            self.cell_contrib(x, cell, &mut ve, Some(&mut me), &mut scratch);
            for (i, &r) in dofs.iter().enumerate() {
                scatter_row(&mut mat, r, &dofs, &me[i * ld..(i + 1) * ld]);
            }
        }
        Ok(mat)
    }

    /// Unconstrained gradient, for oracle tests.
    pub fn raw_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x)?;
        let mut g = vec![T::zero(); self.layout.dof_count()];
        let mut dofs = Vec::new();
        let mut scratch = Vec::new();
        let ld = NODES_PER_CELL * self.layout.stride + usize::from(self.layout.multiplier);
        let mut ve = vec![T::zero(); ld];
        for cell in 0..self.layout.mesh.cell_count() {
            Self::cell_dofs(&self.layout, &self.space, cell, &mut dofs);
            self.cell_contrib(x, cell, &mut ve, None, &mut scratch);
            for (i, &r) in dofs.iter().enumerate() {
                g[r] += ve[i];
            }
        }
        Ok(g)
    }
}

fn scatter_row<T: Real>(mat: &mut SparseMatrix<T>, row: usize, dofs: &[usize], vals: &[T]) {
    for (&c, &v) in dofs.iter().zip(vals) {
        mat.add(row, c, v);
    }
}

/// Gradient of the penalized functional for a director-only field.
pub fn assemble_penalty_gradient<T: Real>(
    space: &FeSpace,
    u: &[T],
    fc: &FrankConstants<T>,
    zeta: T,
) -> Result<Vec<T>> {
    Assembler::new(Layout::penalty(*space.mesh()), Model::penalty(*fc, zeta))?.gradient(u)
}

/// Hessian of the penalized functional, Dirichlet unknowns eliminated.
pub fn assemble_penalty_hessian<T: Real>(
    space: &FeSpace,
    u: &[T],
    fc: &FrankConstants<T>,
    zeta: T,
) -> Result<SparseMatrix<T>> {
    Ok(Assembler::new(Layout::penalty(*space.mesh()), Model::penalty(*fc, zeta))?.system(u)?.matrix)
}

/// Newton system of the Lagrangian for the state `x = [n; lambda]`.
pub fn assemble_lagrangian_system<T: Real>(mesh: &Mesh, x: &[T], fc: &FrankConstants<T>) -> Result<BlockSystem<T>> {
    Assembler::new(Layout::lagrangian(*mesh), Model::lagrangian(*fc))?.system(x)
}

/// Newton system of the flexoelectric Lagrangian for `x = [(n, phi); lambda]`.
pub fn assemble_flexo_system<T: Real>(
    mesh: &Mesh,
    x: &[T],
    fc: &FrankConstants<T>,
    ec: &ElectricConstants<T>,
) -> Result<BlockSystem<T>> {
    Assembler::new(Layout::flexo(*mesh), Model::flexo(*fc, *ec))?.system(x)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient<T: Real>(mut f: impl FnMut(&[T]) -> T, x: &[T], eps: T) -> Vec<T> {
    let mut xp = x.to_vec();
    let two = T::lit(2.0);
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + eps;
            let fp = f(&xp);
            xp[i] = x[i] - eps;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (two * eps)
        })
        .collect()
}
