//! Q2 and P0 finite-element spaces on a structured mesh.
//!
//! Q2 nodes form a `(2nx [+1]) x (2ny + 1)` lattice with spacing `h/2`; the
//! `+1` column is dropped when the mesh is periodic in `x`. Vector-valued
//! spaces store their components contiguously per node.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

/// Number of Q2 nodes in one cell.
pub const NODES_PER_CELL: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Continuous biquadratic, `components` values per node.
    Q2 { components: usize },
    /// Piecewise constant, one value per cell.
    P0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeSpace {
    mesh: Mesh,
    family: Family,
}

impl FeSpace {
    pub fn new(mesh: Mesh, family: Family) -> Result<Self> {
        if let Family::Q2 { components } = family {
            if components == 0 {
                return Err(Error::invalid("Q2 space needs at least one component"));
            }
        }
        Ok(Self { mesh, family })
    }

    /// Three-component Q2 space for the director.
    pub fn q2_vector(mesh: Mesh) -> Self {
        Self { mesh, family: Family::Q2 { components: 3 } }
    }

    pub fn q2_scalar(mesh: Mesh) -> Self {
        Self { mesh, family: Family::Q2 { components: 1 } }
    }

    pub fn p0(mesh: Mesh) -> Self {
        Self { mesh, family: Family::P0 }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Values stored per node (per cell for P0).
    pub fn components(&self) -> usize {
        match self.family {
            Family::Q2 { components } => components,
            Family::P0 => 1,
        }
    }

    /// Node columns of the Q2 lattice.
    pub fn node_cols(&self) -> usize {
        let c = 2 * self.mesh.nx();
        if self.mesh.periodic_x() {
            c
        } else {
            c + 1
        }
    }

    pub fn node_rows(&self) -> usize {
        2 * self.mesh.ny() + 1
    }

    /// Q2 nodes, or cells for P0.
    pub fn node_count(&self) -> usize {
        match self.family {
            Family::Q2 { .. } => self.node_cols() * self.node_rows(),
            Family::P0 => self.mesh.cell_count(),
        }
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.components()
    }

    /// Lattice position `(ix, iy)` of a Q2 node.
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        let cols = self.node_cols();
        (node % cols, node / cols)
    }

    /// Physical coordinates of a Q2 node, or of the centre of a P0 cell.
    pub fn node_coord<T: Real>(&self, node: usize) -> [T; 2] {
        match self.family {
            Family::Q2 { .. } => {
                let (ix, iy) = self.node_ij(node);
                [
                    T::from_count(ix) / T::from_count(2 * self.mesh.nx()),
                    T::from_count(iy) / T::from_count(2 * self.mesh.ny()),
                ]
            }
            Family::P0 => {
                let (i, j) = self.mesh.cell_ij(node);
                let half = T::lit(0.5);
                [
                    (T::from_count(i) + half) / T::from_count(self.mesh.nx()),
                    (T::from_count(j) + half) / T::from_count(self.mesh.ny()),
                ]
            }
        }
    }

    /// Q2 nodes of `cell`; local index is `3 * b + a` for the `a`-th node in
    /// `x` and `b`-th in `y`.
    pub fn cell_nodes(&self, cell: usize) -> [usize; NODES_PER_CELL] {
        let (i, j) = self.mesh.cell_ij(cell);
        let cols = self.node_cols();
        let mut out = [0; NODES_PER_CELL];
        for b in 0..3 {
            for a in 0..3 {
                out[3 * b + a] = (2 * j + b) * cols + (2 * i + a) % cols;
            }
        }
        out
    }

    /// Dirichlet nodes: the `y`-edges, plus the `x`-edges when not periodic.
    pub fn is_boundary_node(&self, node: usize) -> bool {
        match self.family {
            Family::P0 => false,
            Family::Q2 { .. } => {
                let (ix, iy) = self.node_ij(node);
                iy == 0
                    || iy + 1 == self.node_rows()
                    || (!self.mesh.periodic_x() && (ix == 0 || ix + 1 == self.node_cols()))
            }
        }
    }

    /// Per-DOF Dirichlet flags.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let k = self.components();
        (0..self.dof_count()).map(|d| self.is_boundary_node(d / k)).collect()
    }

    /// Nodal interpolant of `f` (cell-centre values for P0).
    pub fn interpolate_fn<T: Real>(&self, f: impl Fn(T, T) -> Vec<T>) -> Vec<T> {
        let k = self.components();
        let mut out = Vec::with_capacity(self.dof_count());
        for node in 0..self.node_count() {
            let [x, y] = self.node_coord::<T>(node);
            let v = f(x, y);
            assert_eq!(v.len(), k, "interpolated function has wrong arity");
            out.extend_from_slice(&v);
        }
        out
    }

    /// Cell containing `(x, y)` and the reference coordinates inside it.
    pub fn locate<T: Real>(&self, x: T, y: T) -> (usize, [T; 2]) {
        let nx = T::from_count(self.mesh.nx());
        let ny = T::from_count(self.mesh.ny());
        let x = if self.mesh.periodic_x() { x - x.floor() } else { x };
        let sx = (x * nx).max(T::zero());
        let sy = (y * ny).max(T::zero());
        let i = sx.floor().to_usize().unwrap_or(0).min(self.mesh.nx() - 1);
        let j = sy.floor().to_usize().unwrap_or(0).min(self.mesh.ny() - 1);
        let xi = sx - T::from_count(i);
        let eta = sy - T::from_count(j);
        (self.mesh.cell_index(i, j), [xi, eta])
    }

    /// Evaluates the FE function with coefficients `coeffs` at a point.
    pub fn evaluate<T: Real>(&self, coeffs: &[T], x: T, y: T) -> Vec<T> {
        assert_eq!(coeffs.len(), self.dof_count());
        let (cell, [xi, eta]) = self.locate(x, y);
        let k = self.components();
        match self.family {
            Family::P0 => vec![coeffs[cell]],
            Family::Q2 { .. } => {
                let (val, _, _) = q2_basis(xi, eta);
                let nodes = self.cell_nodes(cell);
                let mut out = vec![T::zero(); k];
                for (l, &node) in nodes.iter().enumerate() {
                    for c in 0..k {
                        out[c] += val[l] * coeffs[node * k + c];
                    }
                }
                out
            }
        }
    }

    /// Interpolation from this space to its refinement `fine`.
    ///
    /// Q2 spaces are nested, so the matrix reproduces the coarse function
    /// exactly; P0 children copy their parent.
    pub fn prolongation<T: Real>(&self, fine: &FeSpace) -> Result<SparseMatrix<T>> {
        if self.family != fine.family {
            return Err(Error::invalid("prolongation between different element families"));
        }
        if *self == *fine {
            return Ok(SparseMatrix::identity(self.dof_count()));
        }
        if !self.mesh.is_parent_of(&fine.mesh) {
            return Err(Error::invalid(format!(
                "{}x{} mesh is not one refinement of {}x{}",
                fine.mesh.nx(),
                fine.mesh.ny(),
                self.mesh.nx(),
                self.mesh.ny()
            )));
        }
        match self.family {
            Family::P0 => {
                let trip: Vec<_> =
                    (0..fine.dof_count()).map(|c| (c, fine.mesh.parent(c), T::one())).collect();
                SparseMatrix::from_triplets(fine.dof_count(), self.dof_count(), &trip)
            }
            Family::Q2 { components } => {
                let px = prolong_1d::<T>(self.mesh.nx(), self.mesh.periodic_x());
                let py = prolong_1d::<T>(self.mesh.ny(), false);
                let (ccols, fcols) = (self.node_cols(), fine.node_cols());
                let mut trip = Vec::new();
                for (fy, wy) in py.iter().enumerate() {
                    for (fx, wx) in px.iter().enumerate() {
                        let fnode = fy * fcols + fx;
                        for &(cy, vy) in wy {
                            for &(cx, vx) in wx {
                                let cnode = cy * ccols + cx;
                                for c in 0..components {
                                    trip.push((fnode * components + c, cnode * components + c, vx * vy));
                                }
                            }
                        }
                    }
                }
                SparseMatrix::from_triplets(fine.dof_count(), self.dof_count(), &trip)
            }
        }
    }

    /// Coefficients on `fine` of the function given by `coeffs` on this space.
    pub fn interpolate<T: Real>(&self, coeffs: &[T], fine: &FeSpace) -> Result<Vec<T>> {
        if coeffs.len() != self.dof_count() {
            return Err(Error::invalid("coefficient vector does not match the coarse space"));
        }
        Ok(self.prolongation::<T>(fine)?.mul_vec(coeffs))
    }
}

/// For each fine 1D node, the coarse nodes and weights that reproduce it.
fn prolong_1d<T: Real>(n: usize, periodic: bool) -> Vec<Vec<(usize, T)>> {
    let coarse_nodes = if periodic { 2 * n } else { 2 * n + 1 };
    let fine_nodes = if periodic { 4 * n } else { 4 * n + 1 };
    (0..fine_nodes)
        .map(|k| {
            let c = (k / 4).min(n - 1);
            let t = T::from_count(k - 4 * c) / T::lit(4.0);
            let w = lagrange_1d(t).0;
            (0..3)
                .filter(|&m| w[m] != T::zero())
                .map(|m| ((2 * c + m) % coarse_nodes, w[m]))
                .collect()
        })
        .collect()
}

/// 1D quadratic Lagrange basis on `[0,1]` with nodes `0, 1/2, 1`, and derivatives.
#[inline]
pub fn lagrange_1d<T: Real>(t: T) -> ([T; 3], [T; 3]) {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    (
        [(two * t - one) * (t - one), four * t * (one - t), t * (two * t - one)],
        [four * t - three, four - T::lit(8.0) * t, four * t - one],
    )
}

/// Reference Q2 basis values and `xi`/`eta` derivatives at a point.
pub fn q2_basis<T: Real>(xi: T, eta: T) -> ([T; 9], [T; 9], [T; 9]) {
    let (lx, dlx) = lagrange_1d(xi);
    let (ly, dly) = lagrange_1d(eta);
    let mut v = [T::zero(); 9];
    let mut dx = [T::zero(); 9];
    let mut dy = [T::zero(); 9];
    for b in 0..3 {
        for a in 0..3 {
            let l = 3 * b + a;
            v[l] = lx[a] * ly[b];
            dx[l] = dlx[a] * ly[b];
            dy[l] = lx[a] * dly[b];
        }
    }
    (v, dx, dy)
}

/// Physical Q2 basis tables at the quadrature points of one cell.
///
/// Every cell of a structured mesh is a translate of the others, so a single
/// table serves the whole mesh.
#[derive(Debug, Clone)]
pub struct CellTables<T> {
    pub values: Vec<[T; 9]>,
    pub grad_x: Vec<[T; 9]>,
    pub grad_y: Vec<[T; 9]>,
    /// Quadrature weight times cell area.
    pub jxw: Vec<T>,
    pub ref_points: Vec<[T; 2]>,
}

impl<T: Real> CellTables<T> {
    pub fn new(mesh: &Mesh, rule: &QuadratureRule<T>) -> Self {
        let (hx, hy) = mesh.spacing::<T>();
        let mut t = Self {
            values: Vec::with_capacity(rule.len()),
            grad_x: Vec::with_capacity(rule.len()),
            grad_y: Vec::with_capacity(rule.len()),
            jxw: Vec::with_capacity(rule.len()),
            ref_points: rule.points().to_vec(),
        };
        for (p, &w) in rule.points().iter().zip(rule.weights()) {
            let (v, dx, dy) = q2_basis(p[0], p[1]);
            t.values.push(v);
            t.grad_x.push(dx.map(|d| d / hx));
            t.grad_y.push(dy.map(|d| d / hy));
            t.jxw.push(w * hx * hy);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.jxw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jxw.is_empty()
    }
}
