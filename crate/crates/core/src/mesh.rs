//! Structured quadrilateral meshes of the unit square.
//!
//! Cells are numbered lexicographically with `x` running fastest. With
//! `periodic_x` the right edge `x = 1` is identified with the left edge.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cell count per direction on the coarsest grid of a benchmark hierarchy.
pub const COARSE_CELLS: usize = 8;

/// Axis-aligned structured mesh on `[0,1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    level: usize,
    periodic_x: bool,
}

impl Mesh {
    /// Builds an `nx` by `ny` mesh at refinement level 0.
    pub fn new(nx: usize, ny: usize, periodic_x: bool) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!("mesh needs at least one cell per direction, got {nx}x{ny}")));
        }
        Ok(Self { nx, ny, level: 0, periodic_x })
    }

    /// Mesh of the benchmark hierarchy at `level`: `(8 * 2^level)^2` cells, periodic in `x`.
    pub fn hierarchy_level(level: usize) -> Self {
        let n = COARSE_CELLS << level;
        Self { nx: n, ny: n, level, periodic_x: true }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn periodic_x(&self) -> bool {
        self.periodic_x
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell side lengths `(hx, hy)`.
    pub fn spacing<T: Real>(&self) -> (T, T) {
        (T::one() / T::from_count(self.nx), T::one() / T::from_count(self.ny))
    }

    /// Index of cell `(i, j)`.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Column and row of a cell.
    #[inline]
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin<T: Real>(&self, cell: usize) -> (T, T) {
        let (i, j) = self.cell_ij(cell);
        (
            T::from_count(i) / T::from_count(self.nx),
            T::from_count(j) / T::from_count(self.ny),
        )
    }

    /// Distinct vertices; the `x = 1` column is dropped when periodic.
    pub fn vertex_count(&self) -> usize {
        self.vertex_columns() * (self.ny + 1)
    }

    fn vertex_columns(&self) -> usize {
        if self.periodic_x {
            self.nx
        } else {
            self.nx + 1
        }
    }

    /// Coordinates of vertex `v`.
    pub fn vertex<T: Real>(&self, v: usize) -> (T, T) {
        let cols = self.vertex_columns();
        let (i, j) = (v % cols, v / cols);
        (
            T::from_count(i) / T::from_count(self.nx),
            T::from_count(j) / T::from_count(self.ny),
        )
    }

    /// Uniform refinement: every cell is split into four children.
    pub fn refine(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            level: self.level + 1,
            periodic_x: self.periodic_x,
        }
    }

    /// Whether `fine` is exactly one uniform refinement of `self`.
    pub fn is_parent_of(&self, fine: &Mesh) -> bool {
        fine.nx == 2 * self.nx && fine.ny == 2 * self.ny && fine.periodic_x == self.periodic_x
    }

    /// Parent (on the mesh one level coarser) of a cell of this mesh.
    pub fn parent(&self, cell: usize) -> usize {
        let (i, j) = self.cell_ij(cell);
        (j / 2) * (self.nx / 2) + i / 2
    }

    /// The four children of `cell` on the refined mesh, in lexicographic order.
    pub fn children(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        let fnx = 2 * self.nx;
        let base = 2 * j * fnx + 2 * i;
        [base, base + 1, base + fnx, base + fnx + 1]
    }
}
