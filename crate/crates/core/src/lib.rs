//! Finite-element minimization of the Frank-Oseen energy for nematic
//! liquid crystal director fields under a pointwise unit-length constraint.
//!
//! The numerical core is generic over the scalar type ([`scalar::Real`]);
//! the aliases at the crate root fix `f64`, which is what the benchmarks use.

pub mod assembly;
pub mod bench;
pub mod energy;
pub mod error;
pub mod fe;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod quadrature;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use fe::{FeSpace, Family};
pub use mesh::Mesh;

pub type SparseMatrix = sparse::SparseMatrix<f64>;
pub type QuadratureRule = quadrature::QuadratureRule<f64>;
pub type FrankConstants = energy::FrankConstants<f64>;
pub type ElectricConstants = energy::ElectricConstants<f64>;
pub type PenaltyConfig = energy::PenaltyConfig<f64>;
