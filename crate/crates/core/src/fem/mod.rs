//! Taylor–Hood finite elements: quadrature, bases, dof maps, assembly,
//! Dirichlet elimination and direct solves.

pub mod assembly;
pub mod element;
pub mod norms;
pub mod quadrature;
pub mod space;
pub mod system;

pub use assembly::{
    assemble_rhs, assemble_transformed_oseen, elasticity_matrix, oseen_matrix, stokes_matrix,
    FluidSpaces,
};
pub use norms::NormMatrix;
pub use space::{boundary_dofs, Arity, FeFunction, FeSpace, Order, SpaceDescriptor};
pub use system::{solve_sparse, Constraints, ConstrainedSystem, Elimination, FactoredSystem, SaddleSystem};
