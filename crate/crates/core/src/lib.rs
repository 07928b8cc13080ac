//! Hybrid high-order discretizations on 2d polytopal meshes.
//!
//! The crate is organized bottom-up: plane geometry and polynomial calculus
//! (`geometry`, `quad`, `basis`, `poly`), polytopal meshes with simplicial
//! submeshes (`mesh`), the local hybrid operator kit (`dof`, `local`,
//! `norms`), sparse solves and static condensation (`linsolve`, `assembly`),
//! and the model problems on top (`poisson`, `estimator`, `plaplace`, `adr`).
//! `report`, `vtu` and `config` back the `hho` command line tool.

pub mod adr;
pub mod assembly;
pub mod basis;
pub mod dof;
pub mod estimator;
pub mod field;
pub mod geometry;
pub mod linsolve;
pub mod local;
pub mod mesh;
pub mod norms;
pub mod plaplace;
pub mod poisson;
pub mod poly;
pub mod quad;

pub use geometry::{Point2, Vector2};

/// Crate-wide error type; variants carry the failing entity where one exists.
#[derive(thiserror::Error, Debug)]
pub enum HhoError {
    #[error("mesh: {0}")]
    Mesh(#[from] mesh::MeshError),
    #[error("polynomial calculus: {0}")]
    Poly(#[from] poly::PolyError),
    #[error("linear solve: {0}")]
    Solve(#[from] linsolve::SolveError),
    #[error("config: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("iteration failed: {0}")]
    Nonconvergence(String),
}

pub type Result<T> = std::result::Result<T, HhoError>;
