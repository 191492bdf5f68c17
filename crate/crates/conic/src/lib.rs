//! Conic optimization layer: a dense primal-dual interior-point solver for
//! products of zero, nonnegative, second-order and real PSD cones, plus a
//! front end for complex Hermitian semidefinite programs.

mod cone;
pub mod hermitian;
pub mod program;
pub mod solver;

pub use cone::Cone;
pub use hermitian::{hermitian_embed, hermitian_from_embedded, ComplexSdp, ComplexSdpSolution, Sense, C64};
pub use program::{AffineExpr, ConicProgram, ProgramBuilder, VariableLayout};
pub use solver::{solve, ConicSolution, Residuals, SolverSettings, Status};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    /// Malformed program: dimensions, indices or non-finite data.
    #[error("malformed program: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}
