//! Constructive and destructive RIS beamforming for a multi-user MIMO
//! ISAC network.
//!
//! * [`model`]: system description, channel / RCS / failure-mask models.
//! * [`quadratics`]: Hermitian forms behind the sensing SNR and the SINRs.
//! * [`maxsnr`]: alternating optimization that maximizes the sensing SNR.
//! * [`minsnr`]: penalized convex-concave procedure run by a malicious
//!   surface to minimize the sensing SNR while keeping every SINR floor.
//! * [`harness`]: Monte-Carlo experiments, presets, export and the CLI.

pub mod harness;
pub mod linalg;
pub mod maxsnr;
pub mod minsnr;
pub mod model;
pub mod quadratics;

pub use conic;
pub use conic::C64;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("index {index} out of range 0..{len}")]
    Index { index: usize, len: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
