//! patchlens: first-layer filter banks through the lens of image patch
//! statistics.
//!
//! The crate has two halves. The analysis half extracts image patches,
//! fits a PCA basis on them, and summarizes any filter bank by its
//! *energy profile*: how strongly the bank responds along each principal
//! direction of the patch distribution. The dynamics half simulates
//! full-batch gradient descent for a single-hidden-layer linear CNN
//! (which reduces to regression on per-image average patches) and
//! evaluates the matching closed-form solutions, so the two can be
//! checked against each other to tight tolerances.
//!
//! All randomized operations take explicit seeds and are reproducible.
//! With the `parallel` feature (default) the data-parallel kernels run
//! on rayon; `*_seq` variants are always available and bit-identical.

pub mod analytic;
pub mod data_io;
pub mod dynamics;
pub mod eigen;
pub mod matrix;
pub mod patch;
pub mod profile;

pub use matrix::Mat;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("class {class} is empty")]
    EmptyClass { class: usize },

    #[error("invalid argument: {msg}")]
    InvalidArg { msg: String },

    #[error("singular matrix in {context}: {detail}")]
    Singular { context: String, detail: String },

    #[error("non-finite values in {context}")]
    NonFinite { context: String },

    #[error("zero variance profile")]
    ZeroVariance,

    #[error("non-finite value at iteration {iter}")]
    Diverged { iter: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArg { msg: msg.into() }
    }
}
