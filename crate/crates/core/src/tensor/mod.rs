//! Parameters, reverse-mode differentiation and the Adam optimizer.

pub mod gradcheck;
pub mod kernels;
pub mod store;
pub mod tape;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use kernels::GruDims;
pub use store::{
    AdamConfig, Checkpoint, Gradients, Param, ParamId, ParamStore, CHECKPOINT_FORMAT_VERSION,
};
pub use tape::{log_softmax, softmax, GruParams, LinearParams, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("{0}")]
    Usage(String),
    #[error("non-finite gradient in parameter {0}; update rejected")]
    NonFiniteGradient(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
