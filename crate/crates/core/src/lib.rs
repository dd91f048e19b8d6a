//! Multiple instance learning with gated-attention pooling.
//!
//! Implements single-head gated attention (ABMIL), its multi-head split
//! variant (MAD-MIL), and embedding-level mean/max pooling baselines on top
//! of a small reverse-mode autodiff core, together with soft-bag MNIST
//! generation, Adam training with validation-loss model selection, ROC AUC
//! and F1 evaluation, and exact parameter/FLOP accounting.

pub mod autodiff;
pub mod bags;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{MilError, Result};
pub use tensor::Tensor;
