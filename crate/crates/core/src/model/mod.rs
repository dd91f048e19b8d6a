//! The four bag aggregators and their accounting.

pub mod accounting;
pub mod config;
pub mod forward;
pub mod params;

pub use accounting::{flops, format_millions, format_thousands, param_count, reference_figure};
pub use config::{Aggregator, ModelConfig, DEFAULT_ABMIL_HIDDEN};
pub use forward::{
    aggregate, compress, forward, gated_attention, infer, loss_and_gradients, split_heads,
    BagGradient, ForwardPass, Inference,
};
pub use params::{GatedAttentionHead, Linear, ModelParams};
