//! Closed-form trainable-parameter and FLOP counts.
//!
//! FLOPs are multiply-accumulates of the linear maps for one bag of `N`
//! instances; bias additions and nonlinearities are not counted.

use crate::model::config::{Aggregator, ModelConfig};

pub fn param_count(config: &ModelConfig) -> u64 {
    let input = config.input_dim as u64;
    let d = config.embed_dim as u64;
    let classes = config.classes as u64;
    let compression = input * d + d;
    let width = config.head_width() as u64;
    let hidden = config.head_hidden() as u64;
    let per_head = 2 * (width * hidden + hidden) + hidden + 1;
    let attention = config.head_count() as u64 * per_head;
    let out = config.output_width() as u64;
    compression + attention + out * classes + classes
}

pub fn flops(config: &ModelConfig, instances: usize) -> u64 {
    let n = instances as u64;
    let compression = n * config.input_dim as u64 * config.embed_dim as u64;
    let width = config.head_width() as u64;
    let hidden = config.head_hidden() as u64;
    let attention = n * config.head_count() as u64 * (2 * width * hidden + hidden);
    let classifier = config.output_width() as u64 * config.classes as u64;
    compression + attention + classifier
}

/// `"788.7 K"`: thousands to one decimal.
pub fn format_thousands(value: u64) -> String {
    format!("{:.1} K", value as f64 / 1e3)
}

/// `"94.4 M"`: millions to one decimal.
pub fn format_millions(value: u64) -> String {
    format!("{:.1} M", value as f64 / 1e6)
}

/// A published model-size/FLOP figure for a known configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceFigure {
    pub size_k: f64,
    pub flops_m: f64,
}

/// Published figures for the benchmark configurations (FLOPs at N = 120).
pub fn reference_figure(config: &ModelConfig) -> Option<ReferenceFigure> {
    use Aggregator::*;
    let key = (
        config.input_dim,
        config.embed_dim,
        config.classes,
        config.aggregator,
        if config.aggregator == Madmil { config.heads } else { 1 },
    );
    if config.attention_hidden.is_some() {
        return None;
    }
    let (size_k, flops_m) = match key {
        (784, 128, 2, Abmil, 1) => (167.1, 19.9),
        (784, 128, 2, Madmil, 4) => (105.1, 12.5),
        (784, 128, 2, Madmil, 6) => (107.1, 12.7),
        (784, 128, 2, Madmil, 7) => (107.2, 12.8),
        (784, 128, 2, MeanPool | MaxPool, 1) => (100.8, 12.0),
        (1024, 512, 2, Abmil, 1) => (788.7, 94.4),
        (1024, 512, 2, Madmil, 2) => (657.6, 78.6),
        (1024, 512, 2, Madmil, 3) => (614.8, 73.5),
        (1024, 512, 2, Madmil, 8) => (559.3, 66.8),
        (1024, 512, 2, MeanPool | MaxPool, 1) => (525.8, 62.9),
        (1024, 512, 3, Abmil, 1) => (788.7, 94.4),
        (1024, 512, 3, Madmil, 5) => (582.7, 69.6),
        (1024, 512, 3, MeanPool | MaxPool, 1) => (525.8, 62.91),
        _ => return None,
    };
    Some(ReferenceFigure { size_k, flops_m })
}
