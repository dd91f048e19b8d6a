use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MilError, Result};

/// Attention hidden width used by single-head ABMIL unless overridden.
pub const DEFAULT_ABMIL_HIDDEN: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Abmil,
    Madmil,
    MeanPool,
    MaxPool,
}

impl Aggregator {
    pub fn is_attention(self) -> bool {
        matches!(self, Aggregator::Abmil | Aggregator::Madmil)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Abmil => "abmil",
            Aggregator::Madmil => "madmil",
            Aggregator::MeanPool => "mean_pool",
            Aggregator::MaxPool => "max_pool",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = MilError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "abmil" => Ok(Aggregator::Abmil),
            "madmil" | "mad_mil" => Ok(Aggregator::Madmil),
            "mean_pool" | "mean" => Ok(Aggregator::MeanPool),
            "max_pool" | "max" => Ok(Aggregator::MaxPool),
            other => Err(MilError::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// Architecture description from which parameters, counts and FLOPs derive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Width `D` of the compressed instance embedding.
    pub embed_dim: usize,
    /// Number of attention heads `M`; 1 for ABMIL, ignored by the pooling baselines.
    pub heads: usize,
    pub classes: usize,
    pub aggregator: Aggregator,
    /// Per-head attention hidden width. `None` selects the default rule:
    /// 256 for ABMIL and `ceil(d_m / 2)` for MAD-MIL.
    pub attention_hidden: Option<usize>,
}

impl ModelConfig {
    pub fn abmil(input_dim: usize, embed_dim: usize, classes: usize) -> Self {
        ModelConfig {
            input_dim,
            embed_dim,
            heads: 1,
            classes,
            aggregator: Aggregator::Abmil,
            attention_hidden: None,
        }
    }

    pub fn madmil(input_dim: usize, embed_dim: usize, heads: usize, classes: usize) -> Self {
        ModelConfig {
            input_dim,
            embed_dim,
            heads,
            classes,
            aggregator: Aggregator::Madmil,
            attention_hidden: None,
        }
    }

    pub fn mean_pool(input_dim: usize, embed_dim: usize, classes: usize) -> Self {
        ModelConfig {
            input_dim,
            embed_dim,
            heads: 1,
            classes,
            aggregator: Aggregator::MeanPool,
            attention_hidden: None,
        }
    }

    pub fn max_pool(input_dim: usize, embed_dim: usize, classes: usize) -> Self {
        ModelConfig {
            aggregator: Aggregator::MaxPool,
            ..ModelConfig::mean_pool(input_dim, embed_dim, classes)
        }
    }

    /// Same dimensions with a different aggregator (heads reset to 1 unless MAD-MIL).
    pub fn with_aggregator(self, aggregator: Aggregator, heads: usize) -> Self {
        ModelConfig {
            aggregator,
            heads: if aggregator == Aggregator::Madmil { heads } else { 1 },
            attention_hidden: None,
            ..self
        }
    }

    pub fn with_attention_hidden(self, hidden: usize) -> Self {
        ModelConfig {
            attention_hidden: Some(hidden),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MilError::InvalidModel(msg));
        if self.input_dim == 0 || self.embed_dim == 0 {
            return bad(format!(
                "input_dim and embed_dim must be positive (got {} and {})",
                self.input_dim, self.embed_dim
            ));
        }
        if self.heads == 0 {
            return bad("heads must be at least 1".into());
        }
        if self.classes < 2 {
            return bad(format!("classes must be at least 2 (got {})", self.classes));
        }
        if self.aggregator == Aggregator::Abmil && self.heads != 1 {
            return bad(format!("abmil is single-head (got heads = {})", self.heads));
        }
        if self.attention_hidden == Some(0) {
            return bad("attention_hidden must be positive".into());
        }
        Ok(())
    }

    /// Number of attention heads actually instantiated (0 for pooling).
    pub fn head_count(&self) -> usize {
        match self.aggregator {
            Aggregator::Abmil => 1,
            Aggregator::Madmil => self.heads,
            Aggregator::MeanPool | Aggregator::MaxPool => 0,
        }
    }

    /// Per-head slice width `d_m = ceil(D / M)`.
    pub fn head_width(&self) -> usize {
        match self.aggregator {
            Aggregator::Madmil => self.embed_dim.div_ceil(self.heads),
            _ => self.embed_dim,
        }
    }

    /// Per-head attention hidden width.
    pub fn head_hidden(&self) -> usize {
        if let Some(hidden) = self.attention_hidden {
            return hidden;
        }
        match self.aggregator {
            Aggregator::Madmil => self.head_width().div_ceil(2),
            _ => DEFAULT_ABMIL_HIDDEN,
        }
    }

    /// Width of the head-padded embedding, `M * d_m` (or `D` for pooling).
    pub fn padded_width(&self) -> usize {
        match self.aggregator {
            Aggregator::Abmil | Aggregator::Madmil => self.head_count() * self.head_width(),
            Aggregator::MeanPool | Aggregator::MaxPool => self.embed_dim,
        }
    }

    /// Width of the bag embedding fed to the classifier.
    ///
    /// Always `D`: the zero padding added for the head split pools to zero
    /// and is dropped after concatenation.
    pub fn output_width(&self) -> usize {
        self.embed_dim
    }

    /// Short display label, e.g. `MAD-MIL/6`.
    pub fn label(&self) -> String {
        match self.aggregator {
            Aggregator::Abmil => "ABMIL".to_string(),
            Aggregator::Madmil => format!("MAD-MIL/{}", self.heads),
            Aggregator::MeanPool => "Mean-Pool".to_string(),
            Aggregator::MaxPool => "Max-Pool".to_string(),
        }
    }
}
