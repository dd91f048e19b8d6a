use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::model::config::ModelConfig;
use crate::tensor::Tensor;

/// Affine map with weight stored `out x in` and a `1 x out` bias row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Tensor::zeros(outputs, inputs),
            bias: Tensor::zeros(1, outputs),
        }
    }
}

/// One gated attention head: scores `wᵀ(tanh(V h + b_V) ⊙ sigm(U h + b_U)) + b_w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatedAttentionHead {
    /// `a x d`
    pub v: Tensor,
    /// `a x d`
    pub u: Tensor,
    /// `a x 1`
    pub w: Tensor,
    /// `1 x a`
    pub b_v: Tensor,
    /// `1 x a`
    pub b_u: Tensor,
    /// `1 x 1`
    pub b_w: Tensor,
}

impl GatedAttentionHead {
    pub fn zeros(width: usize, hidden: usize) -> Self {
        GatedAttentionHead {
            v: Tensor::zeros(hidden, width),
            u: Tensor::zeros(hidden, width),
            w: Tensor::zeros(hidden, 1),
            b_v: Tensor::zeros(1, hidden),
            b_u: Tensor::zeros(1, hidden),
            b_w: Tensor::zeros(1, 1),
        }
    }

    pub fn width(&self) -> usize {
        self.v.cols()
    }

    pub fn hidden(&self) -> usize {
        self.v.rows()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub compression: Linear,
    /// Empty for the pooling baselines.
    pub heads: Vec<GatedAttentionHead>,
    pub classifier: Linear,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let heads = (0..config.head_count())
            .map(|_| GatedAttentionHead::zeros(config.head_width(), config.head_hidden()))
            .collect();
        Ok(ModelParams {
            compression: Linear::zeros(config.input_dim, config.embed_dim),
            heads,
            classifier: Linear::zeros(config.output_width(), config.classes),
        })
    }

    /// Xavier-uniform weights, zero biases, deterministic per seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut params = ModelParams::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        xavier_fill(&mut params.compression.weight, &mut rng);
        for head in &mut params.heads {
            xavier_fill(&mut head.v, &mut rng);
            xavier_fill(&mut head.u, &mut rng);
            xavier_fill(&mut head.w, &mut rng);
        }
        xavier_fill(&mut params.classifier.weight, &mut rng);
        Ok(params)
    }

    /// All parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.compression.weight, &self.compression.bias];
        for h in &self.heads {
            out.extend([&h.v, &h.u, &h.w, &h.b_v, &h.b_u, &h.b_w]);
        }
        out.extend([&self.classifier.weight, &self.classifier.bias]);
        out
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.compression.weight, &mut self.compression.bias];
        for h in &mut self.heads {
            out.extend([&mut h.v, &mut h.u, &mut h.w, &mut h.b_v, &mut h.b_u, &mut h.b_w]);
        }
        out.extend([&mut self.classifier.weight, &mut self.classifier.bias]);
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Registers every tensor as a differentiable leaf on `tape`.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> BoundParams {
        let mut leaf = |t: &'a Tensor| tape.leaf_ref(t);
        let compression = (leaf(&self.compression.weight), leaf(&self.compression.bias));
        let heads = self
            .heads
            .iter()
            .map(|h| BoundHead {
                v: leaf(&h.v),
                u: leaf(&h.u),
                w: leaf(&h.w),
                b_v: leaf(&h.b_v),
                b_u: leaf(&h.b_u),
                b_w: leaf(&h.b_w),
            })
            .collect();
        let classifier = (leaf(&self.classifier.weight), leaf(&self.classifier.bias));
        BoundParams {
            compression,
            heads,
            classifier,
        }
    }
}

/// Tape handles of a [`GatedAttentionHead`].
#[derive(Clone, Debug)]
pub struct BoundHead {
    pub v: Var,
    pub u: Var,
    pub w: Var,
    pub b_v: Var,
    pub b_u: Var,
    pub b_w: Var,
}

/// Tape handles of a [`ModelParams`].
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub compression: (Var, Var),
    pub heads: Vec<BoundHead>,
    pub classifier: (Var, Var),
}

impl BoundParams {
    /// Vars in [`ModelParams::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.compression.0, self.compression.1];
        for h in &self.heads {
            out.extend([h.v, h.u, h.w, h.b_v, h.b_u, h.b_w]);
        }
        out.extend([self.classifier.0, self.classifier.1]);
        out
    }
}

fn xavier_fill(t: &mut Tensor, rng: &mut ChaCha8Rng) {
    let (fan_out, fan_in) = t.shape();
    let limit = xavier_limit(fan_in, fan_out);
    for v in t.data_mut() {
        *v = rng.gen_range(-limit..limit);
    }
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
