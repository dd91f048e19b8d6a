//! Compress → aggregate → classify.
//!
//! The tape-level functions (`*_on_tape`) are the single implementation used
//! for both training and inference; the plain-tensor wrappers at the bottom
//! run them on a throwaway tape.

use crate::autodiff::{Tape, Var};
use crate::error::{MilError, Result};
use crate::model::config::{Aggregator, ModelConfig};
use crate::model::params::{BoundHead, BoundParams, ModelParams};
use crate::tensor::Tensor;

/// Handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub embeddings: Var,
    pub bag_embedding: Var,
    /// One `N x 1` weight column per head; empty for pooling models.
    pub attention: Vec<Var>,
    pub logits: Var,
}

/// `relu(X Wᵀ + b)`.
pub fn compress_on_tape(tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Var> {
    let (w, b) = params.compression;
    let z = tape.matmul_nt(x, w)?;
    let z = tape.add_row(z, b)?;
    Ok(tape.relu(z))
}

/// Gated attention weights over the rows of `h` (`N x d`), returned as `N x 1`.
pub fn gated_attention_on_tape(tape: &mut Tape, head: &BoundHead, h: Var) -> Result<Var> {
    if tape.value(h).rows() == 0 {
        return Err(MilError::EmptyBag("gated_attention"));
    }
    let tv = tape.matmul_nt(h, head.v)?;
    let tv = tape.add_row(tv, head.b_v)?;
    let tv = tape.tanh(tv);
    let su = tape.matmul_nt(h, head.u)?;
    let su = tape.add_row(su, head.b_u)?;
    let su = tape.sigmoid(su);
    let gated = tape.mul(tv, su)?;
    let scores = tape.matmul(gated, head.w)?;
    let scores = tape.add_row(scores, head.b_w)?;
    tape.softmax_instances(scores)
}

/// Zero-pads `h` to `M * ceil(D / M)` columns and cuts it into `M` equal blocks.
pub fn split_heads_on_tape(tape: &mut Tape, h: Var, heads: usize) -> Result<Vec<Var>> {
    if heads == 0 {
        return Err(MilError::InvalidModel("split_heads needs at least one head".into()));
    }
    let d = tape.value(h).cols();
    let width = d.div_ceil(heads);
    let padded = if width * heads > d {
        tape.pad_columns(h, width * heads)?
    } else {
        h
    };
    if heads == 1 {
        return Ok(vec![padded]);
    }
    (0..heads)
        .map(|m| tape.slice_columns(padded, m * width, width))
        .collect()
}

/// Bag embedding plus the per-head attention columns (if any).
pub fn aggregate_on_tape(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &BoundParams,
    h: Var,
) -> Result<(Var, Vec<Var>)> {
    if tape.value(h).rows() == 0 {
        return Err(MilError::EmptyBag("aggregate"));
    }
    match config.aggregator {
        Aggregator::MeanPool => Ok((tape.mean_rows(h)?, Vec::new())),
        Aggregator::MaxPool => Ok((tape.max_rows(h)?, Vec::new())),
        Aggregator::Abmil | Aggregator::Madmil => {
            let blocks = split_heads_on_tape(tape, h, config.head_count())?;
            if blocks.len() != params.heads.len() {
                return Err(MilError::InvalidModel(format!(
                    "{} head blocks but {} attention heads",
                    blocks.len(),
                    params.heads.len()
                )));
            }
            let mut pooled = Vec::with_capacity(blocks.len());
            let mut weights = Vec::with_capacity(blocks.len());
            for (block, head) in blocks.into_iter().zip(&params.heads) {
                let a = gated_attention_on_tape(tape, head, block)?;
                let at = tape.transpose(a);
                pooled.push(tape.matmul(at, block)?);
                weights.push(a);
            }
            let z = if pooled.len() == 1 {
                pooled[0]
            } else {
                tape.concat_columns(&pooled)?
            };
            let d = config.embed_dim;
            let z = if tape.value(z).cols() > d {
                tape.slice_columns(z, 0, d)?
            } else {
                z
            };
            Ok((z, weights))
        }
    }
}

pub fn forward_on_tape(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &BoundParams,
    x: Var,
) -> Result<ForwardPass> {
    let xv = tape.value(x);
    if xv.rows() == 0 {
        return Err(MilError::EmptyBag("forward"));
    }
    if xv.cols() != config.input_dim {
        return Err(MilError::Shape {
            op: "forward",
            left: xv.shape(),
            right: (xv.rows(), config.input_dim),
        });
    }
    let h = compress_on_tape(tape, params, x)?;
    let (z, attention) = aggregate_on_tape(tape, config, params, h)?;
    let (w, b) = params.classifier;
    let logits = tape.matmul_nt(z, w)?;
    let logits = tape.add_row(logits, b)?;
    Ok(ForwardPass {
        embeddings: h,
        bag_embedding: z,
        attention,
        logits,
    })
}

/// Loss and parameter gradients (in [`ModelParams::tensors`] order) for one bag.
pub struct BagGradient {
    pub loss: f64,
    pub logits: Tensor,
    pub gradients: Vec<Tensor>,
}

pub fn loss_and_gradients(
    config: &ModelConfig,
    params: &ModelParams,
    x: &Tensor,
    label: usize,
) -> Result<BagGradient> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let xv = tape.constant_ref(x);
    let pass = forward_on_tape(&mut tape, config, &bound, xv)?;
    let loss = tape.cross_entropy(pass.logits, label)?;
    let grads = tape.backward(loss)?;
    let gradients = bound.vars().into_iter().map(|v| grads.wrt(&tape, v)).collect();
    Ok(BagGradient {
        loss: tape.value(loss).item(),
        logits: tape.value(pass.logits).clone(),
        gradients,
    })
}

/// Output of an inference-only forward pass.
#[derive(Clone, Debug)]
pub struct Inference {
    pub logits: Tensor,
    pub attention: Vec<Tensor>,
}

pub fn infer(config: &ModelConfig, params: &ModelParams, x: &Tensor) -> Result<Inference> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let xv = tape.constant_ref(x);
    let pass = forward_on_tape(&mut tape, config, &bound, xv)?;
    Ok(Inference {
        logits: tape.value(pass.logits).clone(),
        attention: pass.attention.iter().map(|&a| tape.value(a).clone()).collect(),
    })
}

pub fn forward(config: &ModelConfig, params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    Ok(infer(config, params, x)?.logits)
}

pub fn compress(params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let xv = tape.constant_ref(x);
    let h = compress_on_tape(&mut tape, &bound, xv)?;
    Ok(tape.value(h).clone())
}

pub fn gated_attention(head: &crate::model::params::GatedAttentionHead, h: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = BoundHead {
        v: tape.constant_ref(&head.v),
        u: tape.constant_ref(&head.u),
        w: tape.constant_ref(&head.w),
        b_v: tape.constant_ref(&head.b_v),
        b_u: tape.constant_ref(&head.b_u),
        b_w: tape.constant_ref(&head.b_w),
    };
    let hv = tape.constant_ref(h);
    let a = gated_attention_on_tape(&mut tape, &bound, hv)?;
    Ok(tape.value(a).clone())
}

pub fn split_heads(h: &Tensor, heads: usize) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new();
    let hv = tape.constant_ref(h);
    let parts = split_heads_on_tape(&mut tape, hv, heads)?;
    Ok(parts.into_iter().map(|p| tape.value(p).clone()).collect())
}

/// Bag embedding `Z` computed from already-compressed instances `h`.
pub fn aggregate(config: &ModelConfig, params: &ModelParams, h: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let hv = tape.constant_ref(h);
    let (z, _) = aggregate_on_tape(&mut tape, config, &bound, hv)?;
    Ok(tape.value(z).clone())
}
