//! Helpers shared by the integration tests: seeded random data and a
//! straight-line reference forward pass written with plain loops.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use madmil::bags::idx::{encode_idx, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use madmil::bags::Bag;
use madmil::model::{Aggregator, ModelConfig, ModelParams};
use madmil::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1]`.
pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap()
}

pub fn bag(rng: &mut ChaCha8Rng, id: &str, rows: usize, cols: usize, label: usize) -> Bag {
    Bag {
        bag_id: id.to_string(),
        features: uniform(rng, rows, cols),
        label,
        instance_ids: (0..rows).map(|r| format!("{id}:{r}")).collect(),
    }
}

/// Xavier weights plus random nonzero biases, so every term contributes.
pub fn params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(cfg, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let mut fill = |t: &mut Tensor| {
        for v in t.data_mut() {
            *v = r.gen_range(-0.5..=0.5);
        }
    };
    fill(&mut p.compression.bias);
    for h in &mut p.heads {
        fill(&mut h.b_v);
        fill(&mut h.b_u);
        fill(&mut h.b_w);
    }
    fill(&mut p.classifier.bias);
    p
}

pub fn row_permuted(x: &Tensor, order: &[usize]) -> Tensor {
    x.select_rows(order)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reference evaluation: returns `(logits, attention per head)`.
pub fn reference_forward(cfg: &ModelConfig, p: &ModelParams, x: &Tensor) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.rows();
    let d = cfg.embed_dim;
    let wc = &p.compression.weight;
    let mut h = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in 0..d {
            let mut s = p.compression.bias.get(0, j);
            for k in 0..cfg.input_dim {
                s += x.get(i, k) * wc.get(j, k);
            }
            h[i][j] = if s > 0.0 { s } else { 0.0 };
        }
    }

    let mut attention = Vec::new();
    let z: Vec<f64> = match cfg.aggregator {
        Aggregator::MeanPool => (0..d).map(|j| h.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect(),
        Aggregator::MaxPool => (0..d).map(|j| h.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect(),
        Aggregator::Abmil | Aggregator::Madmil => {
            let m = cfg.head_count();
            let width = d.div_ceil(m);
            let padded = |i: usize, j: usize| if j < d { h[i][j] } else { 0.0 };
            let mut z = Vec::new();
            for (head_index, head) in p.heads.iter().enumerate() {
                let a_dim = head.v.rows();
                let mut scores = vec![0.0; n];
                for (i, score) in scores.iter_mut().enumerate() {
                    let mut s = head.b_w.get(0, 0);
                    for k in 0..a_dim {
                        let mut tv = head.b_v.get(0, k);
                        let mut su = head.b_u.get(0, k);
                        for c in 0..width {
                            let f = padded(i, head_index * width + c);
                            tv += head.v.get(k, c) * f;
                            su += head.u.get(k, c) * f;
                        }
                        s += head.w.get(k, 0) * tv.tanh() * sigmoid(su);
                    }
                    *score = s;
                }
                let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
                let total: f64 = exps.iter().sum();
                let a: Vec<f64> = exps.iter().map(|e| e / total).collect();
                for c in 0..width {
                    z.push((0..n).map(|i| a[i] * padded(i, head_index * width + c)).sum());
                }
                attention.push(a);
            }
            z.truncate(d);
            z
        }
    };

    let logits = (0..cfg.classes)
        .map(|c| p.classifier.bias.get(0, c) + (0..d).map(|j| p.classifier.weight.get(c, j) * z[j]).sum::<f64>())
        .collect();
    (logits, attention)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The seven architectures exercised by the gradient oracle.
pub fn small_models(input_dim: usize, embed_dim: usize) -> Vec<ModelConfig> {
    let mut v = vec![ModelConfig::abmil(input_dim, embed_dim, 2)];
    for m in [1, 2, 3, 5] {
        v.push(ModelConfig::madmil(input_dim, embed_dim, m, 2));
    }
    v.push(ModelConfig::mean_pool(input_dim, embed_dim, 2));
    v.push(ModelConfig::max_pool(input_dim, embed_dim, 2));
    v
}

/// Digit `d` lights a band of pixels starting at row `2d`, plus a faint
/// index-dependent speckle so images differ.
pub fn write_fake_mnist(dir: &Path, train: usize, test: usize) {
    fs::create_dir_all(dir).unwrap();
    for (count, images, labels) in [(train, TRAIN_IMAGES, TRAIN_LABELS), (test, TEST_IMAGES, TEST_LABELS)] {
        let mut pixels = Vec::with_capacity(count * 784);
        let mut digits = Vec::with_capacity(count);
        for i in 0..count {
            let digit = (i % 10) as u8;
            digits.push(digit);
            for p in 0..784 {
                let band = p / 28 >= 2 * digit as usize && p / 28 < 2 * digit as usize + 3;
                pixels.push(if band { 220 } else { ((i * 31 + p * 17) % 23) as u8 });
            }
        }
        fs::write(dir.join(images), encode_idx(&[count, 28, 28], &pixels)).unwrap();
        fs::write(dir.join(labels), encode_idx(&[count], &digits)).unwrap();
    }
}
