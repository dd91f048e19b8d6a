//! Structural properties of the tape and the aggregators.

mod common;

use madmil::autodiff::{softmax, Tape};
use madmil::model::{flops, infer, param_count, reference_figure, ModelConfig, ModelParams};
use madmil::Tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;

const EXACT: f64 = 1e-12;

fn shuffled(seed: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut common::rng(seed ^ 0xabc));
    order
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_invariance_and_equivariance(seed in 0u64..1 << 40, n in 1usize..12, heads in 1usize..6) {
        let models = [
            ModelConfig::abmil(6, 10, 2),
            ModelConfig::madmil(6, 10, heads, 3),
            ModelConfig::mean_pool(6, 10, 2),
            ModelConfig::max_pool(6, 10, 2),
        ];
        for cfg in models {
            let p = common::params(&cfg, seed);
            let x = common::uniform(&mut common::rng(seed), n, 6);
            let order = shuffled(seed, n);
            let base = infer(&cfg, &p, &x).unwrap();
            let moved = infer(&cfg, &p, &common::row_permuted(&x, &order)).unwrap();
            prop_assert!(base.logits.max_abs_diff(&moved.logits) < EXACT);
            for (a, b) in base.attention.iter().zip(&moved.attention) {
                prop_assert!(a.data().iter().all(|&w| w > 0.0));
                prop_assert!((a.sum() - 1.0).abs() < EXACT);
                for (k, &src) in order.iter().enumerate() {
                    prop_assert!((b.get(k, 0) - a.get(src, 0)).abs() < EXACT);
                }
            }
        }
    }

    #[test]
    fn duplicated_bag_divides_attention(seed in 0u64..1 << 40, n in 1usize..6, k in 2usize..5) {
        let cfg = ModelConfig::madmil(5, 9, 3, 2);
        let p = common::params(&cfg, seed);
        let x = common::uniform(&mut common::rng(seed), n, 5);
        let repeated: Vec<usize> = (0..k).flat_map(|_| 0..n).collect();
        let base = infer(&cfg, &p, &x).unwrap();
        let copies = infer(&cfg, &p, &x.select_rows(&repeated)).unwrap();
        prop_assert!(base.logits.max_abs_diff(&copies.logits) < EXACT);
        for (a, b) in base.attention.iter().zip(&copies.attention) {
            for (row, &src) in repeated.iter().enumerate() {
                prop_assert!((b.get(row, 0) - a.get(src, 0) / k as f64).abs() < EXACT);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(scores in prop::collection::vec(-30.0f64..30.0, 1..20), shift in -500.0f64..500.0) {
        let a = softmax(&scores);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < EXACT);
        let moved: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        prop_assert!(common::max_abs_diff(&a, &softmax(&moved)) < EXACT);

        let mut tape = Tape::new();
        let s = tape.constant(Tensor::column_vector(&scores));
        let w = tape.softmax_instances(s).unwrap();
        prop_assert!(common::max_abs_diff(tape.value(w).data(), &a) < EXACT);
    }

    #[test]
    fn concat_then_slice_recovers_parts(seed in 0u64..1 << 40, rows in 1usize..5, widths in prop::collection::vec(1usize..5, 1..5)) {
        let mut r = common::rng(seed);
        let parts: Vec<Tensor> = widths.iter().map(|&w| common::uniform(&mut r, rows, w)).collect();
        let mut tape = Tape::new();
        let vars: Vec<_> = parts.iter().map(|p| tape.constant(p.clone())).collect();
        let all = tape.concat_columns(&vars).unwrap();
        let mut start = 0;
        for (part, &w) in parts.iter().zip(&widths) {
            let s = tape.slice_columns(all, start, w).unwrap();
            prop_assert_eq!(tape.value(s), part);
            start += w;
        }
    }

    #[test]
    fn operations_are_bitwise_deterministic(seed in 0u64..1 << 40) {
        let cfg = ModelConfig::madmil(7, 11, 4, 2);
        let x = common::uniform(&mut common::rng(seed), 6, 7);
        let a = infer(&cfg, &ModelParams::init(&cfg, seed).unwrap(), &x).unwrap();
        let b = infer(&cfg, &ModelParams::init(&cfg, seed).unwrap(), &x).unwrap();
        prop_assert_eq!(a.logits, b.logits);
        prop_assert_eq!(a.attention, b.attention);
    }
}

#[test]
fn scalar_count_equals_param_count() {
    let mut configs = common::small_models(12, 8);
    for d in [128, 512] {
        for m in 1..=10 {
            configs.push(ModelConfig::madmil(1024, d, m, 2));
            configs.push(ModelConfig::madmil(784, d, m, 3));
        }
        configs.push(ModelConfig::abmil(1024, d, 2));
        configs.push(ModelConfig::max_pool(784, d, 3));
    }
    for cfg in configs {
        let p = ModelParams::zeros(&cfg).unwrap();
        assert_eq!(p.scalar_count() as u64, param_count(&cfg), "{}", cfg.label());
    }
}

#[test]
fn param_count_non_increasing_in_heads() {
    for input_dim in [784, 1024] {
        let counts: Vec<u64> = (1..=16).map(|m| param_count(&ModelConfig::madmil(input_dim, 512, m, 2))).collect();
        for w in counts.windows(2) {
            assert!(w[1] <= w[0], "{counts:?}");
        }
    }
}

#[test]
fn flops_affine_in_instances() {
    for cfg in common::small_models(1024, 512) {
        let classifier = flops(&cfg, 1) - (flops(&cfg, 2) - flops(&cfg, 1));
        assert_eq!(classifier, (cfg.output_width() * cfg.classes) as u64);
        for n in [1, 7, 120, 500] {
            let per = flops(&cfg, 2) - flops(&cfg, 1);
            assert_eq!(flops(&cfg, n), per * n as u64 + classifier);
        }
    }
}

#[test]
fn three_class_sizes_near_published() {
    for cfg in [
        ModelConfig::abmil(1024, 512, 3),
        ModelConfig::madmil(1024, 512, 5, 3),
        ModelConfig::mean_pool(1024, 512, 3),
    ] {
        let figure = reference_figure(&cfg).expect("published three-class figure");
        let size_k = param_count(&cfg) as f64 / 1e3;
        assert!((size_k - figure.size_k).abs() / figure.size_k < 0.01, "{}: {size_k}", cfg.label());
        let flops_m = flops(&cfg, 120) as f64 / 1e6;
        assert!((flops_m - figure.flops_m).abs() / figure.flops_m < 0.01, "{}: {flops_m}", cfg.label());
    }
}

#[test]
fn init_is_seeded_with_zero_biases() {
    let cfg = ModelConfig::madmil(20, 16, 3, 2);
    let a = ModelParams::init(&cfg, 5).unwrap();
    assert_eq!(a, ModelParams::init(&cfg, 5).unwrap());
    assert_ne!(a, ModelParams::init(&cfg, 6).unwrap());
    assert!(a.compression.bias.data().iter().all(|&b| b == 0.0));
    assert!(a.classifier.bias.data().iter().all(|&b| b == 0.0));
    for h in &a.heads {
        for b in [&h.b_v, &h.b_u, &h.b_w] {
            assert!(b.data().iter().all(|&v| v == 0.0));
        }
    }
}
