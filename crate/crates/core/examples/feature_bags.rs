//! Precomputed 1024-dim instance features: write, reload, train, evaluate.
//!
//! ```text
//! cargo run --release --example feature_bags -- [out_dir]
//! ```
//!
//! The bags are synthetic: positive bags carry a few instances shifted along
//! the first 64 feature dimensions.

use std::path::PathBuf;

use madmil::bags::{load_feature_bags, write_feature_bags, Bag, BagSplits};
use madmil::model::ModelConfig;
use madmil::training::{sweep_seeds, Protocol};
use madmil::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(prefix: &str, count: usize, rng: &mut ChaCha8Rng) -> Vec<Bag> {
    (0..count)
        .map(|i| {
            let label = i % 2;
            let n = rng.gen_range(20..60);
            let mut data: Vec<f64> = (0..n * 1024).map(|_| rng.gen_range(0.0..1.0)).collect();
            if label == 1 {
                for row in 0..3 {
                    for c in 0..64 {
                        data[row * 1024 + c] += 0.8;
                    }
                }
            }
            let bag_id = format!("{prefix}-{i:03}");
            Bag {
                instance_ids: (0..n).map(|k| format!("{bag_id}:{k}")).collect(),
                bag_id,
                features: Tensor::new(n, 1024, data).expect("bag shape"),
                label,
            }
        })
        .collect()
}

fn main() -> madmil::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/features"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (name, count) in [("train", 40), ("val", 20), ("test", 40)] {
        let manifest = write_feature_bags(&out, name, &synthetic(name, count, &mut rng))?;
        println!("wrote {}", manifest.display());
    }
    let data = BagSplits {
        train: load_feature_bags(&out.join("train.csv"))?,
        val: load_feature_bags(&out.join("val.csv"))?,
        test: load_feature_bags(&out.join("test.csv"))?,
    };

    let mut protocol = Protocol::features();
    protocol.train.epochs = 10;
    for cfg in [
        ModelConfig::abmil(1024, 512, 2),
        ModelConfig::madmil(1024, 512, 3, 2),
        ModelConfig::mean_pool(1024, 512, 2),
    ] {
        let sweep = sweep_seeds(&protocol, &cfg, &data, &[0, 1], 1)?;
        println!("{:<10} AUC {}  F1 {}", cfg.label(), sweep.auc, sweep.f1);
    }
    Ok(())
}
