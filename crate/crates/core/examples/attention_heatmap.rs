//! Per-head attention on a positive test bag, written as PGM montages.
//!
//! ```text
//! cargo run --release --example attention_heatmap -- [heads] [out_dir]
//! ```

use std::path::PathBuf;

use madmil::bags::soft::parse_instance_id;
use madmil::bags::{make_soft_bags, Mnist, SoftBagConfig};
use madmil::experiment::write_pgm;
use madmil::model::{infer, ModelConfig};
use madmil::training::{grid_search, Protocol, TrainConfig};

fn main() -> madmil::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let heads: usize = args.first().and_then(|v| v.parse().ok()).unwrap_or(4);
    let out = args.get(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/attention"));
    std::fs::create_dir_all(&out).map_err(|e| madmil::MilError::io(&out, e))?;

    let mnist = Mnist::load(&Mnist::default_dir())?;
    let data = make_soft_bags(&SoftBagConfig::with_fractions(0.4, 0.2), &mnist)?;
    let cfg = ModelConfig::madmil(784, 128, heads, 2);
    let protocol = Protocol::fixed(TrainConfig::default().with_rates(5e-4, 1e-4));
    let trained = grid_search(&protocol, &cfg, &data, 0)?.run;
    println!("{} trained, best epoch {} (val loss {:.4})", cfg.label(), trained.best_epoch, trained.best_val_loss);

    let bag = data.test.iter().find(|b| b.label == 1).expect("a positive test bag");
    let digits: Vec<u8> = bag
        .instance_ids
        .iter()
        .map(|id| parse_instance_id(id).map_or(255, |(_, i)| mnist.test.labels[i]))
        .collect();
    let inference = infer(&cfg, &trained.best_params, &bag.features)?;
    println!("bag {}: digits {:?}", bag.bag_id, digits);
    for (h, weights) in inference.attention.iter().enumerate() {
        let on_keys: f64 = weights.data().iter().zip(&digits).filter(|(_, &d)| d == 8).map(|(w, _)| w).sum();
        println!("  head {h}: attention mass on eights {on_keys:.3}");

        let top = weights.data().iter().copied().fold(0.0, f64::max);
        let n = bag.len();
        let mut pixels = vec![0u8; 28 * 28 * n];
        for (k, id) in bag.instance_ids.iter().enumerate() {
            let (_, index) = parse_instance_id(id).expect("instance id");
            let scale = weights.get(k, 0) / top;
            for (p, &v) in mnist.test.image(index).iter().enumerate() {
                let (row, col) = (p / 28, p % 28);
                pixels[row * 28 * n + k * 28 + col] = (v as f64 * scale).round() as u8;
            }
        }
        let path = out.join(format!("{}-head{h}.pgm", bag.bag_id));
        write_pgm(&path, 28 * n, 28, &pixels)?;
    }
    println!("montages in {}", out.display());
    Ok(())
}
