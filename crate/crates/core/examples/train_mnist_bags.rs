//! Grid-searched training of one aggregator on soft MNIST bags.
//!
//! ```text
//! cargo run --release --example train_mnist_bags -- [abmil|madmil/6|mean_pool|max_pool] [seeds]
//! ```

use madmil::bags::{make_soft_bags, Mnist, SoftBagConfig};
use madmil::model::{Aggregator, ModelConfig};
use madmil::training::{sweep_seeds, Protocol};

fn model(spec: &str) -> ModelConfig {
    let (name, heads) = spec.split_once('/').unwrap_or((spec, "1"));
    let aggregator: Aggregator = name.parse().expect("aggregator name");
    ModelConfig::abmil(784, 128, 2).with_aggregator(aggregator, heads.parse().expect("head count"))
}

fn main() -> madmil::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = model(args.first().map_or("madmil/6", String::as_str));
    let seeds: u64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(3);

    let mnist = Mnist::load(&Mnist::default_dir())?;
    let data = make_soft_bags(&SoftBagConfig::with_fractions(0.4, 0.2), &mnist)?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let sweep = sweep_seeds(&Protocol::mnist(), &cfg, &data, &seeds, 1)?;
    for run in &sweep.runs {
        let chosen = run.grid.table[run.grid.selected];
        println!(
            "seed {}: lr {:e} wd {:e} best epoch {:>2} val loss {:.4}  test AUC {:.3} F1 {:.3}",
            run.seed,
            chosen.learning_rate,
            chosen.weight_decay,
            chosen.best_epoch,
            chosen.best_val_loss,
            run.test.auc,
            run.test.f1
        );
    }
    println!("{}: AUC {}  F1 {}", cfg.label(), sweep.auc, sweep.f1);
    Ok(())
}
