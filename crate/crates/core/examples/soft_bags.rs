//! Builds soft MNIST bags and writes them as feature-bag CSVs.
//!
//! ```text
//! cargo run --example soft_bags -- [p_pos] [p_neg] [out_dir]
//! ```
//!
//! IDX files are read from `$MADMIL_DATA_DIR` or `data/mnist`.

use std::path::PathBuf;

use madmil::bags::{make_soft_bags, write_feature_bags, Mnist, SoftBagConfig};

fn main() -> madmil::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p_pos = args.first().and_then(|v| v.parse().ok()).unwrap_or(0.4);
    let p_neg = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.2);
    let out = args.get(2).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/soft-bags"));

    let mnist = Mnist::load(&Mnist::default_dir())?;
    let config = SoftBagConfig::with_fractions(p_pos, p_neg);
    let (pos_keys, neg_keys) = config.key_counts();
    println!(
        "{} train / {} test images; bags of {} with {pos_keys} (positive) or {neg_keys} (negative) eights",
        mnist.train.len(),
        mnist.test.len(),
        config.bag_size
    );
    let splits = make_soft_bags(&config, &mnist)?;
    for (name, bags) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let positives = bags.iter().filter(|b| b.label == 1).count();
        let manifest = write_feature_bags(&out, name, bags)?;
        println!("{name:<5} {:>4} bags, {positives:>4} positive -> {}", bags.len(), manifest.display());
    }
    let first = &splits.train[0];
    println!("first training bag {} (label {}): {}", first.bag_id, first.label, first.instance_ids.join(" "));
    Ok(())
}
