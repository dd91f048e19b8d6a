//! The four aggregators on one soft-bag setting: 10 seeds, grid-tuned
//! learning rate and weight decay, 20 epochs.
//!
//! ```text
//! cargo run --release --example table1 -- [p_pos] [p_neg] [heads] [jobs]
//! ```
//!
//! Published head counts: 6 for (0.4, 0.2), 4 for (0.6, 0.4), 7 for (0.8, 0.6).

use madmil::bags::{make_soft_bags, Mnist, SoftBagConfig};
use madmil::model::{flops, format_millions, format_thousands, param_count, ModelConfig};
use madmil::training::{sweep_seeds, Protocol};

fn main() -> madmil::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|v| v.parse().ok()).unwrap_or(default);
    let (p_pos, p_neg) = (arg(0, 0.4), arg(1, 0.2));
    let heads = arg(2, 6.0) as usize;
    let jobs = arg(3, 1.0) as usize;

    let mnist = Mnist::load(&Mnist::default_dir())?;
    let data = make_soft_bags(&SoftBagConfig::with_fractions(p_pos, p_neg), &mnist)?;
    let seeds: Vec<u64> = (0..10).collect();
    println!("p-pos = {p_pos}, p-neg = {p_neg}");
    println!("{:<10} {:>15} {:>15} {:>9} {:>7}", "model", "AUC", "F1", "size", "FLOPs");
    for cfg in [
        ModelConfig::abmil(784, 128, 2),
        ModelConfig::madmil(784, 128, heads, 2),
        ModelConfig::mean_pool(784, 128, 2),
        ModelConfig::max_pool(784, 128, 2),
    ] {
        let sweep = sweep_seeds(&Protocol::mnist(), &cfg, &data, &seeds, jobs)?;
        println!(
            "{:<10} {:>15} {:>15} {:>9} {:>7}",
            cfg.label(),
            sweep.auc.to_string(),
            sweep.f1.to_string(),
            format_thousands(param_count(&cfg)),
            format_millions(flops(&cfg, 120))
        );
    }
    Ok(())
}
