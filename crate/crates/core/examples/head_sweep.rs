//! Chooses the MAD-MIL head count by mean validation loss.
//!
//! ```text
//! cargo run --release --example head_sweep -- [seeds] [jobs]
//! ```

use madmil::bags::{make_soft_bags, Mnist, SoftBagConfig};
use madmil::model::ModelConfig;
use madmil::training::{sweep_heads, Protocol, TrainConfig};

fn main() -> madmil::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|v| v.parse().ok()).unwrap_or(2);
    let jobs: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(1);

    let mnist = Mnist::load(&Mnist::default_dir())?;
    let data = make_soft_bags(&SoftBagConfig::with_fractions(0.4, 0.2), &mnist)?;
    let protocol = Protocol::fixed(TrainConfig::default().with_rates(5e-4, 1e-4));
    let seeds: Vec<u64> = (0..seeds).collect();
    let base = ModelConfig::madmil(784, 128, 1, 2);
    let sweep = sweep_heads(&protocol, &base, &[1, 2, 4, 6, 8], &data, &seeds, jobs, 120)?;
    for row in &sweep.rows {
        println!(
            "M = {}  val loss {:.4}  AUC {}  params {:>6}  FLOPs {}",
            row.heads, row.sweep.val_loss.mean, row.sweep.auc, row.params, row.flops
        );
    }
    println!("selected M = {}", sweep.selected_heads());
    Ok(())
}
