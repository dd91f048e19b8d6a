//! Parameter and FLOP counts for the benchmark architectures, next to the
//! published figures.
//!
//! ```text
//! cargo run --example count_params
//! ```

use madmil::model::{flops, format_millions, format_thousands, param_count, reference_figure, ModelConfig};

fn main() {
    let mnist = [
        ModelConfig::abmil(784, 128, 2),
        ModelConfig::madmil(784, 128, 4, 2),
        ModelConfig::madmil(784, 128, 6, 2),
        ModelConfig::madmil(784, 128, 7, 2),
        ModelConfig::mean_pool(784, 128, 2),
    ];
    let features = [
        ModelConfig::abmil(1024, 512, 2),
        ModelConfig::madmil(1024, 512, 2, 2),
        ModelConfig::madmil(1024, 512, 3, 2),
        ModelConfig::madmil(1024, 512, 8, 2),
        ModelConfig::mean_pool(1024, 512, 2),
        ModelConfig::madmil(1024, 512, 5, 3),
    ];
    for (title, models) in [("MNIST bags, 784 -> 128", &mnist[..]), ("slide features, 1024 -> 512", &features[..])] {
        println!("{title}");
        println!("  {:<10} {:>3} {:>9} {:>9} {:>9} {:>8} {:>8}", "model", "C", "params", "size", "published", "FLOPs", "published");
        for cfg in models {
            let params = param_count(cfg);
            let ops = flops(cfg, 120);
            let (pk, pm) = reference_figure(cfg).map_or((String::new(), String::new()), |r| {
                (format!("{:.1} K", r.size_k), format!("{:.1} M", r.flops_m))
            });
            println!(
                "  {:<10} {:>3} {:>9} {:>9} {:>9} {:>8} {:>8}",
                cfg.label(),
                cfg.classes,
                params,
                format_thousands(params),
                pk,
                format_millions(ops),
                pm
            );
        }
    }

    println!("head width d_m and attention hidden a_m at D = 512");
    for m in 1..=8 {
        let cfg = ModelConfig::madmil(1024, 512, m, 2);
        println!("  M = {m}: d_m = {:>3}, a_m = {:>3}, params {}", cfg.head_width(), cfg.head_hidden(), param_count(&cfg));
    }
}
