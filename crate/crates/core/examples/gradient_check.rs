//! Backward pass of every aggregator against central differences.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use madmil::gradcheck::{compare_gradients, finite_difference_gradient};
use madmil::model::{forward, loss_and_gradients, ModelConfig, ModelParams};
use madmil::training::bag_loss;
use madmil::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> madmil::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::new(7, 12, (0..84).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let label = 1;
    let models = [
        ModelConfig::abmil(12, 8, 2),
        ModelConfig::madmil(12, 8, 1, 2),
        ModelConfig::madmil(12, 8, 2, 2),
        ModelConfig::madmil(12, 8, 3, 2),
        ModelConfig::madmil(12, 8, 5, 2),
        ModelConfig::mean_pool(12, 8, 2),
        ModelConfig::max_pool(12, 8, 2),
    ];
    for cfg in models {
        let mut params = ModelParams::init(&cfg, 3)?;
        for t in params.tensors_mut() {
            for v in t.data_mut() {
                *v += rng.gen_range(-0.1..0.1);
            }
        }
        let analytic = loss_and_gradients(&cfg, &params, &x, label)?;
        let (mut rel, mut abs, mut entries) = (0.0f64, 0.0f64, 0);
        for (i, grad) in analytic.gradients.iter().enumerate() {
            let numeric = finite_difference_gradient(
                |probe| {
                    let mut p = params.clone();
                    *p.tensors_mut()[i] = probe.clone();
                    let logits = forward(&cfg, &p, &x).expect("forward");
                    bag_loss(logits.data(), label).expect("loss")
                },
                params.tensors()[i],
                1e-6,
            );
            let m = compare_gradients(grad, &numeric, 1e-4);
            rel = rel.max(m.max_relative);
            abs = abs.max(m.max_absolute_near_zero);
            entries += grad.len();
        }
        println!(
            "{:<10} loss {:.6}  {entries:>4} entries  max rel err {rel:.2e}  max abs err near zero {abs:.2e}",
            cfg.label(),
            analytic.loss
        );
    }
    Ok(())
}
