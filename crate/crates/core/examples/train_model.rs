//! Trains the reference CNN on a small simulated dataset and evaluates it
//! on held-out sequences.
//!
//! cargo run --release --example train_model

use qstomo::datagen::{generate_dataset, GenConfig};
use qstomo::nn::{train, TrainConfig};
use qstomo::pipeline::{evaluate_fidelity_sweep, Engine};

fn main() -> qstomo::Result<()> {
    let gen = |n, seed| {
        generate_dataset(&GenConfig {
            n_examples: n,
            global_seed: seed,
            ..GenConfig::default()
        })
    };
    let (train_ds, test_ds) = (gen(2000, 1)?, gen(500, 2)?);
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let outcome = train(&train_ds, &cfg)?;
    for e in &outcome.log {
        println!("epoch {:>2}: train {:.5} val {:.5}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("best epoch {}", outcome.best_epoch);

    let report = evaluate_fidelity_sweep(&Engine::Fp32(outcome.model), &test_ds, 10)?;
    println!("held-out mean fidelity {:.4} ± {:.4}", report.mean_fidelity(), report.std_fidelity());
    print!("{}", report.bins_csv());
    Ok(())
}
