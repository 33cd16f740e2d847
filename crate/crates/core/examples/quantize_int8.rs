//! Post-training INT8 quantization: calibrate, quantize, and compare the
//! integer engine against the float model and its fake-quant simulation.
//!
//! cargo run --release --example quantize_int8

use qstomo::datagen::{generate_dataset, GenConfig};
use qstomo::nn::{train, TrainConfig};
use qstomo::pipeline::{evaluate_fidelity_sweep, Engine};
use qstomo::quant::{collect_calibration_stats, fake_quant_trace, quantize_model, CalibMethod};

fn main() -> qstomo::Result<()> {
    let gen = |n, seed| {
        generate_dataset(&GenConfig {
            n_examples: n,
            global_seed: seed,
            ..GenConfig::default()
        })
    };
    let (train_ds, calib, test_ds) = (gen(1500, 1)?, gen(200, 3)?, gen(500, 2)?);
    let model = train(
        &train_ds,
        &TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        },
    )?
    .model;

    let stats = collect_calibration_stats(&model, &calib, CalibMethod::MinMax)?;
    let qm = quantize_model(&model, &stats)?;
    let seq = test_ds.sequence(0);
    let same = qm.qforward_trace(seq)? == fake_quant_trace(&model, &stats, seq)?;
    println!("integer codes equal fake-quant codes on example 0: {same}");

    for engine in [Engine::Fp32(model), Engine::Int8(qm)] {
        let rep = evaluate_fidelity_sweep(&engine, &test_ds, 10)?;
        println!("{}: mean fidelity {:.4}", engine.kind().tag(), rep.mean_fidelity());
    }
    Ok(())
}
