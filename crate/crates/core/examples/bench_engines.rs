//! Single-threaded latency of the FP32 and INT8 engines on an untrained
//! network.
//!
//! cargo run --release --example bench_engines

use qstomo::bench::{bench_csv, throughput, time_engine};
use qstomo::datagen::{generate_dataset, GenConfig};
use qstomo::nn::{model_init, DEFAULT_ARCH};
use qstomo::pipeline::Engine;
use qstomo::quant::{collect_calibration_stats, quantize_model, CalibMethod};

fn main() -> qstomo::Result<()> {
    let ds = generate_dataset(&GenConfig {
        n_examples: 64,
        ..GenConfig::default()
    })?;
    let model = model_init(DEFAULT_ARCH, 0)?;
    let stats = collect_calibration_stats(&model, &ds, CalibMethod::MinMax)?;
    let engines = [Engine::Int8(quantize_model(&model, &stats)?), Engine::Fp32(model)];
    let mut rows = Vec::new();
    for engine in &engines {
        rows.push(time_engine(engine, &ds, 2000, 50)?);
        let t = throughput(engine, &ds, 2000, rayon::current_num_threads())?;
        println!("{}: {:.0} inferences/s on {} threads", t.engine, t.per_second, t.threads);
    }
    print!("{}", bench_csv(&rows));
    Ok(())
}
