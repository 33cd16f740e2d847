//! Simulated homodyne records: one sequence of rotated-quadrature samples
//! per random squeezed thermal state.
//!
//! cargo run --release --example generate_data

use qstomo::datagen::{generate_dataset, read_dataset, write_dataset, GenConfig};

fn main() -> qstomo::Result<()> {
    let cfg = GenConfig {
        n_examples: 8,
        global_seed: 42,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&cfg)?;
    for i in 0..ds.len() {
        let p = ds.label(i);
        let seq = ds.sequence(i);
        let var = seq.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / seq.len() as f64;
        println!(
            "#{i}: S={:.2} dB nbar={:.3} theta={:.3}  first samples {:?}  <x^2>={var:.3}",
            p.squeezing_db(),
            p.nbar(),
            p.theta(),
            &seq[..4]
        );
    }

    let dir = tempfile_dir();
    let path = dir.join("example.qds");
    write_dataset(&ds, &path)?;
    let back = read_dataset(&path)?;
    println!("wrote {} ({} examples, round trip equal: {})", path.display(), back.len(), back == ds);
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("qstomo-examples");
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
