//! From estimated parameters to a full state description: photon numbers,
//! density matrix and Wigner function.
//!
//! cargo run --release --example reconstruct_state

use qstomo::pipeline::{reconstruct, ReconOptions, WignerGrid};
use qstomo::StateParams;

fn main() -> qstomo::Result<()> {
    let p = StateParams::new(0.8, 0.5, 0.2)?;
    let bundle = reconstruct(
        &p,
        &ReconOptions {
            dim: Some(64),
            wigner: Some(WignerGrid::new(5.0, 0.25)?),
        },
    )?;
    let ph = bundle.photons;
    println!("photons total={:.4} pure={:.4} env={:.4}", ph.total, ph.pure, ph.env);
    if let Some(rho) = &bundle.density {
        println!("rho dim {}, rho_00 = {:.6}", rho.dim(), rho.get(0, 0).re);
    }
    if let Some(w) = &bundle.wigner {
        let (i, max) = w.values.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        println!("Wigner: {} points, peak {max:.4} at {:?}", w.values.len(), w.points[i]);
    }
    println!("truncation warning: {:?}", bundle.truncation);
    Ok(())
}
