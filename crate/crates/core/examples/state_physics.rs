//! Squeezed thermal states two ways: closed-form Gaussian formulas and a
//! truncated Fock-basis density matrix.
//!
//! cargo run --release --example state_physics

use qstomo::fock::{density_from_params, mean_photon, uhlmann_fidelity, DEFAULT_DIM};
use qstomo::gaussian::{db_from_params, gaussian_fidelity, params_from_db, photon_decomposition, DbLevels};
use qstomo::StateParams;

fn main() -> qstomo::Result<()> {
    let a = params_from_db(
        &DbLevels {
            squeezing_db: 3.0,
            antisqueezing_db: 5.0,
        },
        0.0,
    )?;
    let b = StateParams::new(0.6, 0.3, 0.1)?;
    for (name, p) in [("a", &a), ("b", &b)] {
        let db = db_from_params(p);
        let ph = photon_decomposition(p);
        println!(
            "{name}: r={:.4} theta={:.4} nbar={:.4}  S={:.3} dB  A={:.3} dB  photons total={:.4} pure={:.4} env={:.4}",
            p.r(),
            p.theta(),
            p.nbar(),
            db.squeezing_db,
            db.antisqueezing_db,
            ph.total,
            ph.pure,
            ph.env
        );
    }

    let rho_a = density_from_params(&a, DEFAULT_DIM)?;
    let rho_b = density_from_params(&b, DEFAULT_DIM)?;
    println!("<n> from rho_a: {:.6}", mean_photon(&rho_a));
    println!("fidelity closed form: {:.8}", gaussian_fidelity(&a, &b));
    println!("fidelity Fock basis:  {:.8}", uhlmann_fidelity(&rho_a, &rho_b)?);
    Ok(())
}
