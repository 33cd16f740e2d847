use num_complex::Complex64;

use super::density::DensityMatrix;

/// Harmonic-oscillator eigenfunctions ψ_0..ψ_{len−1} at `x` via the
/// normalized Hermite recurrence
/// ψ_{n+1} = √(2/(n+1))·x·ψ_n − √(n/(n+1))·ψ_{n−1}.
pub fn oscillator_eigenfunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// p(x|φ) = Σ_{m,n} ρ_mn e^{i(n−m)φ} ψ_m(x) ψ_n(x).
pub fn quadrature_pdf_fock(rho: &DensityMatrix, phi: f64, x: f64) -> f64 {
    let dim = rho.dim();
    let mut psi = vec![0.0; dim];
    oscillator_eigenfunctions(x, &mut psi);
    // c_n = e^{inφ}ψ_n, so p = Re Σ conj(c_m) ρ_mn c_n
    let c: Vec<Complex64> = psi
        .iter()
        .enumerate()
        .map(|(n, &v)| Complex64::from_polar(v, n as f64 * phi))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..dim {
        let mut row = Complex64::new(0.0, 0.0);
        for n in 0..dim {
            row += rho.get(m, n) * c[n];
        }
        total += c[m].conj() * row;
    }
    total.re
}
