//! Wigner function of a truncated density matrix via the Laguerre series.
//!
//! With α = (x + ip)/√2 and B = 4|α|² = 2(x² + p²):
//!
//! W(x, p) = e^{−B/2}/π · [ Σ_m ρ_mm (−1)^m L_m(B)
//!           + 2 Re Σ_{m<n} ρ_mn (−1)^m (2α)^{n−m} √(m!/n!) L_m^{(n−m)}(B) ]
//!
//! For each off-diagonal order k = n − m the recurrence runs over the
//! normalized functions h_m = √(m!/(m+k)!)·B^{k/2}·e^{−B/2}·L_m^{(k)}(B),
//! which stay O(1) and never overflow at large m.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::density::DensityMatrix;

/// Evaluate W at every (x, p) point of `grid`.
pub fn wigner_fock(rho: &DensityMatrix, grid: &[(f64, f64)]) -> Vec<f64> {
    grid.par_iter()
        .map_with(vec![0.0; rho.dim()], |h, &(x, p)| {
            wigner_point(rho, x, p, h)
        })
        .collect()
}

/// Single-point evaluation; `h` is scratch space of length `rho.dim()`.
pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64, h: &mut [f64]) -> f64 {
    let dim = rho.dim();
    let b = 2.0 * (x * x + p * p);
    let angle = p.atan2(x);
    let mut total = 0.0;
    for k in 0..dim {
        let len = dim - k;
        normalized_laguerre(k, b, &mut h[..len]);
        let mut partial = Complex64::new(0.0, 0.0);
        for (m, &hm) in h[..len].iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            partial += rho.get(m, m + k) * (sign * hm);
        }
        if k == 0 {
            total += partial.re;
        } else {
            total += 2.0 * (partial * Complex64::from_polar(1.0, k as f64 * angle)).re;
        }
    }
    total / PI
}

/// Fills `out[m]` with h_m for m = 0..out.len() at fixed order `k`.
fn normalized_laguerre(k: usize, b: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let kf = k as f64;
    out[0] = if k == 0 {
        (-0.5 * b).exp()
    } else if b == 0.0 {
        0.0
    } else {
        (0.5 * kf * b.ln() - 0.5 * b - 0.5 * ln_factorial(k)).exp()
    };
    if out.len() == 1 {
        return;
    }
    out[1] = out[0] * (1.0 + kf - b) / (1.0 + kf).sqrt();
    for m in 1..out.len() - 1 {
        let mf = m as f64;
        out[m + 1] = ((2.0 * mf + 1.0 + kf - b) * out[m] - (mf * (mf + kf)).sqrt() * out[m - 1])
            / ((mf + 1.0) * (mf + 1.0 + kf)).sqrt();
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::density::density_from_params;
    use crate::gaussian::{wigner_gaussian, StateParams};

    #[test]
    fn vacuum_and_single_photon_at_origin() {
        let vac = DensityMatrix::fock(0, 16).unwrap();
        let one = DensityMatrix::fock(1, 16).unwrap();
        let w = wigner_fock(&vac, &[(0.0, 0.0), (1.0, 0.0)]);
        assert!((w[0] - 1.0 / PI).abs() < 1e-14);
        assert!((w[1] - (-1.0f64).exp() / PI).abs() < 1e-14);
        let w1 = wigner_fock(&one, &[(0.0, 0.0)]);
        assert!((w1[0] + 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn single_photon_off_origin() {
        // W_1(x,p) = (2(x²+p²) − 1)·e^{−(x²+p²)}/π
        let one = DensityMatrix::fock(1, 16).unwrap();
        for &(x, p) in &[(0.5, 0.2), (-1.0, 1.5), (2.0, -0.3)] {
            let s: f64 = x * x + p * p;
            let want = (2.0 * s - 1.0) * (-s).exp() / PI;
            let got = wigner_fock(&one, &[(x, p)])[0];
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn matches_gaussian_closed_form() {
        let p = StateParams::new(1.15, 0.9, 0.2).unwrap();
        let rho = density_from_params(&p, 128).unwrap();
        let grid: Vec<(f64, f64)> = (-8..=8)
            .flat_map(|i| (-8..=8).map(move |j| (0.5 * i as f64, 0.5 * j as f64)))
            .collect();
        let w = wigner_fock(&rho, &grid);
        for (&(x, y), &wf) in grid.iter().zip(&w) {
            let wg = wigner_gaussian(&p, x, y);
            assert!((wf - wg).abs() < 1e-5, "({x},{y}): {wf} vs {wg}");
        }
    }
}
