use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::gaussian::StateParams;

/// Truncation dimension used when none is given.
pub const DEFAULT_DIM: usize = 128;

/// Trace deficit (or top-quarter population) above which a reconstruction
/// is flagged as truncated.
pub const TRACE_DEFICIT_WARN: f64 = 1e-4;

/// Truncated Fock-basis density matrix. Entry (m, n) is ⟨m|ρ|n⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

/// Evidence that the Fock cutoff is too small for a state.
///
/// The truncated squeeze operator is exactly unitary, so a squeezed state
/// that does not fit keeps unit trace and instead piles population into the
/// highest levels. Both the trace deficit and the population of the top
/// quarter of levels are reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub dim: usize,
    pub deficit: f64,
    pub tail_mass: f64,
}

impl DensityMatrix {
    pub fn from_matrix(mat: ComplexMatrix) -> Self {
        DensityMatrix { mat }
    }

    /// |n⟩⟨n| in a `dim`-level space.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidParam(format!(
                "Fock level {n} outside dim {dim}"
            )));
        }
        let mut mat = ComplexMatrix::zeros(dim);
        mat.set(n, n, Complex64::new(1.0, 0.0));
        Ok(DensityMatrix { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.mat.get(m, n)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    /// Population of levels ⌈3·dim/4⌉..dim.
    pub fn tail_mass(&self) -> f64 {
        let start = (3 * self.dim()).div_ceil(4);
        (start..self.dim()).map(|n| self.get(n, n).re).sum()
    }

    pub fn truncation_warning(&self) -> Option<TruncationWarning> {
        let deficit = self.trace_deficit();
        let tail_mass = self.tail_mass();
        (deficit > TRACE_DEFICIT_WARN || tail_mass > TRACE_DEFICIT_WARN).then_some(
            TruncationWarning {
                dim: self.dim(),
                deficit,
                tail_mass,
            },
        )
    }

    /// Largest |ρ_mn − conj(ρ_nm)|.
    pub fn hermiticity_error(&self) -> f64 {
        let m = self.mat.inner();
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..=i {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat
            .inner()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    /// Copy rescaled to unit trace. Only for display; computations keep the
    /// truncated matrix as is.
    pub fn normalized(&self) -> DensityMatrix {
        let t = self.trace();
        DensityMatrix {
            mat: ComplexMatrix::from_inner(self.mat.inner() / Complex64::new(t, 0.0)),
        }
    }
}

/// Truncated annihilation operator, (a)_{n−1,n} = √n.
pub fn annihilation_matrix(dim: usize) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidParam(format!(
            "annihilation operator needs dim >= 2, got {dim}"
        )));
    }
    let mut a = ComplexMatrix::zeros(dim);
    for n in 1..dim {
        a.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    Ok(a)
}

/// S(ξ) = exp(½(ξ̄a² − ξa†²)) with ξ = r·e^{2iθ}.
pub fn squeeze_operator(r: f64, theta: f64, dim: usize) -> Result<ComplexMatrix> {
    if dim < 16 {
        return Err(Error::InvalidParam(format!(
            "squeeze operator needs dim >= 16, got {dim}"
        )));
    }
    if !(r.is_finite() && theta.is_finite()) || r < 0.0 {
        return Err(Error::InvalidParam(format!(
            "squeezing r = {r} must be finite and >= 0"
        )));
    }
    if r > 1.5 && dim < DEFAULT_DIM {
        return Err(Error::InvalidParam(format!(
            "r = {r} > 1.5 needs dim >= {DEFAULT_DIM} (got {dim})"
        )));
    }
    let xi = Complex64::from_polar(r, 2.0 * theta);
    let mut gen = ComplexMatrix::zeros(dim);
    for n in 2..dim {
        // (a²)_{n−2,n} = √(n(n−1)); a†² is its transpose
        let amp = ((n * (n - 1)) as f64).sqrt();
        gen.set(n - 2, n, 0.5 * xi.conj() * amp);
        gen.set(n, n - 2, -0.5 * xi * amp);
    }
    Ok(gen.exp())
}

/// Thermal state with occupation p_n = n̄ⁿ/(n̄+1)^{n+1}, truncated to `dim`.
pub fn thermal_state(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::InvalidParam(format!(
            "nbar = {nbar} must be finite and >= 0"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidParam("dim must be positive".into()));
    }
    let mut mat = ComplexMatrix::zeros(dim);
    let ratio = nbar / (nbar + 1.0);
    let mut p = 1.0 / (nbar + 1.0);
    for n in 0..dim {
        mat.set(n, n, Complex64::new(p, 0.0));
        p *= ratio;
    }
    Ok(DensityMatrix { mat })
}

/// ρ = S(ξ) ρ_th S†(ξ). Truncation loss is logged and left in place.
pub fn density_from_params(p: &StateParams, dim: usize) -> Result<DensityMatrix> {
    let s = squeeze_operator(p.r(), p.theta(), dim)?;
    let thermal = thermal_state(p.nbar(), dim)?;
    let mut weighted = s.clone().into_inner();
    for (n, mut col) in weighted.column_iter_mut().enumerate() {
        col *= thermal.get(n, n);
    }
    let rho = &weighted * s.inner().adjoint();
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let out = DensityMatrix {
        mat: ComplexMatrix::from_inner(rho),
    };
    if let Some(w) = out.truncation_warning() {
        log::warn!(
            "density matrix truncated: dim={} trace deficit={:.3e} tail mass={:.3e} (r={:.4}, nbar={:.4})",
            w.dim,
            w.deficit,
            w.tail_mass,
            p.r(),
            p.nbar()
        );
    }
    Ok(out)
}

/// Tr(ρ·N).
pub fn mean_photon(rho: &DensityMatrix) -> f64 {
    (0..rho.dim()).map(|n| n as f64 * rho.get(n, n).re).sum()
}

/// Eigenvalues below this fraction of the largest (times dim) are round-off
/// and are treated as zero along with negative ones.
fn numerical_zero(eigenvalues: &[f64]) -> f64 {
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    eigenvalues.len() as f64 * f64::EPSILON * top
}

fn clamped_sqrt(l: f64, floor: f64) -> f64 {
    if l <= floor {
        0.0
    } else {
        l.sqrt()
    }
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let floor = numerical_zero(eig.eigenvalues.as_slice());
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(clamped_sqrt(eig.eigenvalues[k], floor), 0.0);
    }
    &scaled * eig.eigenvectors.adjoint()
}

/// F(ρ, σ) = (Tr √(√ρ σ √ρ))², evaluated as the squared trace norm of
/// √ρ·√σ. Negative and round-off eigenvalues are clamped to zero.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let product = hermitian_sqrt(rho.mat.inner()) * hermitian_sqrt(sigma.mat.inner());
    let trace_norm: f64 = product.singular_values().iter().sum();
    Ok((trace_norm * trace_norm).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{gaussian_fidelity, photon_decomposition};

    const TEN_DB_R: f64 = 1.151_292_546_497_023;

    #[test]
    fn annihilation_examples() {
        let a = annihilation_matrix(2).unwrap();
        assert_eq!(a.get(0, 1), Complex64::new(1.0, 0.0));
        assert_eq!(a.get(0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(a.get(1, 0), Complex64::new(0.0, 0.0));
        let a = annihilation_matrix(3).unwrap();
        assert!((a.get(1, 2).re - 2f64.sqrt()).abs() < 1e-15);
        let n = a.adjoint().matmul(&a);
        for k in 0..2 {
            assert!((n.get(k, k).re - k as f64).abs() < 1e-12);
        }
        assert!(annihilation_matrix(1).is_err());
    }

    #[test]
    fn squeeze_of_zero_is_identity() {
        let s = squeeze_operator(0.0, 0.3, 32).unwrap();
        assert_eq!(s.max_abs_diff_block(&ComplexMatrix::identity(32), 32), 0.0);
    }

    #[test]
    fn squeeze_rejects_unsound_truncation() {
        assert!(squeeze_operator(1.6, 0.0, 64).is_err());
        assert!(squeeze_operator(0.5, 0.0, 8).is_err());
        assert!(squeeze_operator(-0.5, 0.0, 32).is_err());
    }

    #[test]
    fn squeezed_vacuum_amplitudes() {
        let s = squeeze_operator(TEN_DB_R, 0.7, 128).unwrap();
        let p0 = s.get(0, 0).norm_sqr();
        assert!((p0 - 1.0 / TEN_DB_R.cosh()).abs() < 1e-4, "p0 = {p0}");
        for n in (1..128).step_by(2) {
            assert!(s.get(n, 0).norm() < 1e-10);
        }
    }

    #[test]
    fn squeeze_unitarity_on_leading_block() {
        let s = squeeze_operator(1.2, 0.4, 128).unwrap();
        let sts = s.adjoint().matmul(&s);
        let err = sts.max_abs_diff_block(&ComplexMatrix::identity(128), 64);
        assert!(err <= 1e-6, "unitarity error {err}");
    }

    #[test]
    fn squeeze_unitarity_improves_with_dim() {
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&d| {
                let s = squeeze_operator(TEN_DB_R, 0.0, d).unwrap();
                s.adjoint()
                    .matmul(&s)
                    .max_abs_diff_block(&ComplexMatrix::identity(d), 32)
            })
            .collect();
        // already at round-off for the leading block; only require no growth
        // beyond that floor
        let floor = 1e-13;
        assert!(
            errs[1] <= errs[0] + floor && errs[2] <= errs[1] + floor,
            "{errs:?}"
        );
        assert!(errs[2] <= 1e-12);
    }

    #[test]
    fn thermal_examples() {
        let vac = thermal_state(0.0, 16).unwrap();
        assert_eq!(vac.get(0, 0).re, 1.0);
        assert_eq!(vac.trace(), 1.0);
        let th = thermal_state(1.0, 128).unwrap();
        assert_eq!(th.get(0, 0).re, 0.5);
        assert_eq!(th.get(1, 1).re, 0.25);
        assert_eq!(th.get(2, 2).re, 0.125);
        assert!(th.trace_deficit().abs() < 1e-15);
        let small = thermal_state(1.0, 4).unwrap();
        assert!((small.trace_deficit() - 0.5f64.powi(4)).abs() < 1e-15);
        assert!((mean_photon(&th) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_examples() {
        let vac = density_from_params(&StateParams::VACUUM, 128).unwrap();
        assert!((vac.get(0, 0).re - 1.0).abs() < 1e-15);
        assert_eq!(mean_photon(&vac), 0.0);

        let sq = density_from_params(&StateParams::new(TEN_DB_R, 0.0, 0.0).unwrap(), 128).unwrap();
        assert!((sq.get(0, 0).re - 1.0 / TEN_DB_R.cosh()).abs() < 1e-4);
        assert!((mean_photon(&sq) - 2.025).abs() < 1e-3);

        let p = StateParams::new(0.4605, 1.0, 0.1295).unwrap();
        let rho = density_from_params(&p, 128).unwrap();
        assert!((mean_photon(&rho) - photon_decomposition(&p).total).abs() < 1e-4);
        assert!((mean_photon(&rho) - 0.416).abs() < 1e-3);
    }

    #[test]
    fn density_invariants_and_parity() {
        let p = StateParams::new(1.3, 2.2, 0.2).unwrap();
        let rho = density_from_params(&p, 128).unwrap();
        assert!(rho.hermiticity_error() <= 1e-10);
        assert!(rho.trace_deficit() <= 1e-4 && rho.trace() <= 1.0 + 1e-10);
        assert!(rho.truncation_warning().is_none());
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        assert!(min_eig >= -1e-8, "min eigenvalue {min_eig}");
        for m in 0..128 {
            for n in 0..128 {
                if (m + n) % 2 == 1 {
                    assert!(rho.get(m, n).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn oversized_state_is_flagged() {
        // 10 dB below vacuum on top of n̄ = 1 thermal noise needs r ≈ 1.7
        let p = StateParams::new(1.701, 0.3, 1.0).unwrap();
        let rho = density_from_params(&p, 128).unwrap();
        let w = rho.truncation_warning().expect("should be flagged");
        assert!(w.tail_mass > 1e-2);
        let ok = density_from_params(&StateParams::new(1.32, 0.3, 0.2).unwrap(), 128).unwrap();
        assert!(ok.truncation_warning().is_none());
    }

    #[test]
    fn normalized_copy_has_unit_trace() {
        let rho = thermal_state(1.0, 8).unwrap();
        assert!(rho.trace() < 1.0);
        assert!((rho.normalized().trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uhlmann_examples() {
        let vac = DensityMatrix::fock(0, 8).unwrap();
        let one = DensityMatrix::fock(1, 8).unwrap();
        assert!(uhlmann_fidelity(&vac, &one).unwrap().abs() < 1e-12);
        assert!((uhlmann_fidelity(&vac, &vac).unwrap() - 1.0).abs() < 1e-8);

        let vac = DensityMatrix::fock(0, 128).unwrap();
        let th = thermal_state(1.0, 128).unwrap();
        assert!((uhlmann_fidelity(&vac, &th).unwrap() - 0.5).abs() < 1e-6);

        let other = DensityMatrix::fock(0, 16).unwrap();
        assert!(matches!(
            uhlmann_fidelity(&vac, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn uhlmann_self_and_symmetry() {
        let a = density_from_params(&StateParams::new(0.9, 0.3, 0.1).unwrap(), 64).unwrap();
        let b = density_from_params(&StateParams::new(0.5, 1.9, 0.4).unwrap(), 64).unwrap();
        assert!((uhlmann_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-8);
        let ab = uhlmann_fidelity(&a, &b).unwrap();
        let ba = uhlmann_fidelity(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-8, "{ab} vs {ba}");
    }

    #[test]
    fn fock_fidelity_matches_gaussian_closed_form() {
        let a = StateParams::new(0.7, 0.4, 0.05).unwrap();
        let b = StateParams::new(0.9, 0.6, 0.15).unwrap();
        let fa = density_from_params(&a, 128).unwrap();
        let fb = density_from_params(&b, 128).unwrap();
        let fock = uhlmann_fidelity(&fa, &fb).unwrap();
        assert!((fock - gaussian_fidelity(&a, &b)).abs() < 1e-4);
    }
}
