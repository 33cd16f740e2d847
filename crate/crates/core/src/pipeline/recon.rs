//! Reconstruction of density matrix, Wigner function and photon numbers from
//! estimated parameters.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fock::{density_from_params, wigner_fock, DensityMatrix, TruncationWarning};
use crate::gaussian::{photon_decomposition, wigner_gaussian, PhotonNumbers};
use crate::StateParams;

pub fn photon_report(p: &StateParams) -> PhotonNumbers {
    photon_decomposition(p)
}

/// Square grid [−range, range]² sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerGrid {
    pub range: f64,
    pub step: f64,
}

impl WignerGrid {
    pub fn new(range: f64, step: f64) -> Result<Self> {
        if !(range.is_finite() && range > 0.0 && step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParam(format!(
                "Wigner grid range {range}, step {step}"
            )));
        }
        let g = WignerGrid { range, step };
        if g.axis().len() > 4001 {
            return Err(Error::InvalidParam(format!(
                "Wigner grid of {} points per axis",
                g.axis().len()
            )));
        }
        Ok(g)
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = (2.0 * self.range / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| -self.range + i as f64 * self.step).collect()
    }

    /// Row-major points, x outer and p inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = self.axis();
        axis.iter()
            .flat_map(|&x| axis.iter().map(move |&p| (x, p)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconOptions {
    /// Fock cutoff for the density matrix; `None` skips it.
    pub dim: Option<usize>,
    /// Wigner grid; evaluated from ρ when a density matrix is built and from
    /// the Gaussian closed form otherwise.
    pub wigner: Option<WignerGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerTable {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

impl WignerTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,w\n");
        for (&(x, p), w) in self.points.iter().zip(&self.values) {
            let _ = writeln!(out, "{x:.6},{p:.6},{w:.9e}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionBundle {
    pub params: StateParams,
    pub photons: PhotonNumbers,
    pub density: Option<DensityMatrix>,
    pub wigner: Option<WignerTable>,
    /// Set when the state does not fit the requested cutoff.
    pub truncation: Option<TruncationWarning>,
}

pub fn reconstruct(params: &StateParams, opts: &ReconOptions) -> Result<ReconstructionBundle> {
    let density = opts
        .dim
        .map(|d| density_from_params(params, d))
        .transpose()?;
    let truncation = density.as_ref().and_then(DensityMatrix::truncation_warning);
    let wigner = opts.wigner.map(|g| {
        let points = g.points();
        let values = match &density {
            Some(rho) => wigner_fock(rho, &points),
            None => points
                .iter()
                .map(|&(x, p)| wigner_gaussian(params, x, p))
                .collect(),
        };
        WignerTable { points, values }
    });
    Ok(ReconstructionBundle {
        params: *params,
        photons: photon_report(params),
        density,
        wigner,
        truncation,
    })
}

/// Plain-text density matrix: a `# dim N` line, then `m,n,re,im` per entry.
pub fn density_to_text(rho: &DensityMatrix) -> String {
    let d = rho.dim();
    let mut out = format!("# dim {d}\nm,n,re,im\n");
    for m in 0..d {
        for n in 0..d {
            let z = rho.get(m, n);
            let _ = writeln!(out, "{m},{n},{:.12e},{:.12e}", z.re, z.im);
        }
    }
    out
}

pub fn write_density_text(rho: &DensityMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, density_to_text(rho)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::mean_photon;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_bundle() {
        let b = reconstruct(
            &StateParams::VACUUM,
            &ReconOptions {
                dim: Some(16),
                wigner: Some(WignerGrid::new(1.0, 1.0).unwrap()),
            },
        )
        .unwrap();
        let rho = b.density.unwrap();
        assert!((rho.get(0, 0).re - 1.0).abs() < 1e-12);
        let w = b.wigner.unwrap();
        let centre = w
            .points
            .iter()
            .position(|&(x, p)| x == 0.0 && p == 0.0)
            .unwrap();
        assert!((w.values[centre] - 1.0 / PI).abs() < 1e-12);
        assert_eq!(
            b.photons,
            PhotonNumbers {
                total: 0.0,
                pure: 0.0,
                env: 0.0
            }
        );
        assert!(b.truncation.is_none());
    }

    #[test]
    fn pure_ten_db_photons() {
        let r = 10.0 * std::f64::consts::LN_10 / 20.0;
        let b = reconstruct(
            &StateParams::new(r, 0.0, 0.0).unwrap(),
            &ReconOptions::default(),
        )
        .unwrap();
        assert!((b.photons.total - 2.025).abs() < 1e-3);
        assert!((b.photons.pure - 2.025).abs() < 1e-3);
        assert_eq!(b.photons.env, 0.0);
    }

    #[test]
    fn photons_match_density() {
        let p = StateParams::new(0.6, 0.4, 0.15).unwrap();
        let b = reconstruct(
            &p,
            &ReconOptions {
                dim: Some(96),
                wigner: None,
            },
        )
        .unwrap();
        assert!((mean_photon(b.density.as_ref().unwrap()) - b.photons.total).abs() < 1e-3);
    }

    #[test]
    fn grid_axis() {
        let g = WignerGrid::new(2.0, 0.5).unwrap();
        assert_eq!(
            g.axis(),
            vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert_eq!(g.points().len(), 81);
        assert!(WignerGrid::new(1.0, 0.0).is_err());
        assert!(WignerGrid::new(100.0, 1e-3).is_err());
    }

    #[test]
    fn density_text_shape() {
        let rho = crate::fock::DensityMatrix::fock(1, 3).unwrap();
        let text = density_to_text(&rho);
        assert_eq!(text.lines().count(), 2 + 9);
        assert!(text.contains("\n1,1,1.000000000000e0,0.000000000000e0\n"));
    }
}
