//! Closed-form covariance-matrix description of zero-mean single-mode
//! squeezed thermal states.
//!
//! Convention: ħ = 1 and x̂ = (a + a†)/√2, so the vacuum has quadrature
//! variance ½ and the covariance matrix of the vacuum is diag(½, ½).
//! A state with parameters (r, θ, n̄) is S(ξ) ρ_th(n̄) S†(ξ) with
//! ξ = r·e^{2iθ}; its quadrature noise is smallest along φ = θ.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Squeezing magnitude, squeezing-axis angle and environmental thermal
/// photon number of a degraded squeezed state.
///
/// `theta` is kept in `[0, π)`; the state is invariant under θ → θ + π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateParams {
    r: f64,
    theta: f64,
    nbar: f64,
}

impl StateParams {
    pub const VACUUM: StateParams = StateParams {
        r: 0.0,
        theta: 0.0,
        nbar: 0.0,
    };

    pub fn new(r: f64, theta: f64, nbar: f64) -> Result<Self> {
        if !(r.is_finite() && theta.is_finite() && nbar.is_finite()) {
            return Err(Error::NonFinite("state parameters"));
        }
        if r < 0.0 {
            return Err(Error::InvalidParam(format!(
                "squeezing r = {r} must be >= 0"
            )));
        }
        if nbar < 0.0 {
            return Err(Error::InvalidParam(format!(
                "thermal photon number nbar = {nbar} must be >= 0"
            )));
        }
        Ok(StateParams {
            r,
            theta: canonical_angle(theta),
            nbar,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// Squeezing below vacuum in dB.
    pub fn squeezing_db(&self) -> f64 {
        db_from_params(self).squeezing_db
    }
}

/// Folds an angle into `[0, π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// 2×2 real symmetric quadrature covariance over (x, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance {
    pub xx: f64,
    pub xp: f64,
    pub pp: f64,
}

impl Covariance {
    pub fn det(&self) -> f64 {
        self.xx * self.pp - self.xp * self.xp
    }

    pub fn add(&self, other: &Covariance) -> Covariance {
        Covariance {
            xx: self.xx + other.xx,
            xp: self.xp + other.xp,
            pp: self.pp + other.pp,
        }
    }

    /// ξᵀ V⁻¹ ξ for ξ = (x, p).
    pub fn inverse_quadratic_form(&self, x: f64, p: f64) -> f64 {
        (self.pp * x * x - 2.0 * self.xp * x * p + self.xx * p * p) / self.det()
    }
}

/// Squeezing and anti-squeezing relative to the vacuum, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbLevels {
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
}

/// Photon-number split into the pure squeezing part and the environmental part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumbers {
    pub total: f64,
    pub pure: f64,
    pub env: f64,
}

fn principal_variances(p: &StateParams) -> (f64, f64) {
    let thermal = p.nbar + 0.5;
    (thermal * (-2.0 * p.r).exp(), thermal * (2.0 * p.r).exp())
}

/// V = R(θ)·diag((n̄+½)e^{−2r}, (n̄+½)e^{2r})·R(θ)ᵀ.
pub fn covariance_from_params(p: &StateParams) -> Covariance {
    let (v_min, v_max) = principal_variances(p);
    let (s, c) = p.theta.sin_cos();
    Covariance {
        xx: v_min * c * c + v_max * s * s,
        xp: (v_min - v_max) * s * c,
        pp: v_min * s * s + v_max * c * c,
    }
}

/// Variance of the homodyne quadrature x̂cosφ + p̂sinφ.
pub fn quadrature_variance(p: &StateParams, phi: f64) -> f64 {
    let (v_min, v_max) = principal_variances(p);
    let (s, c) = (phi - p.theta).sin_cos();
    v_min * c * c + v_max * s * s
}

pub fn db_from_params(p: &StateParams) -> DbLevels {
    // 10·log10(V/½) with V = (n̄+½)e^{∓2r}, expanded to avoid exp/log round trips
    let thermal_db = 10.0 * (2.0 * p.nbar + 1.0).log10();
    let squeeze_db = 20.0 * p.r / std::f64::consts::LN_10;
    DbLevels {
        squeezing_db: squeeze_db - thermal_db,
        antisqueezing_db: squeeze_db + thermal_db,
    }
}

/// Inverse of [`db_from_params`]; rejects anti-squeezing below squeezing.
pub fn params_from_db(d: &DbLevels, theta: f64) -> Result<StateParams> {
    if !(d.squeezing_db.is_finite() && d.antisqueezing_db.is_finite()) {
        return Err(Error::NonFinite("dB levels"));
    }
    if d.antisqueezing_db < d.squeezing_db {
        return Err(Error::Unphysical {
            squeezing_db: d.squeezing_db,
            antisqueezing_db: d.antisqueezing_db,
        });
    }
    let ln10 = std::f64::consts::LN_10;
    // r = ¼·ln(V_max/V_min), n̄ + ½ = √(V_min·V_max)
    let r = (d.squeezing_db + d.antisqueezing_db) * ln10 / 40.0;
    let half_excess = (d.antisqueezing_db - d.squeezing_db) / 20.0;
    let nbar = 0.5 * (half_excess * ln10).exp_m1();
    StateParams::new(r, theta, nbar)
}

pub fn photon_decomposition(p: &StateParams) -> PhotonNumbers {
    let pure = p.r.sinh().powi(2);
    // (n̄+½)cosh2r − ½ = sinh²r + n̄·cosh2r
    let env = p.nbar * (2.0 * p.r).cosh();
    PhotonNumbers {
        total: pure + env,
        pure,
        env,
    }
}

/// Uhlmann fidelity between two zero-mean single-mode Gaussian states.
pub fn gaussian_fidelity(a: &StateParams, b: &StateParams) -> f64 {
    let va = covariance_from_params(a);
    let vb = covariance_from_params(b);
    let big = va.add(&vb).det();
    let small = (4.0 * (va.det() - 0.25) * (vb.det() - 0.25)).max(0.0);
    let f = 1.0 / ((big + small).sqrt() - small.sqrt());
    f.clamp(0.0, 1.0)
}

pub fn wigner_gaussian(p: &StateParams, x: f64, pq: f64) -> f64 {
    let v = covariance_from_params(p);
    (-0.5 * v.inverse_quadratic_form(x, pq)).exp() / (2.0 * PI * v.det().sqrt())
}

/// Density of homodyne outcomes at local-oscillator phase `phi`.
pub fn marginal_pdf(p: &StateParams, phi: f64, x: f64) -> f64 {
    let var = quadrature_variance(p, phi);
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ten_db() -> StateParams {
        StateParams::new(std::f64::consts::LN_10 / 2.0, 0.0, 0.0).unwrap()
    }

    fn three_five_db() -> StateParams {
        params_from_db(
            &DbLevels {
                squeezing_db: 3.0,
                antisqueezing_db: 5.0,
            },
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn theta_is_canonicalized() {
        let p = StateParams::new(0.3, PI + 0.25, 0.0).unwrap();
        assert!(close(p.theta(), 0.25, 1e-12));
        let q = StateParams::new(0.3, -1e-18, 0.0).unwrap();
        assert!(q.theta() >= 0.0 && q.theta() < PI);
        assert!(StateParams::new(-0.1, 0.0, 0.0).is_err());
        assert!(StateParams::new(0.1, 0.0, -0.1).is_err());
        assert!(StateParams::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let v = covariance_from_params(&StateParams::VACUUM);
        assert_eq!((v.xx, v.xp, v.pp), (0.5, 0.0, 0.5));

        let v = covariance_from_params(&StateParams::new(1.1513, 0.0, 0.0).unwrap());
        assert!(close(v.xx, 0.05, 1e-3) && close(v.pp, 5.0, 1e-3) && v.xp == 0.0);

        let v = covariance_from_params(&StateParams::new(0.0, 0.0, 1.0).unwrap());
        assert!(close(v.xx, 1.5, 1e-15) && close(v.pp, 1.5, 1e-15));
    }

    #[test]
    fn determinant_is_thermal_occupation_squared() {
        for &(r, t, n) in &[
            (0.0, 0.0, 0.0),
            (1.2, 0.7, 0.0),
            (0.4, 2.0, 0.3),
            (1.0, 1.0, 1.0),
        ] {
            let p = StateParams::new(r, t, n).unwrap();
            let det = covariance_from_params(&p).det();
            assert!(close(det, (n + 0.5) * (n + 0.5), 1e-12), "det {det}");
        }
    }

    #[test]
    fn quadrature_variance_examples() {
        for phi in [0.0, 0.3, 2.0] {
            assert!(close(
                quadrature_variance(&StateParams::VACUUM, phi),
                0.5,
                1e-15
            ));
        }
        let p = ten_db();
        assert!(close(quadrature_variance(&p, 0.0), 0.05, 1e-12));
        assert!(close(quadrature_variance(&p, PI / 2.0), 5.0, 1e-12));
    }

    #[test]
    fn quadrature_variance_bounded_and_pi_periodic() {
        let p = StateParams::new(0.8, 1.1, 0.2).unwrap();
        let (lo, hi) = principal_variances(&p);
        for k in 0..200 {
            let phi = -4.0 + 0.05 * k as f64;
            let v = quadrature_variance(&p, phi);
            assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        }
        assert!(close(quadrature_variance(&p, p.theta()), lo, 1e-12));
        assert!(close(
            quadrature_variance(&p, p.theta() + PI / 2.0),
            hi,
            1e-12
        ));
    }

    #[test]
    fn db_examples() {
        let d = db_from_params(&StateParams::VACUUM);
        assert_eq!((d.squeezing_db, d.antisqueezing_db), (0.0, 0.0));

        let d = db_from_params(&StateParams::new(1.1513, 0.0, 0.0).unwrap());
        assert!(close(d.squeezing_db, 10.0, 1e-3) && close(d.antisqueezing_db, 10.0, 1e-3));

        let d = db_from_params(&StateParams::new(0.4605, 0.0, 0.1295).unwrap());
        assert!(close(d.squeezing_db, 3.0, 1e-2) && close(d.antisqueezing_db, 5.0, 1e-2));
    }

    #[test]
    fn params_from_db_examples() {
        let p = params_from_db(
            &DbLevels {
                squeezing_db: 0.0,
                antisqueezing_db: 0.0,
            },
            0.0,
        )
        .unwrap();
        assert_eq!((p.r(), p.nbar()), (0.0, 0.0));

        let p = params_from_db(
            &DbLevels {
                squeezing_db: 10.0,
                antisqueezing_db: 10.0,
            },
            0.0,
        )
        .unwrap();
        assert!(close(p.r(), 1.1513, 1e-4) && p.nbar() == 0.0);

        let p = three_five_db();
        assert!(close(p.r(), 0.4605, 1e-3) && close(p.nbar(), 0.1295, 1e-3));

        let err = params_from_db(
            &DbLevels {
                squeezing_db: 5.0,
                antisqueezing_db: 3.0,
            },
            0.0,
        );
        assert!(matches!(err, Err(Error::Unphysical { .. })));
    }

    #[test]
    fn db_round_trip_grid() {
        for s in 0..=10 {
            for excess in 0..=3 {
                let d = DbLevels {
                    squeezing_db: s as f64,
                    antisqueezing_db: (s + excess) as f64,
                };
                let back = db_from_params(&params_from_db(&d, 0.4).unwrap());
                assert!(close(back.squeezing_db, d.squeezing_db, 1e-9));
                assert!(close(back.antisqueezing_db, d.antisqueezing_db, 1e-9));
            }
        }
    }

    #[test]
    fn photon_examples() {
        let n = photon_decomposition(&StateParams::VACUUM);
        assert_eq!((n.total, n.pure, n.env), (0.0, 0.0, 0.0));

        let n = photon_decomposition(&ten_db());
        assert!(close(n.total, 2.025, 1e-3) && close(n.pure, 2.025, 1e-3) && n.env == 0.0);

        let n = photon_decomposition(&StateParams::new(0.4605, 0.0, 0.1295).unwrap());
        assert!(close(n.total, 0.416, 2e-3));
        assert!(close(n.pure, 0.2275, 2e-3));
        assert!(close(n.env, 0.188, 2e-3));
    }

    #[test]
    fn fidelity_examples() {
        let vac = StateParams::VACUUM;
        assert!(close(gaussian_fidelity(&vac, &vac), 1.0, 1e-15));
        let thermal = StateParams::new(0.0, 0.0, 1.0).unwrap();
        assert!(close(gaussian_fidelity(&vac, &thermal), 0.5, 1e-12));
        let f = gaussian_fidelity(&vac, &ten_db());
        assert!(close(f, 0.575, 1e-3));
        assert!(close(f, 1.0 / ten_db().r().cosh(), 1e-12));
    }

    #[test]
    fn wigner_examples() {
        let vac = StateParams::VACUUM;
        assert!(close(wigner_gaussian(&vac, 0.0, 0.0), 1.0 / PI, 1e-12));
        assert!(close(
            wigner_gaussian(&vac, 1.0, 0.0),
            (-1.0f64).exp() / PI,
            1e-12
        ));
        assert!(close(wigner_gaussian(&vac, 1.0, 0.0), 0.11709, 1e-5));
    }

    fn wigner_grid_integral(p: &StateParams, half_width: f64, step: f64) -> f64 {
        let n = (2.0 * half_width / step).round() as usize;
        let mut total = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let x = -half_width + step * i as f64;
                let y = -half_width + step * j as f64;
                total += wigner_gaussian(p, x, y);
            }
        }
        total * step * step
    }

    #[test]
    fn wigner_integrates_to_one_on_fixed_window() {
        // [−6, 6]² holds all but 1e-3 of the mass while the anti-squeezed
        // variance stays below ~3 (e.g. the (3, 5) dB state)
        let states = [
            StateParams::VACUUM,
            three_five_db(),
            StateParams::new(0.3, 2.0, 1.0).unwrap(),
            StateParams::new(0.6, 0.4, 0.2).unwrap(),
        ];
        for p in &states {
            let total = wigner_grid_integral(p, 6.0, 0.05);
            assert!(close(total, 1.0, 1e-3), "integral {total} for {p:?}");
        }
    }

    #[test]
    fn wigner_integrates_to_one_across_regime() {
        // strongly anti-squeezed states need a window scaled to their width
        for &(r, t, n) in &[(1.2, 0.4, 0.0), (1.2, 1.3, 1.0), (1.1, 2.9, 0.3)] {
            let p = StateParams::new(r, t, n).unwrap();
            let sigma_max = ((n + 0.5) * (2.0 * r).exp()).sqrt();
            let total = wigner_grid_integral(&p, 6.0 * sigma_max, 0.05);
            assert!(close(total, 1.0, 1e-3), "integral {total} for r={r} n={n}");
        }
    }

    #[test]
    fn marginal_examples() {
        assert!(close(
            marginal_pdf(&StateParams::VACUUM, 1.3, 0.0),
            0.56419,
            1e-5
        ));
        assert!(close(marginal_pdf(&ten_db(), 0.0, 0.0), 1.78412, 1e-5));
    }
}
