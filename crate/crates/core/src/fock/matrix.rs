//! Dense complex matrices and the matrix exponential.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Square complex matrix over the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Self {
        assert!(
            m.is_square() && m.nrows() > 0,
            "ComplexMatrix must be square and nonempty"
        );
        ComplexMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.0[(row, col)] = value;
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(&self.0 * &other.0)
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Largest element-wise modulus of `self − other` over the leading
    /// `block × block` corner.
    pub fn max_abs_diff_block(&self, other: &ComplexMatrix, block: usize) -> f64 {
        let block = block.min(self.dim()).min(other.dim());
        let mut worst = 0.0f64;
        for i in 0..block {
            for j in 0..block {
                worst = worst.max((self.0[(i, j)] - other.0[(i, j)]).norm());
            }
        }
        worst
    }

    pub fn one_norm(&self) -> f64 {
        one_norm(&self.0)
    }

    /// exp(self) by scaling and squaring with a degree-13 Padé kernel.
    pub fn exp(&self) -> Self {
        ComplexMatrix(expm(&self.0))
    }
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé(13) coefficients b_0..b_13 and the 1-norm bound below which the
// approximant meets double precision without scaling.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(2f64.powi(-squarings), 0.0);

    let c = |k: usize| Complex64::new(PADE13[k], 0.0);
    let eye = DMatrix::<Complex64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * c(13) + &a4 * c(11) + &a2 * c(9);
    let u_inner = &a6 * &u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &eye * c(1);
    let u = &scaled * u_inner;

    let v_inner = &a6 * c(12) + &a4 * c(10) + &a2 * c(8);
    let v = &a6 * &v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &eye * c(0);

    let numerator = &v + &u;
    let denominator = &v - &u;
    let mut result = denominator
        .lu()
        .solve(&numerator)
        .expect("Padé denominator is nonsingular for scaled arguments");

    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_zero_is_identity() {
        let z = ComplexMatrix::zeros(5);
        assert_eq!(
            z.exp().max_abs_diff_block(&ComplexMatrix::identity(5), 5),
            0.0
        );
    }

    #[test]
    fn exp_of_diagonal_matches_scalar_exp() {
        let mut m = ComplexMatrix::zeros(3);
        let vals = [
            Complex64::new(0.3, 1.0),
            Complex64::new(-2.0, 0.5),
            Complex64::new(4.0, -3.0),
        ];
        for (i, v) in vals.iter().enumerate() {
            m.set(i, i, *v);
        }
        let e = m.exp();
        for (i, v) in vals.iter().enumerate() {
            let want = v.exp();
            assert!((e.get(i, i) - want).norm() <= 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn exp_of_rotation_generator() {
        // exp([[0, -t], [t, 0]]) = [[cos t, -sin t], [sin t, cos t]], scaled well past θ13
        let t = 40.0f64;
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 1, Complex64::new(-t, 0.0));
        m.set(1, 0, Complex64::new(t, 0.0));
        let e = m.exp();
        assert!((e.get(0, 0).re - t.cos()).abs() < 1e-11);
        assert!((e.get(1, 0).re - t.sin()).abs() < 1e-11);
        assert!(e.get(0, 1).im.abs() < 1e-11);
    }
}
