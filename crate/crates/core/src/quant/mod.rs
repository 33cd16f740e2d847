//! INT8 post-training quantization and the integer interpreter.
//!
//! Conventions shared by every path:
//! * rounding is half-away-from-zero, saturating to [−128, 127];
//! * weights are symmetric per tensor, code = round(x·127/max|x|),
//!   scale = max|x|/127 (scale 1 and all-zero codes for an all-zero tensor);
//! * activations are affine per tensor over a range widened to contain 0,
//!   scale = (max − min)/255, zero point = round(−min/scale) − 128,
//!   code = round(x/scale) + zero point;
//! * a conv/dense accumulator is
//!   acc = bias_q + Σ w_q·(x_q − zp_x) in i32, with
//!   bias_q = round(b/(s_w·s_x));
//! * requantization multiplies by the real ratio s_w·s_x/s_out, stored as
//!   M ∈ [2³⁰, 2³¹) and a signed shift s with ratio = M·2^(−31−s). The i64
//!   product acc·M is shifted right by 31 + s with a single
//!   round-half-away step, then the output zero point is added and the
//!   result saturated;
//! * the final parametric layer keeps its i32 accumulator, which is
//!   dequantized as acc·s_w·s_x for the float head.

mod calib;
mod fake;
mod format;
mod qmodel;

pub use calib::{collect_calibration_stats, CalibMethod, CalibStats, TensorStats};
pub use fake::{fake_quant_forward, fake_quant_trace};
pub use format::{load_qmodel, qmodel_to_bytes, save_qmodel, QMODEL_MAGIC, QMODEL_VERSION};
pub use qmodel::{quantize_model, Codes, OutputMode, QLayer, QWorkspace, QuantizedModel, Requant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i32,
}

impl QuantParams {
    pub fn quantize(&self, x: f64) -> i8 {
        saturate_i8((x / self.scale as f64).round() as i64 + self.zero_point as i64)
    }

    pub fn dequantize(&self, code: i8) -> f64 {
        (code as i32 - self.zero_point) as f64 * self.scale as f64
    }

    /// Representable real interval.
    pub fn range(&self) -> (f64, f64) {
        (self.dequantize(-128), self.dequantize(127))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Zero point 0, for weights.
    Symmetric,
    /// Full 8-bit range over [min, max] ∪ {0}, for activations.
    Affine,
}

pub fn saturate_i8(v: i64) -> i8 {
    v.clamp(-128, 127) as i8
}

pub fn saturate_i32(v: i64) -> i32 {
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

/// Symmetric weight parameters and codes.
pub fn quantize_symmetric(values: &[f32]) -> Result<(Vec<i8>, QuantParams)> {
    check_finite(values)?;
    let max = values.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
    if max == 0.0 {
        return Ok((
            vec![0; values.len()],
            QuantParams {
                scale: 1.0,
                zero_point: 0,
            },
        ));
    }
    let codes = values
        .iter()
        .map(|&v| saturate_i8((v as f64 * 127.0 / max).round() as i64))
        .collect();
    Ok((
        codes,
        QuantParams {
            scale: (max / 127.0) as f32,
            zero_point: 0,
        },
    ))
}

/// Affine activation parameters for an observed range.
pub fn affine_params(min: f64, max: f64) -> Result<QuantParams> {
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(Error::Quantization(format!(
            "invalid activation range [{min}, {max}]"
        )));
    }
    let (lo, hi) = (min.min(0.0), max.max(0.0));
    let scale = ((hi - lo) / 255.0) as f32;
    if !(scale > 0.0) || !scale.is_finite() {
        // degenerate all-zero range; any positive scale represents it exactly
        return Ok(QuantParams {
            scale: 1.0,
            zero_point: -128,
        });
    }
    let zp = (-lo / scale as f64).round() as i64 - 128;
    Ok(QuantParams {
        scale,
        zero_point: zp.clamp(-128, 127) as i32,
    })
}

pub fn quantize_tensor(values: &[f32], mode: QuantMode) -> Result<(Vec<i8>, QuantParams)> {
    match mode {
        QuantMode::Symmetric => quantize_symmetric(values),
        QuantMode::Affine => {
            check_finite(values)?;
            let (min, max) = values.iter().fold((0.0f64, 0.0f64), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            });
            let params = affine_params(min, max)?;
            Ok((
                values.iter().map(|&v| params.quantize(v as f64)).collect(),
                params,
            ))
        }
    }
}

fn check_finite(values: &[f32]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("tensor to quantize"))
    }
}

/// Fixed-point form (M, s) of a positive ratio: ratio = M·2^(−31−s) with
/// M ∈ [2³⁰, 2³¹).
pub fn quantize_multiplier(ratio: f64) -> Result<(i32, i8)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Quantization(format!(
            "requantization ratio {ratio} must be positive"
        )));
    }
    // ratio = f·2^e with f ∈ [0.5, 1)
    let mut e = ratio.log2().floor() as i32 + 1;
    let mut f = ratio / 2f64.powi(e);
    if f >= 1.0 {
        f /= 2.0;
        e += 1;
    } else if f < 0.5 {
        f *= 2.0;
        e -= 1;
    }
    let mut m = (f * 2f64.powi(31)).round() as i64;
    if m == 1i64 << 31 {
        m = 1 << 30;
        e += 1;
    }
    let s = -e;
    if !(-31..=31).contains(&s) {
        return Err(Error::Quantization(format!(
            "requantization ratio {ratio} out of range"
        )));
    }
    Ok((m as i32, s as i8))
}

/// Value represented by (M, s).
pub fn multiplier_value(m: i32, s: i8) -> f64 {
    m as f64 * 2f64.powi(-31 - s as i32)
}

/// Arithmetic right shift by `n` with round-half-away-from-zero.
pub fn rounding_shift(v: i64, n: u32) -> i64 {
    if n == 0 {
        return v;
    }
    if n >= 63 {
        return 0;
    }
    let half = 1i64 << (n - 1);
    if v >= 0 {
        (v + half) >> n
    } else {
        -((-v + half) >> n)
    }
}

/// saturate(round_half_away(acc·M / 2^(31+s)) + zero_point).
pub fn requantize(acc: i32, m: i32, s: i8, zero_point: i32) -> i8 {
    let shift = (31 + s as i32).max(0) as u32;
    let scaled = rounding_shift(acc as i64 * m as i64, shift);
    saturate_i8(scaled + zero_point as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_example() {
        let (codes, p) = quantize_tensor(&[-0.08, 0.04, 0.08, 0.0], QuantMode::Symmetric).unwrap();
        assert!((p.scale as f64 - 6.2992e-4).abs() < 1e-8);
        assert_eq!(p.zero_point, 0);
        assert_eq!(codes, vec![-127, 64, 127, 0]);
    }

    #[test]
    fn affine_example() {
        let p = affine_params(0.0, 2.55).unwrap();
        assert!((p.scale - 0.01).abs() < 1e-9);
        assert_eq!(p.zero_point, -128);
        assert_eq!(p.quantize(1.0), -28);
    }

    #[test]
    fn all_zero_tensor() {
        let (codes, p) = quantize_tensor(&[0.0; 5], QuantMode::Symmetric).unwrap();
        assert_eq!(codes, vec![0; 5]);
        assert_eq!(p.scale, 1.0);
        let (codes, p) = quantize_tensor(&[0.0; 5], QuantMode::Affine).unwrap();
        assert!(codes.iter().all(|&c| p.dequantize(c) == 0.0));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(quantize_tensor(&[1.0, f32::NAN], QuantMode::Affine).is_err());
        assert!(quantize_tensor(&[f32::INFINITY], QuantMode::Symmetric).is_err());
    }

    #[test]
    fn multiplier_examples() {
        assert_eq!(quantize_multiplier(0.5).unwrap(), (1 << 30, 0));
        let (m, s) = quantize_multiplier(1.0).unwrap();
        assert_eq!((m, s), (1 << 30, -1));
        assert!((multiplier_value(m, s) - 1.0).abs() < 2f64.powi(-24));
        assert_eq!(quantize_multiplier(0.25).unwrap(), (1 << 30, 1));
        assert!(quantize_multiplier(0.0).is_err());
    }

    #[test]
    fn multiplier_normalized_and_accurate() {
        let mut r = 1.234e-5;
        while r < 40.0 {
            let (m, s) = quantize_multiplier(r).unwrap();
            assert!((1 << 30..=i32::MAX).contains(&m), "{r}: M = {m}");
            assert!(((multiplier_value(m, s) - r) / r).abs() < 2f64.powi(-24));
            r *= 1.37;
        }
        // ratios that round up to a full 2³¹ mantissa renormalize
        let (m, s) = quantize_multiplier(1.0 - 1e-12).unwrap();
        assert_eq!((m, s), (1 << 30, -1));
    }

    #[test]
    fn requantize_examples() {
        let half = quantize_multiplier(0.5).unwrap();
        let quarter = quantize_multiplier(0.25).unwrap();
        assert_eq!(requantize(0, half.0, half.1, 7), 7);
        assert_eq!(requantize(1000, half.0, half.1, 0), 127);
        assert_eq!(requantize(100, quarter.0, quarter.1, -10), 15);
        // half-away rounding on both signs: ±5 · 0.5 = ±2.5
        assert_eq!(requantize(5, half.0, half.1, 0), 3);
        assert_eq!(requantize(-5, half.0, half.1, 0), -3);
    }

    #[test]
    fn rounding_shift_matches_float_rounding() {
        for v in -1000i64..1000 {
            for n in 0..6 {
                let want = (v as f64 / (1u64 << n) as f64).round() as i64;
                assert_eq!(rounding_shift(v, n), want, "{v} >> {n}");
            }
        }
    }
}
