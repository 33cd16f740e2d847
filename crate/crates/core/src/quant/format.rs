//! `.qnq` quantized model files.
//!
//! Little-endian: magic "QNNQ", u32 version, f64 mean, f64 scale, u32 input
//! channels, u32 input length, input QuantParams (f32 scale, i32 zero
//! point), u32 layer count. Per layer the `.qnn` tag and hyperparameters;
//! parametric layers then store weight QuantParams, i8 weights, i32 biases,
//! a u8 output mode (1 requantize, 2 raw accumulator) and, for mode 1, the
//! output QuantParams, i32 M and the shift s as the u8 bit pattern of an i8.
//! A CRC-32 of all preceding bytes closes the file.

use std::path::Path;

use super::qmodel::{OutputMode, QLayer, QuantizedModel, Requant};
use super::QuantParams;
use crate::binio::{read_checked, write_with_crc, LeReader, LeWriter};
use crate::error::{Error, Result};
use crate::nn::{read_spec, write_spec};

pub const QMODEL_MAGIC: [u8; 4] = *b"QNNQ";
pub const QMODEL_VERSION: u32 = 1;

const MODE_REQUANT: u8 = 1;
const MODE_RAW: u8 = 2;

fn write_params(w: &mut LeWriter, p: &QuantParams) {
    w.f32(p.scale);
    w.i32(p.zero_point);
}

fn read_params<R: std::io::Read>(r: &mut LeReader<R>, what: &str) -> Result<QuantParams> {
    Ok(QuantParams {
        scale: r.f32(what)?,
        zero_point: r.i32(what)?,
    })
}

pub fn qmodel_to_bytes(qm: &QuantizedModel) -> Vec<u8> {
    let mut w = LeWriter::default();
    w.bytes(&QMODEL_MAGIC);
    w.u32(QMODEL_VERSION);
    let (mean, scale) = qm.normalization();
    w.f64(mean);
    w.f64(scale);
    w.u32(qm.input_channels as u32);
    w.u32(qm.input_len as u32);
    write_params(&mut w, &qm.input_params);
    w.u32(qm.layers.len() as u32);
    for l in &qm.layers {
        write_spec(&mut w, &l.spec);
        if !l.spec.is_parametric() {
            continue;
        }
        write_params(&mut w, &l.weight_params);
        w.bytes(&l.weight.iter().map(|&c| c as u8).collect::<Vec<_>>());
        for &b in &l.bias {
            w.i32(b);
        }
        match l.output {
            OutputMode::Requant(r) => {
                w.u8(MODE_REQUANT);
                write_params(&mut w, &r.output);
                w.i32(r.multiplier);
                w.u8(r.shift as u8);
            }
            OutputMode::Raw => w.u8(MODE_RAW),
            OutputMode::Passthrough => unreachable!("parametric layers never pass through"),
        }
    }
    w.buf
}

pub fn save_qmodel(qm: &QuantizedModel, path: &Path) -> Result<()> {
    write_with_crc(path, qmodel_to_bytes(qm))
}

pub fn load_qmodel(path: &Path) -> Result<QuantizedModel> {
    read_checked(path, QMODEL_MAGIC, QMODEL_VERSION, |r| {
        let mean = r.f64("normalization mean")?;
        let scale = r.f64("normalization scale")?;
        let in_ch = crate::nn::read_dim(r, "input channels")?;
        let in_len = crate::nn::read_dim(r, "input length")?;
        let input_params = read_params(r, "input quantization")?;
        let count = r.u32("layer count")? as usize;
        let mut layers = Vec::new();
        for i in 0..count {
            let spec = read_spec(r, i)?;
            if !spec.is_parametric() {
                layers.push(QLayer {
                    spec,
                    weight: Vec::new(),
                    weight_params: QuantParams {
                        scale: 1.0,
                        zero_point: 0,
                    },
                    bias: Vec::new(),
                    output: OutputMode::Passthrough,
                });
                continue;
            }
            let weight_params = read_params(r, "weight quantization")?;
            let weight = r.i8_vec(spec.weight_len(), "weights")?;
            let bias = r.i32_vec(spec.bias_len(), "biases")?;
            let output = match r.u8("output mode")? {
                MODE_REQUANT => OutputMode::Requant(Requant {
                    output: read_params(r, "output quantization")?,
                    multiplier: r.i32("multiplier")?,
                    shift: r.u8("shift")? as i8,
                }),
                MODE_RAW => OutputMode::Raw,
                m => {
                    return Err(Error::Corrupt(format!(
                        "layer {i} has unknown output mode {m}"
                    )))
                }
            };
            layers.push(QLayer {
                spec,
                weight,
                weight_params,
                bias,
                output,
            });
        }
        QuantizedModel::new(in_ch, in_len, mean, scale, input_params, layers)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig};
    use crate::nn::{model_init, save_model, DEFAULT_ARCH};
    use crate::quant::{collect_calibration_stats, quantize_model, CalibMethod, QWorkspace};

    fn saved() -> (
        tempfile::TempDir,
        std::path::PathBuf,
        QuantizedModel,
        Vec<f32>,
    ) {
        let m = model_init(DEFAULT_ARCH, 9).unwrap();
        let ds = generate_dataset(&GenConfig {
            n_examples: 4,
            global_seed: 2,
            ..GenConfig::default()
        })
        .unwrap();
        let s = collect_calibration_stats(&m, &ds, CalibMethod::MinMax).unwrap();
        let qm = quantize_model(&m, &s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qnq");
        save_qmodel(&qm, &path).unwrap();
        (dir, path, qm, ds.sequence(3).to_vec())
    }

    #[test]
    fn round_trip_preserves_outputs() {
        let (_d, path, qm, seq) = saved();
        let back = load_qmodel(&path).unwrap();
        assert_eq!(back, qm);
        assert_eq!(qmodel_to_bytes(&back), qmodel_to_bytes(&qm));
        let mut ws = QWorkspace::new(&qm);
        let a = qm.qforward_with(&seq, &mut ws).unwrap();
        let b = back.qforward_with(&seq, &mut ws).unwrap();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let (_d, path, _, _) = saved();
        let raw = std::fs::read(&path).unwrap();
        for pos in [12, 40, raw.len() / 3, raw.len() - 3] {
            let mut bad = raw.clone();
            bad[pos] ^= 0x01;
            std::fs::write(&path, &bad).unwrap();
            assert!(
                matches!(load_qmodel(&path), Err(Error::Checksum { .. })),
                "pos {pos}"
            );
        }
    }

    #[test]
    fn truncation_detected() {
        let (_d, path, _, _) = saved();
        let raw = std::fs::read(&path).unwrap();
        for cut in [6, 30, raw.len() / 2, raw.len() - 1] {
            std::fs::write(&path, &raw[..cut]).unwrap();
            assert!(
                matches!(load_qmodel(&path), Err(Error::Truncated(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn float_model_is_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qnn");
        save_model(&model_init(DEFAULT_ARCH, 1).unwrap(), &path).unwrap();
        assert!(matches!(load_qmodel(&path), Err(Error::BadMagic { .. })));
    }
}
