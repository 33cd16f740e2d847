//! `.qnn` model files.
//!
//! Little-endian: magic "QNNM", u32 version, f64 mean, f64 scale, u32 input
//! channels, u32 input length, u32 layer count; per layer a u8 tag
//! (1 conv, 2 dense, 3 relu, 4 flatten), its u32 hyperparameters
//! (conv: in_ch, out_ch, kernel, stride; dense: inputs, outputs), then the
//! f32 weight and bias blobs. A CRC-32 of all preceding bytes closes the file.

use std::path::Path;

use super::model::{Layer, LayerSpec, Model};
use crate::binio::{read_checked, write_with_crc, LeReader, LeWriter};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"QNNM";
pub const MODEL_VERSION: u32 = 1;

pub(crate) const TAG_CONV: u8 = 1;
pub(crate) const TAG_DENSE: u8 = 2;
pub(crate) const TAG_RELU: u8 = 3;
pub(crate) const TAG_FLATTEN: u8 = 4;

/// Upper bound on any single dimension read from disk.
const MAX_DIM: u32 = 1 << 24;

pub(crate) fn write_spec(w: &mut LeWriter, spec: &LayerSpec) {
    match *spec {
        LayerSpec::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
        } => {
            w.u8(TAG_CONV);
            for v in [in_ch, out_ch, kernel, stride] {
                w.u32(v as u32);
            }
        }
        LayerSpec::Dense { inputs, outputs } => {
            w.u8(TAG_DENSE);
            w.u32(inputs as u32);
            w.u32(outputs as u32);
        }
        LayerSpec::Relu => w.u8(TAG_RELU),
        LayerSpec::Flatten => w.u8(TAG_FLATTEN),
    }
}

pub(crate) fn read_dim<R: std::io::Read>(r: &mut LeReader<R>, what: &str) -> Result<usize> {
    let v = r.u32(what)?;
    if v == 0 || v > MAX_DIM {
        return Err(Error::Corrupt(format!("{what} = {v} out of range")));
    }
    Ok(v as usize)
}

pub(crate) fn read_spec<R: std::io::Read>(r: &mut LeReader<R>, index: usize) -> Result<LayerSpec> {
    let what = format!("layer {index}");
    let spec = match r.u8(&what)? {
        TAG_CONV => LayerSpec::Conv1d {
            in_ch: read_dim(r, &what)?,
            out_ch: read_dim(r, &what)?,
            kernel: read_dim(r, &what)?,
            stride: read_dim(r, &what)?,
        },
        TAG_DENSE => LayerSpec::Dense {
            inputs: read_dim(r, &what)?,
            outputs: read_dim(r, &what)?,
        },
        TAG_RELU => LayerSpec::Relu,
        TAG_FLATTEN => LayerSpec::Flatten,
        tag => {
            return Err(Error::Corrupt(format!(
                "layer {index} has unknown tag {tag}"
            )))
        }
    };
    if let LayerSpec::Conv1d {
        in_ch,
        out_ch,
        kernel,
        ..
    } = spec
    {
        if (in_ch as u64) * (out_ch as u64) * (kernel as u64) > MAX_DIM as u64 * 16 {
            return Err(Error::Corrupt(format!(
                "layer {index} is implausibly large"
            )));
        }
    }
    if let LayerSpec::Dense { inputs, outputs } = spec {
        if (inputs as u64) * (outputs as u64) > MAX_DIM as u64 * 16 {
            return Err(Error::Corrupt(format!(
                "layer {index} is implausibly large"
            )));
        }
    }
    Ok(spec)
}

pub fn model_to_bytes(m: &Model) -> Vec<u8> {
    let mut w = LeWriter::default();
    w.bytes(&MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    let (mean, scale) = m.normalization();
    w.f64(mean);
    w.f64(scale);
    w.u32(m.input_channels() as u32);
    w.u32(m.input_len() as u32);
    w.u32(m.layers().len() as u32);
    for l in m.layers() {
        write_spec(&mut w, &l.spec);
        w.f32_slice(&l.weight);
        w.f32_slice(&l.bias);
    }
    w.buf
}

pub fn save_model(m: &Model, path: &Path) -> Result<()> {
    write_with_crc(path, model_to_bytes(m))
}

pub fn load_model(path: &Path) -> Result<Model> {
    read_checked(path, MODEL_MAGIC, MODEL_VERSION, |r| {
        let mean = r.f64("normalization mean")?;
        let scale = r.f64("normalization scale")?;
        let in_ch = read_dim(r, "input channels")?;
        let in_len = read_dim(r, "input length")?;
        let count = r.u32("layer count")? as usize;
        let mut layers = Vec::new();
        for i in 0..count {
            let spec = read_spec(r, i)?;
            let weight = r.f32_vec(spec.weight_len(), "weights")?;
            let bias = r.f32_vec(spec.bias_len(), "biases")?;
            if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(Error::Corrupt(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
            layers.push(Layer { spec, weight, bias });
        }
        Model::new(in_ch, in_len, mean, scale, layers)
    })
}
