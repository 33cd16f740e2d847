//! Float simulation of the quantized graph.
//!
//! Every tensor is carried as dequantized f64 values and pushed through the
//! float kernels. Accumulators are recovered as round(y/(s_w·s_x)), which is
//! exact while the f64 rounding error stays far below one code, and then go
//! through the shared requantization rule. This is the reference the integer
//! interpreter must match code for code.

use super::qmodel::{Codes, OutputMode};
use super::{quantize_model, requantize, saturate_i32, CalibStats};
use crate::error::Result;
use crate::nn::kernels::{dot, im2col};
use crate::nn::{decode_head, head_from_raw, LayerSpec, Model, HEAD_OUTPUTS};
use crate::StateParams;

/// Per-tensor codes of the simulated forward pass (input first).
pub fn fake_quant_trace(model: &Model, stats: &CalibStats, seq: &[f32]) -> Result<Vec<Codes>> {
    Ok(simulate(model, stats, seq)?.0)
}

pub fn fake_quant_forward(model: &Model, stats: &CalibStats, seq: &[f32]) -> Result<StateParams> {
    decode_head(&simulate(model, stats, seq)?.1)
}

fn simulate(
    model: &Model,
    stats: &CalibStats,
    seq: &[f32],
) -> Result<(Vec<Codes>, [f64; HEAD_OUTPUTS])> {
    let qm = quantize_model(model, stats)?;
    let mut codes = vec![0i8; qm.input_numel()];
    qm.quantize_input(seq, &mut codes)?;
    let p0 = qm.input_params();
    let mut x: Vec<f64> = codes.iter().map(|&c| p0.dequantize(c)).collect();
    let mut trace = vec![Codes::I8(codes)];
    let mut x_params = Some(p0);
    let mut acc_scale = 1.0;

    for l in qm.layers() {
        let y: Vec<f64> = match l.spec {
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
            } => {
                let in_len = x.len() / in_ch;
                let out_len = (in_len - kernel) / stride + 1;
                let row = in_ch * kernel;
                let mut cols = vec![0.0; out_len * row];
                im2col(&x, in_ch, in_len, kernel, stride, &mut cols);
                let (w, b) = dequantized(l, x_params.expect("conv reads i8").scale);
                let mut y = vec![0.0; out_ch * out_len];
                for o in 0..out_ch {
                    for t in 0..out_len {
                        y[o * out_len + t] =
                            b[o] + dot(&w[o * row..(o + 1) * row], &cols[t * row..(t + 1) * row]);
                    }
                }
                y
            }
            LayerSpec::Dense { inputs, outputs } => {
                let (w, b) = dequantized(l, x_params.expect("dense reads i8").scale);
                (0..outputs)
                    .map(|o| b[o] + dot(&w[o * inputs..(o + 1) * inputs], &x))
                    .collect()
            }
            LayerSpec::Relu | LayerSpec::Flatten => {
                let y: Vec<f64> = if l.spec == LayerSpec::Relu {
                    x.iter().map(|&v| v.max(0.0)).collect()
                } else {
                    x.clone()
                };
                // Re-quantize in the unchanged representation.
                let codes = match x_params {
                    Some(p) => {
                        let c: Vec<i8> = y.iter().map(|&v| p.quantize(v)).collect();
                        x = c.iter().map(|&c| p.dequantize(c)).collect();
                        Codes::I8(c)
                    }
                    None => {
                        let c: Vec<i32> = y
                            .iter()
                            .map(|&v| saturate_i32((v / acc_scale).round() as i64))
                            .collect();
                        x = c.iter().map(|&a| a as f64 * acc_scale).collect();
                        Codes::I32(c)
                    }
                };
                trace.push(codes);
                continue;
            }
        };

        let sx = x_params.expect("parametric layers read i8").scale as f64;
        acc_scale = l.weight_params.scale as f64 * sx;
        let accs: Vec<i32> = y
            .iter()
            .map(|&v| saturate_i32((v / acc_scale).round() as i64))
            .collect();
        match l.output {
            OutputMode::Requant(r) => {
                let c: Vec<i8> = accs
                    .iter()
                    .map(|&a| requantize(a, r.multiplier, r.shift, r.output.zero_point))
                    .collect();
                x = c.iter().map(|&c| r.output.dequantize(c)).collect();
                x_params = Some(r.output);
                trace.push(Codes::I8(c));
            }
            OutputMode::Raw | OutputMode::Passthrough => {
                x = accs.iter().map(|&a| a as f64 * acc_scale).collect();
                x_params = None;
                trace.push(Codes::I32(accs));
            }
        }
    }
    let mut raw = [0.0; HEAD_OUTPUTS];
    raw.copy_from_slice(&x[..HEAD_OUTPUTS]);
    Ok((trace, head_from_raw(raw)))
}

/// Dequantized weights and biases of a parametric layer.
fn dequantized(l: &super::QLayer, sx: f32) -> (Vec<f64>, Vec<f64>) {
    let sw = l.weight_params.scale as f64;
    let w = l.weight.iter().map(|&c| c as f64 * sw).collect();
    let b = l.bias.iter().map(|&c| c as f64 * sw * sx as f64).collect();
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, Network};
    use crate::quant::{collect_calibration_stats, CalibMethod};

    fn tiny() -> Model {
        let specs = [
            LayerSpec::Conv1d {
                in_ch: 2,
                out_ch: 3,
                kernel: 4,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 9,
                outputs: 4,
            },
        ];
        Network::init(2, 8, &specs, 11).unwrap()
    }

    fn tiny_dataset(n: usize) -> crate::datagen::Dataset {
        let mut ds = crate::datagen::Dataset::new(16, 0).unwrap();
        for k in 0..n {
            ds.push(crate::datagen::LabeledExample {
                params: StateParams::VACUUM,
                sequence: crate::datagen::QuadratureSequence {
                    values: (0..16)
                        .map(|i| ((i * 7 + k * 3) as f32 * 0.37).sin())
                        .collect(),
                    schedule_id: 0,
                },
            })
            .unwrap();
        }
        ds
    }

    #[test]
    fn deterministic() {
        let m = tiny();
        let ds = tiny_dataset(5);
        let s = collect_calibration_stats(&m, &ds, CalibMethod::MinMax).unwrap();
        let a = fake_quant_trace(&m, &s, ds.sequence(1)).unwrap();
        assert_eq!(a, fake_quant_trace(&m, &s, ds.sequence(1)).unwrap());
    }

    #[test]
    fn approaches_float_with_fine_scales() {
        // Small weights and tight ranges give fine scales; the simulated head
        // should sit close to the float head.
        let m = tiny();
        let layers: Vec<Layer<f32>> = m.layers().to_vec();
        let m = Model::new(2, 8, 0.0, 1.0, layers).unwrap();
        let ds = tiny_dataset(20);
        let s = collect_calibration_stats(&m, &ds, CalibMethod::MinMax).unwrap();
        let mut ws = crate::nn::Workspace::new(&m);
        for i in 0..ds.len() {
            let f = m.forward_with(ds.sequence(i), &mut ws).unwrap();
            let (_, q) = simulate(&m, &s, ds.sequence(i)).unwrap();
            for (a, b) in f.iter().zip(&q) {
                assert!((a - b).abs() < 0.05, "{f:?} vs {q:?}");
            }
        }
    }
}
