//! Quantized model graph and the integer interpreter.

use super::{
    affine_params, quantize_multiplier, quantize_symmetric, requantize, saturate_i32, CalibStats,
    QuantParams,
};
use crate::error::{Error, Result};
use crate::nn::{decode_head, head_from_raw, shape_walk, LayerSpec, Model, Shape, HEAD_OUTPUTS};
use crate::StateParams;

/// Fixed-point requantization into an i8 output tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Requant {
    pub output: QuantParams,
    pub multiplier: i32,
    pub shift: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMode {
    /// Non-parametric layers keep the input's representation.
    Passthrough,
    Requant(Requant),
    /// Keep the i32 accumulator; dequantized by s_w·s_x.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLayer {
    pub spec: LayerSpec,
    pub weight: Vec<i8>,
    pub weight_params: QuantParams,
    pub bias: Vec<i32>,
    pub output: OutputMode,
}

/// Codes of one activation tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Codes {
    I8(Vec<i8>),
    I32(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub(crate) input_channels: usize,
    pub(crate) input_len: usize,
    pub(crate) mean: f64,
    pub(crate) scale: f64,
    pub(crate) input_params: QuantParams,
    pub(crate) layers: Vec<QLayer>,
    shapes: Vec<Shape>,
    /// Per tensor: Some(params) for i8 tensors, None for raw i32 tensors.
    tensor_params: Vec<Option<QuantParams>>,
    /// Raw-tensor dequantization scale s_w·s_x.
    raw_scale: f64,
    /// Weights widened once for the i16 dot products.
    wide: Vec<Vec<i16>>,
}

const SHIFT_RANGE: std::ops::RangeInclusive<i8> = -31..=31;

fn check_params(p: &QuantParams, what: &str) -> Result<()> {
    if !(p.scale.is_finite() && p.scale > 0.0) || !(-128..=127).contains(&p.zero_point) {
        return Err(Error::Quantization(format!(
            "{what}: invalid quantization parameters {p:?}"
        )));
    }
    Ok(())
}

impl QuantizedModel {
    /// Validates the graph and derives the per-tensor representation.
    pub fn new(
        input_channels: usize,
        input_len: usize,
        mean: f64,
        scale: f64,
        input_params: QuantParams,
        layers: Vec<QLayer>,
    ) -> Result<Self> {
        if !(mean.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParam(format!(
                "normalization ({mean}, {scale})"
            )));
        }
        check_params(&input_params, "input")?;
        let input = Shape::Seq {
            channels: input_channels,
            len: input_len,
        };
        let shapes = shape_walk(input, layers.iter().map(|l| &l.spec))?;
        let last_param = layers
            .iter()
            .rposition(|l| l.spec.is_parametric())
            .ok_or_else(|| Error::Quantization("graph has no parametric layer".into()))?;

        let mut tensor_params = vec![Some(input_params)];
        let mut raw_scale = 1.0;
        for (i, l) in layers.iter().enumerate() {
            let what = format!("layer {i}");
            let x = tensor_params[i];
            let out = if l.spec.is_parametric() {
                if l.weight.len() != l.spec.weight_len() || l.bias.len() != l.spec.bias_len() {
                    return Err(Error::ShapeMismatch {
                        expected: format!(
                            "{what}: {} weights, {} biases",
                            l.spec.weight_len(),
                            l.spec.bias_len()
                        ),
                        got: format!("{} weights, {} biases", l.weight.len(), l.bias.len()),
                    });
                }
                check_params(&l.weight_params, &what)?;
                if l.weight_params.zero_point != 0 {
                    return Err(Error::Quantization(format!(
                        "{what}: weights must be symmetric"
                    )));
                }
                let sx = x.ok_or_else(|| {
                    Error::Quantization(format!("{what} reads a raw accumulator"))
                })?;
                match (l.output, i == last_param) {
                    (OutputMode::Raw, true) => {
                        raw_scale = l.weight_params.scale as f64 * sx.scale as f64;
                        None
                    }
                    (OutputMode::Requant(r), false) => {
                        check_params(&r.output, &what)?;
                        if !(1 << 30..=i32::MAX).contains(&r.multiplier)
                            || !SHIFT_RANGE.contains(&r.shift)
                        {
                            return Err(Error::Quantization(format!(
                                "{what}: multiplier ({}, {}) not normalized",
                                r.multiplier, r.shift
                            )));
                        }
                        Some(r.output)
                    }
                    _ => {
                        return Err(Error::Quantization(format!(
                            "{what}: only the final parametric layer keeps a raw accumulator"
                        )))
                    }
                }
            } else {
                if l.output != OutputMode::Passthrough || !l.weight.is_empty() || !l.bias.is_empty()
                {
                    return Err(Error::Quantization(format!("{what} carries parameters")));
                }
                x
            };
            tensor_params.push(out);
        }
        if tensor_params.last() != Some(&None) {
            return Err(Error::Quantization(
                "graph must end on the raw head accumulator".into(),
            ));
        }
        let wide = layers
            .iter()
            .map(|l| l.weight.iter().map(|&w| w as i16).collect())
            .collect();
        Ok(QuantizedModel {
            input_channels,
            input_len,
            mean,
            scale,
            input_params,
            layers,
            shapes,
            tensor_params,
            raw_scale,
            wide,
        })
    }

    pub fn input_numel(&self) -> usize {
        self.input_channels * self.input_len
    }

    pub fn normalization(&self) -> (f64, f64) {
        (self.mean, self.scale)
    }

    pub fn input_params(&self) -> QuantParams {
        self.input_params
    }

    pub fn layers(&self) -> &[QLayer] {
        &self.layers
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    /// Representation of tensor `i`; `None` for raw i32 accumulators.
    pub fn tensor_params(&self, i: usize) -> Option<QuantParams> {
        self.tensor_params[i]
    }

    /// Dequantization factor for the head accumulator.
    pub fn head_scale(&self) -> f64 {
        self.raw_scale
    }

    /// Normalizes and quantizes one input sequence.
    pub fn quantize_input(&self, seq: &[f32], out: &mut [i8]) -> Result<()> {
        if seq.len() != self.input_numel() {
            return Err(Error::DimensionMismatch {
                left: self.input_numel(),
                right: seq.len(),
            });
        }
        let inv = 1.0 / self.scale;
        for (o, &x) in out.iter_mut().zip(seq) {
            *o = self.input_params.quantize((x as f64 - self.mean) * inv);
        }
        Ok(())
    }

    fn run(&self, ws: &mut QWorkspace) -> [f64; HEAD_OUTPUTS] {
        for (i, l) in self.layers.iter().enumerate() {
            let x_zp = self.tensor_params[i].map_or(0, |p| p.zero_point) as i16;
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let (x, y) = (&before[i], &mut after[0]);
            match l.spec {
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                } => {
                    let x = x.as_i8();
                    let in_len = x.len() / in_ch;
                    let row = in_ch * kernel;
                    let cols = &mut ws.cols[i];
                    let out_len = cols.len() / row;
                    for t in 0..out_len {
                        let dst = &mut cols[t * row..(t + 1) * row];
                        for c in 0..in_ch {
                            let src = &x[c * in_len + t * stride..c * in_len + t * stride + kernel];
                            for (d, &s) in dst[c * kernel..(c + 1) * kernel].iter_mut().zip(src) {
                                *d = s as i16 - x_zp;
                            }
                        }
                    }
                    let w = &self.wide[i];
                    let mut emit = Emitter::new(l.output, y);
                    for o in 0..out_ch {
                        let wo = &w[o * row..(o + 1) * row];
                        for t in 0..out_len {
                            let acc = accumulate(l.bias[o], wo, &cols[t * row..(t + 1) * row]);
                            emit.put(o * out_len + t, acc);
                        }
                    }
                }
                LayerSpec::Dense { inputs, outputs } => {
                    let xs = &mut ws.cols[i];
                    for (d, &s) in xs.iter_mut().zip(x.as_i8()) {
                        *d = s as i16 - x_zp;
                    }
                    let w = &self.wide[i];
                    let mut emit = Emitter::new(l.output, y);
                    for o in 0..outputs {
                        emit.put(
                            o,
                            accumulate(l.bias[o], &w[o * inputs..(o + 1) * inputs], xs),
                        );
                    }
                }
                LayerSpec::Relu => match (x, y) {
                    (Buf::I8(x), Buf::I8(y)) => {
                        for (d, &s) in y.iter_mut().zip(x.iter()) {
                            *d = s.max(x_zp as i8);
                        }
                    }
                    (Buf::I32(x), Buf::I32(y)) => {
                        for (d, &s) in y.iter_mut().zip(x.iter()) {
                            *d = s.max(0);
                        }
                    }
                    _ => unreachable!("workspace mirrors tensor representations"),
                },
                LayerSpec::Flatten => match (x, y) {
                    (Buf::I8(x), Buf::I8(y)) => y.copy_from_slice(x),
                    (Buf::I32(x), Buf::I32(y)) => y.copy_from_slice(x),
                    _ => unreachable!("workspace mirrors tensor representations"),
                },
            }
        }
        let z = ws.acts.last().expect("workspace has tensors").as_i32();
        let mut raw = [0.0; HEAD_OUTPUTS];
        for (r, &a) in raw.iter_mut().zip(z) {
            *r = a as f64 * self.raw_scale;
        }
        head_from_raw(raw)
    }

    /// Integer forward pass returning the float head, without allocating.
    pub fn qforward_with(&self, seq: &[f32], ws: &mut QWorkspace) -> Result<[f64; HEAD_OUTPUTS]> {
        ws.check(self)?;
        let Buf::I8(x0) = &mut ws.acts[0] else {
            unreachable!("input tensor is i8")
        };
        self.quantize_input(seq, x0)?;
        Ok(self.run(ws))
    }

    pub fn qforward(&self, seq: &[f32]) -> Result<StateParams> {
        let mut ws = QWorkspace::new(self);
        decode_head(&self.qforward_with(seq, &mut ws)?)
    }

    /// Codes of every tensor (input first, head accumulator last).
    pub fn qforward_trace(&self, seq: &[f32]) -> Result<Vec<Codes>> {
        let mut ws = QWorkspace::new(self);
        self.qforward_with(seq, &mut ws)?;
        Ok(ws
            .acts
            .into_iter()
            .map(|b| match b {
                Buf::I8(v) => Codes::I8(v),
                Buf::I32(v) => Codes::I32(v),
            })
            .collect())
    }
}

fn accumulate(bias: i32, w: &[i16], x: &[i16]) -> i32 {
    // |w·x| ≤ 127·255 per term, so the i32 sum is exact for rows below 2^16 terms.
    let dot: i32 = w.iter().zip(x).map(|(&a, &b)| a as i32 * b as i32).sum();
    saturate_i32(bias as i64 + dot as i64)
}

/// Writes accumulators into an i8 (requantized) or i32 (raw) output.
struct Emitter<'a> {
    mode: OutputMode,
    out: &'a mut Buf,
}

impl<'a> Emitter<'a> {
    fn new(mode: OutputMode, out: &'a mut Buf) -> Self {
        Emitter { mode, out }
    }

    #[inline]
    fn put(&mut self, idx: usize, acc: i32) {
        match (self.mode, &mut *self.out) {
            (OutputMode::Requant(r), Buf::I8(y)) => {
                y[idx] = requantize(acc, r.multiplier, r.shift, r.output.zero_point)
            }
            (OutputMode::Raw, Buf::I32(y)) => y[idx] = acc,
            _ => unreachable!("workspace mirrors tensor representations"),
        }
    }
}

#[derive(Debug, Clone)]
enum Buf {
    I8(Vec<i8>),
    I32(Vec<i32>),
}

impl Buf {
    fn as_i8(&self) -> &[i8] {
        match self {
            Buf::I8(v) => v,
            Buf::I32(_) => unreachable!("parametric layers read i8 tensors"),
        }
    }

    fn as_i32(&self) -> &[i32] {
        match self {
            Buf::I32(v) => v,
            Buf::I8(_) => unreachable!("head tensor is raw"),
        }
    }

    fn len(&self) -> usize {
        match self {
            Buf::I8(v) => v.len(),
            Buf::I32(v) => v.len(),
        }
    }
}

/// Reusable buffers for [`QuantizedModel::qforward_with`].
#[derive(Debug, Clone)]
pub struct QWorkspace {
    acts: Vec<Buf>,
    cols: Vec<Vec<i16>>,
}

impl QWorkspace {
    pub fn new(qm: &QuantizedModel) -> Self {
        let acts = qm
            .shapes
            .iter()
            .zip(&qm.tensor_params)
            .map(|(s, p)| match p {
                Some(_) => Buf::I8(vec![0; s.numel()]),
                None => Buf::I32(vec![0; s.numel()]),
            })
            .collect();
        let cols = qm
            .layers
            .iter()
            .zip(qm.shapes.windows(2))
            .map(|(l, io)| match (l.spec, io[1]) {
                (LayerSpec::Conv1d { in_ch, kernel, .. }, Shape::Seq { len, .. }) => {
                    vec![0; len * in_ch * kernel]
                }
                (LayerSpec::Dense { inputs, .. }, _) => vec![0; inputs],
                _ => Vec::new(),
            })
            .collect();
        QWorkspace { acts, cols }
    }

    fn check(&self, qm: &QuantizedModel) -> Result<()> {
        let ok = self.acts.len() == qm.shapes.len()
            && self
                .acts
                .iter()
                .zip(qm.shapes.iter().zip(&qm.tensor_params))
                .all(|(b, (s, p))| {
                    b.len() == s.numel()
                        && matches!((b, p), (Buf::I8(_), Some(_)) | (Buf::I32(_), None))
                });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: "workspace built for this quantized model".into(),
                got: "workspace for a different graph".into(),
            })
        }
    }
}

/// Post-training quantization of `model` with activation ranges from `stats`.
///
/// A conv/dense layer followed by a ReLU requantizes straight into the ReLU
/// output range; the ReLU then only clamps at the zero point.
pub fn quantize_model(model: &Model, stats: &CalibStats) -> Result<QuantizedModel> {
    let n_tensors = model.shapes().len();
    if stats.tensors.len() < n_tensors {
        return Err(Error::MissingStats(stats.tensors.len()));
    }
    let range = |i: usize| {
        let (lo, hi) = stats.tensors[i].range();
        affine_params(lo, hi)
    };
    let input_params = range(0)?;
    let model_layers = model.layers();
    let last_param = model_layers
        .iter()
        .rposition(|l| l.spec.is_parametric())
        .ok_or_else(|| Error::Quantization("graph has no parametric layer".into()))?;

    let mut current = Some(input_params);
    let mut layers = Vec::with_capacity(model_layers.len());
    for (i, l) in model_layers.iter().enumerate() {
        if !l.spec.is_parametric() {
            layers.push(QLayer {
                spec: l.spec,
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
        let sx = current
            .ok_or_else(|| Error::Quantization(format!("layer {i} reads a raw accumulator")))?;
        let (weight, wp) = quantize_symmetric(&l.weight)?;
        let acc_scale = wp.scale as f64 * sx.scale as f64;
        let bias = l
            .bias
            .iter()
            .map(|&b| saturate_i32((b as f64 / acc_scale).round() as i64))
            .collect();
        let output = if i == last_param {
            current = None;
            OutputMode::Raw
        } else {
            let target = if model_layers.get(i + 1).map(|n| n.spec) == Some(LayerSpec::Relu) {
                i + 2
            } else {
                i + 1
            };
            let out = range(target)?;
            let (multiplier, shift) = quantize_multiplier(acc_scale / out.scale as f64)?;
            current = Some(out);
            OutputMode::Requant(Requant {
                output: out,
                multiplier,
                shift,
            })
        };
        layers.push(QLayer {
            spec: l.spec,
            weight,
            weight_params: wp,
            bias,
            output,
        });
    }
    let (mean, scale) = model.normalization();
    QuantizedModel::new(
        model.input_channels(),
        model.input_len(),
        mean,
        scale,
        input_params,
        layers,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig};
    use crate::nn::{model_init, DEFAULT_ARCH};
    use crate::quant::{collect_calibration_stats, multiplier_value, CalibMethod};

    fn setup() -> (Model, CalibStats, crate::datagen::Dataset) {
        let m = model_init(DEFAULT_ARCH, 5).unwrap();
        let ds = generate_dataset(&GenConfig {
            n_examples: 8,
            global_seed: 4,
            ..GenConfig::default()
        })
        .unwrap();
        let s = collect_calibration_stats(&m, &ds, CalibMethod::MinMax).unwrap();
        (m, s, ds)
    }

    #[test]
    fn multipliers_match_ratios() {
        let (m, s, _) = setup();
        let qm = quantize_model(&m, &s).unwrap();
        let mut sx = qm.input_params().scale as f64;
        for l in qm.layers() {
            if let OutputMode::Requant(r) = l.output {
                let ratio = l.weight_params.scale as f64 * sx / r.output.scale as f64;
                let got = multiplier_value(r.multiplier, r.shift);
                assert!(((got - ratio) / ratio).abs() <= 2f64.powi(-24));
                sx = r.output.scale as f64;
            }
        }
        assert!(matches!(
            qm.layers().last().unwrap().output,
            OutputMode::Raw
        ));
    }

    #[test]
    fn quantization_deterministic() {
        let (m, s, _) = setup();
        assert_eq!(
            quantize_model(&m, &s).unwrap(),
            quantize_model(&m, &s).unwrap()
        );
    }

    #[test]
    fn missing_stats() {
        let (m, mut s, _) = setup();
        s.tensors.truncate(3);
        assert!(matches!(
            quantize_model(&m, &s),
            Err(Error::MissingStats(3))
        ));
    }

    #[test]
    fn qforward_repeatable_and_close_to_float() {
        let (m, s, ds) = setup();
        let qm = quantize_model(&m, &s).unwrap();
        let mut ws = QWorkspace::new(&qm);
        for i in 0..ds.len() {
            let a = qm.qforward_with(ds.sequence(i), &mut ws).unwrap();
            let b = qm.qforward_with(ds.sequence(i), &mut ws).unwrap();
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
            let f = m.predict(ds.sequence(i)).unwrap();
            let q = decode_head(&a).unwrap();
            assert!(
                (f.r() - q.r()).abs() < 0.05 && (f.nbar() - q.nbar()).abs() < 0.05,
                "{f:?} vs {q:?}"
            );
        }
    }

    #[test]
    fn wrong_length_input() {
        let (m, s, _) = setup();
        let qm = quantize_model(&m, &s).unwrap();
        assert!(matches!(
            qm.qforward(&[0.0; 10]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
