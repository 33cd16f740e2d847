//! Layer graph, initialization and the inference path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{dot, im2col, softplus, Real};
use crate::error::{Error, Result};
use crate::gaussian::StateParams;

/// Number of raw network outputs: r, n̄, cos2θ, sin2θ.
pub const HEAD_OUTPUTS: usize = 4;
pub const DEFAULT_ARCH: &str = "qst-cnn-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid (unpadded) strided 1D convolution. Weights are laid out
    /// `[out_ch][in_ch][kernel]`.
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    /// Weights are laid out `[outputs][inputs]`.
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => out_ch * in_ch * kernel,
            LayerSpec::Dense { inputs, outputs } => inputs * outputs,
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { out_ch, .. } => out_ch,
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    pub fn is_parametric(&self) -> bool {
        self.weight_len() > 0
    }

    /// Number of inputs feeding each output unit.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, kernel, .. } => in_ch * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let mismatch = |expected: String| Error::ShapeMismatch {
            expected,
            got: format!("{input:?}"),
        };
        match (*self, input) {
            (
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                },
                Shape::Seq { channels, len },
            ) => {
                if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::InvalidParam(format!("degenerate layer {self:?}")));
                }
                if channels != in_ch || len < kernel {
                    return Err(mismatch(format!("{in_ch} channels of length >= {kernel}")));
                }
                Ok(Shape::Seq {
                    channels: out_ch,
                    len: (len - kernel) / stride + 1,
                })
            }
            (LayerSpec::Dense { inputs, outputs }, Shape::Flat(n)) => {
                if inputs == 0 || outputs == 0 {
                    return Err(Error::InvalidParam(format!("degenerate layer {self:?}")));
                }
                if n != inputs {
                    return Err(mismatch(format!("Flat({inputs})")));
                }
                Ok(Shape::Flat(outputs))
            }
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::Flatten, s) => Ok(Shape::Flat(s.numel())),
            (LayerSpec::Conv1d { in_ch, .. }, _) => {
                Err(mismatch(format!("sequence with {in_ch} channels")))
            }
            (LayerSpec::Dense { inputs, .. }, _) => Err(mismatch(format!("Flat({inputs})"))),
        }
    }
}

/// Activation shape; sequence tensors are stored channel-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Seq { channels: usize, len: usize },
    Flat(usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Seq { channels, len } => channels * len,
            Shape::Flat(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Feed-forward network over a `channels × len` input followed by the
/// softplus/angle head. [`Model`] is the f32 production instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    input: Shape,
    mean: f64,
    scale: f64,
    layers: Vec<Layer<T>>,
    shapes: Vec<Shape>,
}

pub type Model = Network<f32>;

impl<T: Real> Network<T> {
    pub fn new(
        input_channels: usize,
        input_len: usize,
        mean: f64,
        scale: f64,
        layers: Vec<Layer<T>>,
    ) -> Result<Self> {
        check_normalization(mean, scale)?;
        let input = Shape::Seq {
            channels: input_channels,
            len: input_len,
        };
        let shapes = shape_walk(input, layers.iter().map(|l| &l.spec))?;
        for (i, l) in layers.iter().enumerate() {
            if l.weight.len() != l.spec.weight_len() || l.bias.len() != l.spec.bias_len() {
                return Err(Error::ShapeMismatch {
                    expected: format!(
                        "layer {i}: {} weights, {} biases",
                        l.spec.weight_len(),
                        l.spec.bias_len()
                    ),
                    got: format!("{} weights, {} biases", l.weight.len(), l.bias.len()),
                });
            }
        }
        Ok(Network {
            input,
            mean,
            scale,
            layers,
            shapes,
        })
    }

    /// He-uniform weights (bound √(6/fan_in)), zero biases.
    pub fn init(
        input_channels: usize,
        input_len: usize,
        specs: &[LayerSpec],
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let bound = if spec.is_parametric() {
                    (6.0 / spec.fan_in() as f64).sqrt()
                } else {
                    0.0
                };
                let weight = (0..spec.weight_len())
                    .map(|_| T::of(rng.gen_range(-bound..bound)))
                    .collect();
                Layer {
                    spec,
                    weight,
                    bias: vec![T::zero(); spec.bias_len()],
                }
            })
            .collect();
        Network::new(input_channels, input_len, 0.0, 1.0, layers)
    }

    pub fn input_channels(&self) -> usize {
        match self.input {
            Shape::Seq { channels, .. } => channels,
            Shape::Flat(_) => 1,
        }
    }

    pub fn input_len(&self) -> usize {
        match self.input {
            Shape::Seq { len, .. } => len,
            Shape::Flat(n) => n,
        }
    }

    pub fn input_numel(&self) -> usize {
        self.input.numel()
    }

    pub fn normalization(&self) -> (f64, f64) {
        (self.mean, self.scale)
    }

    pub fn set_normalization(&mut self, mean: f64, scale: f64) -> Result<()> {
        check_normalization(mean, scale)?;
        self.mean = mean;
        self.scale = scale;
        Ok(())
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Activation shapes: entry 0 is the input, entry i+1 the output of layer i.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spec.weight_len() + l.spec.bias_len())
            .sum()
    }

    /// Same graph in another storage type.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        Network {
            input: self.input,
            mean: self.mean,
            scale: self.scale,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    weight: conv(&l.weight),
                    bias: conv(&l.bias),
                })
                .collect(),
            shapes: self.shapes.clone(),
        }
    }

    /// (x − mean)/scale into `out`.
    pub fn normalize_into(&self, seq: &[f32], out: &mut [T]) -> Result<()> {
        if seq.len() != self.input_numel() {
            return Err(Error::DimensionMismatch {
                left: self.input_numel(),
                right: seq.len(),
            });
        }
        let inv = 1.0 / self.scale;
        for (o, &x) in out.iter_mut().zip(seq) {
            *o = T::of((x as f64 - self.mean) * inv);
        }
        Ok(())
    }

    /// Runs the layers on an already-normalized input held in `ws.acts[0]`
    /// and returns the head outputs (softplus applied to the first two).
    pub(crate) fn run(&self, ws: &mut Workspace<T>) -> [f64; HEAD_OUTPUTS] {
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            match layer.spec {
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                } => {
                    let in_len = x.len() / in_ch;
                    let cols = &mut ws.cols[i];
                    im2col(x, in_ch, in_len, kernel, stride, cols);
                    let row = in_ch * kernel;
                    let out_len = cols.len() / row;
                    for o in 0..out_ch {
                        let w = &layer.weight[o * row..(o + 1) * row];
                        let b = layer.bias[o];
                        let dst = &mut y[o * out_len..(o + 1) * out_len];
                        for (t, d) in dst.iter_mut().enumerate() {
                            *d = b + dot(w, &cols[t * row..(t + 1) * row]);
                        }
                    }
                }
                LayerSpec::Dense { inputs, .. } => {
                    for (o, d) in y.iter_mut().enumerate() {
                        *d = layer.bias[o] + dot(&layer.weight[o * inputs..(o + 1) * inputs], x);
                    }
                }
                LayerSpec::Relu => {
                    for (d, &s) in y.iter_mut().zip(x.iter()) {
                        *d = if s > T::zero() { s } else { T::zero() };
                    }
                }
                LayerSpec::Flatten => y.copy_from_slice(x),
            }
        }
        let z = ws.acts.last().expect("workspace has an input slot");
        head_from_raw([z[0].as_f64(), z[1].as_f64(), z[2].as_f64(), z[3].as_f64()])
    }

    /// Normalizes `seq` and runs the network without allocating.
    pub fn forward_with(&self, seq: &[f32], ws: &mut Workspace<T>) -> Result<[f64; HEAD_OUTPUTS]> {
        ws.check(self)?;
        self.normalize_into(seq, &mut ws.acts[0])?;
        Ok(self.run(ws))
    }

    /// Runs on an already-normalized input.
    pub fn forward_normalized(
        &self,
        x: &[T],
        ws: &mut Workspace<T>,
    ) -> Result<[f64; HEAD_OUTPUTS]> {
        ws.check(self)?;
        if x.len() != self.input_numel() {
            return Err(Error::DimensionMismatch {
                left: self.input_numel(),
                right: x.len(),
            });
        }
        ws.acts[0].copy_from_slice(x);
        Ok(self.run(ws))
    }

    pub fn predict(&self, seq: &[f32]) -> Result<StateParams> {
        let mut ws = Workspace::new(self);
        decode_head(&self.forward_with(seq, &mut ws)?)
    }
}

impl Model {
    /// Normalizes a raw quadrature sequence into a `[channels, len]` tensor.
    pub fn normalize_input(&self, seq: &[f32]) -> Result<Tensor> {
        let mut data = vec![0.0f32; self.input_numel()];
        self.normalize_into(seq, &mut data)?;
        Tensor::new(vec![self.input_channels(), self.input_len()], data)
    }

    /// Forward on a normalized tensor of shape `[len]`, `[channels, len]`
    /// or `[batch, channels, len]`; returns `[4]` or `[batch, 4]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let per = self.input_numel();
        let shape = input.shape();
        let (batch, ok) = match shape.len() {
            1 => (1, shape[0] == per && self.input_channels() == 1),
            2 => (
                1,
                shape[0] == self.input_channels() && shape[1] == self.input_len(),
            ),
            3 => (
                shape[0],
                shape[1] == self.input_channels() && shape[2] == self.input_len(),
            ),
            _ => (0, false),
        };
        if !ok {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "[{}, {}] with optional batch",
                    self.input_channels(),
                    self.input_len()
                ),
                got: format!("{shape:?}"),
            });
        }
        let mut ws = Workspace::new(self);
        let mut out = Vec::with_capacity(batch * HEAD_OUTPUTS);
        for x in input.data().chunks_exact(per) {
            out.extend(
                self.forward_normalized(x, &mut ws)?
                    .iter()
                    .map(|&v| v as f32),
            );
        }
        let out_shape = if shape.len() == 3 {
            vec![batch, HEAD_OUTPUTS]
        } else {
            vec![HEAD_OUTPUTS]
        };
        Tensor::new(out_shape, out)
    }
}

fn check_normalization(mean: f64, scale: f64) -> Result<()> {
    if !(mean.is_finite() && scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParam(format!(
            "normalization mean={mean} scale={scale} must be finite with scale > 0"
        )));
    }
    Ok(())
}

/// Output shape of every layer, starting with `input`.
pub fn shape_walk<'a>(
    input: Shape,
    specs: impl IntoIterator<Item = &'a LayerSpec>,
) -> Result<Vec<Shape>> {
    let mut shapes = vec![input];
    for spec in specs {
        let next = spec.output_shape(*shapes.last().unwrap())?;
        shapes.push(next);
    }
    let last = *shapes.last().unwrap();
    if last.numel() != HEAD_OUTPUTS {
        return Err(Error::ShapeMismatch {
            expected: format!("{HEAD_OUTPUTS} outputs"),
            got: format!("{last:?}"),
        });
    }
    Ok(shapes)
}

/// Layer stack of a named architecture for a `1 × seq_len` input.
pub fn arch_layers(arch_id: &str) -> Result<(usize, usize, Vec<LayerSpec>)> {
    match arch_id {
        DEFAULT_ARCH => {
            let conv = |in_ch, out_ch, kernel| LayerSpec::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride: 4,
            };
            let specs = vec![
                conv(1, 8, 16),
                LayerSpec::Relu,
                conv(8, 16, 8),
                LayerSpec::Relu,
                conv(16, 32, 8),
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 32 * 30,
                    outputs: 128,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    inputs: 128,
                    outputs: HEAD_OUTPUTS,
                },
            ];
            Ok((1, 2048, specs))
        }
        other => Err(Error::UnknownArch(other.to_string())),
    }
}

pub fn model_init(arch_id: &str, seed: u64) -> Result<Model> {
    let (ch, len, specs) = arch_layers(arch_id)?;
    let model = Model::init(ch, len, &specs, seed)?;
    log::debug!(
        "initialized {arch_id} with {} parameters",
        model.parameter_count()
    );
    Ok(model)
}

/// Raw linear outputs → (softplus r̂, softplus n̄̂, ĉ, ŝ).
pub fn head_from_raw(z: [f64; HEAD_OUTPUTS]) -> [f64; HEAD_OUTPUTS] {
    [softplus(z[0]), softplus(z[1]), z[2], z[3]]
}

/// θ = ½·atan2(ŝ, ĉ) folded into [0, π).
pub fn decode_head(head: &[f64; HEAD_OUTPUTS]) -> Result<StateParams> {
    let theta = 0.5 * head[3].atan2(head[2]);
    StateParams::new(head[0].max(0.0), theta, head[1].max(0.0))
}

/// Per-layer activation and im2col buffers reused across calls.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    pub(crate) acts: Vec<Vec<T>>,
    pub(crate) cols: Vec<Vec<T>>,
}

impl<T: Real> Workspace<T> {
    pub fn new(net: &Network<T>) -> Self {
        let acts = net
            .shapes
            .iter()
            .map(|s| vec![T::zero(); s.numel()])
            .collect();
        let cols = net
            .layers
            .iter()
            .zip(&net.shapes[1..])
            .map(|(l, out)| match (l.spec, out) {
                (LayerSpec::Conv1d { in_ch, kernel, .. }, Shape::Seq { len, .. }) => {
                    vec![T::zero(); len * in_ch * kernel]
                }
                _ => Vec::new(),
            })
            .collect();
        Workspace { acts, cols }
    }

    fn check(&self, net: &Network<T>) -> Result<()> {
        let ok = self.acts.len() == net.shapes.len()
            && self
                .acts
                .iter()
                .zip(&net.shapes)
                .all(|(a, s)| a.len() == s.numel());
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: "workspace built for this network".into(),
                got: "workspace for a different graph".into(),
            })
        }
    }

    /// Activation `i` (0 = normalized input, i+1 = output of layer i).
    pub fn activation(&self, i: usize) -> &[T] {
        &self.acts[i]
    }
}

/// Dense row-major f32 tensor of rank 1 to 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::InvalidParam(format!(
                "tensor rank {} not in 1..=3",
                shape.len()
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::DimensionMismatch {
                left: numel,
                right: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let numel = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}
