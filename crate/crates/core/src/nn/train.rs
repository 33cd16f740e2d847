//! Loss, backpropagation and the Adam training loop.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernels::{axpy, axpy_wide, col2im, sigmoid, Real};
use super::model::{model_init, LayerSpec, Model, Network, Workspace, HEAD_OUTPUTS};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::StateParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub r: f64,
    pub nbar: f64,
    pub theta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            r: 1.0,
            nbar: 1.0,
            theta: 1.0,
        }
    }
}

/// w_r(r̂−r)² + w_n(n̄̂−n̄)² + w_θ[(ĉ−cos2θ)² + (ŝ−sin2θ)²] on head outputs.
pub fn loss(head: &[f64; HEAD_OUTPUTS], truth: &StateParams, w: &LossWeights) -> f64 {
    let t = targets(truth);
    w.r * (head[0] - t[0]).powi(2)
        + w.nbar * (head[1] - t[1]).powi(2)
        + w.theta * ((head[2] - t[2]).powi(2) + (head[3] - t[3]).powi(2))
}

fn targets(p: &StateParams) -> [f64; HEAD_OUTPUTS] {
    let (s, c) = (2.0 * p.theta()).sin_cos();
    [p.r(), p.nbar(), c, s]
}

/// ∂loss/∂(raw pre-softplus outputs).
fn loss_grad_raw(
    raw: &[f64; HEAD_OUTPUTS],
    head: &[f64; HEAD_OUTPUTS],
    truth: &StateParams,
    w: &LossWeights,
) -> [f64; HEAD_OUTPUTS] {
    let t = targets(truth);
    [
        2.0 * w.r * (head[0] - t[0]) * sigmoid(raw[0]),
        2.0 * w.nbar * (head[1] - t[1]) * sigmoid(raw[1]),
        2.0 * w.theta * (head[2] - t[2]),
        2.0 * w.theta * (head[3] - t[3]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub weights: LossWeights,
    /// Fraction of the dataset held out for model selection.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: super::model::DEFAULT_ARCH.to_string(),
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            weights: LossWeights::default(),
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && [w.r, w.nbar, w.theta]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
            && (0.0..1.0).contains(&self.val_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid training configuration {self:?}"
            )))
        }
    }
}

/// Parameter gradients with 64-bit accumulation, laid out like the layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros<T: Real>(net: &Network<T>) -> Self {
        Gradients {
            weight: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.weight.len()])
                .collect(),
            bias: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.bias.len()])
                .collect(),
        }
    }

    fn clear(&mut self) {
        for v in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            v.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    fn all_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(&self.bias)
            .all(|v| v.iter().all(|g| g.is_finite()))
    }
}

/// Forward, backward and adjoint buffers for one example at a time.
#[derive(Debug, Clone)]
pub struct TrainScratch<T> {
    pub(crate) ws: Workspace<T>,
    deltas: Vec<Vec<T>>,
    dcols: Vec<Vec<T>>,
}

impl<T: Real> TrainScratch<T> {
    pub fn new(net: &Network<T>) -> Self {
        let ws = Workspace::new(net);
        let deltas = ws.acts.iter().map(|a| vec![T::zero(); a.len()]).collect();
        let dcols = ws.cols.iter().map(|c| vec![T::zero(); c.len()]).collect();
        TrainScratch { ws, deltas, dcols }
    }
}

impl<T: Real> Network<T> {
    /// Adds `scale · ∂loss/∂params` for one example to `grads`; returns its loss.
    pub fn accumulate_gradients(
        &self,
        seq: &[f32],
        truth: &StateParams,
        weights: &LossWeights,
        scale: f64,
        scratch: &mut TrainScratch<T>,
        grads: &mut Gradients,
    ) -> Result<f64> {
        let head = self.forward_with(seq, &mut scratch.ws)?;
        let z = scratch.ws.acts.last().unwrap();
        let raw = [z[0].as_f64(), z[1].as_f64(), z[2].as_f64(), z[3].as_f64()];
        let value = loss(&head, truth, weights);
        let g = loss_grad_raw(&raw, &head, truth, weights);
        let top = scratch.deltas.last_mut().unwrap();
        for (d, gi) in top.iter_mut().zip(g) {
            *d = T::of(gi * scale);
        }
        self.backward(scratch, grads);
        Ok(value)
    }

    fn backward(&self, s: &mut TrainScratch<T>, grads: &mut Gradients) {
        for (i, layer) in self.layers().iter().enumerate().rev() {
            let x = &s.ws.acts[i];
            let y = &s.ws.acts[i + 1];
            let (lower, upper) = s.deltas.split_at_mut(i + 1);
            let dy = &upper[0];
            let dx = &mut lower[i];
            let need_dx = i > 0;
            match layer.spec {
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                } => {
                    let row = in_ch * kernel;
                    let cols = &s.ws.cols[i];
                    let out_len = cols.len() / row;
                    let dcols = &mut s.dcols[i];
                    if need_dx {
                        dcols.iter_mut().for_each(|v| *v = T::zero());
                    }
                    for o in 0..out_ch {
                        let w = &layer.weight[o * row..(o + 1) * row];
                        let gw = &mut grads.weight[i][o * row..(o + 1) * row];
                        let mut gb = 0.0;
                        for t in 0..out_len {
                            let d = dy[o * out_len + t];
                            if d == T::zero() {
                                continue;
                            }
                            gb += d.as_f64();
                            axpy_wide(gw, d.as_f64(), &cols[t * row..(t + 1) * row]);
                            if need_dx {
                                axpy(&mut dcols[t * row..(t + 1) * row], d, w);
                            }
                        }
                        grads.bias[i][o] += gb;
                    }
                    if need_dx {
                        col2im(dcols, in_ch, x.len() / in_ch, kernel, stride, dx);
                    }
                }
                LayerSpec::Dense { inputs, outputs } => {
                    if need_dx {
                        dx.iter_mut().for_each(|v| *v = T::zero());
                    }
                    for o in 0..outputs {
                        let d = dy[o];
                        if d == T::zero() {
                            continue;
                        }
                        grads.bias[i][o] += d.as_f64();
                        let gw = &mut grads.weight[i][o * inputs..(o + 1) * inputs];
                        axpy_wide(gw, d.as_f64(), x);
                        if need_dx {
                            axpy(dx, d, &layer.weight[o * inputs..(o + 1) * inputs]);
                        }
                    }
                }
                LayerSpec::Relu => {
                    if need_dx {
                        for ((d, &g), &out) in dx.iter_mut().zip(dy.iter()).zip(y.iter()) {
                            *d = if out > T::zero() { g } else { T::zero() };
                        }
                    }
                }
                LayerSpec::Flatten => {
                    if need_dx {
                        dx.copy_from_slice(dy);
                    }
                }
            }
        }
    }
}

/// Adam moments; the update is computed in f64 and stored back at the
/// network's precision.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new<T: Real>(net: &Network<T>, cfg: &TrainConfig) -> Self {
        Adam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: Gradients::zeros(net),
            v: Gradients::zeros(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply<T: Real>(&mut self, net: &mut Network<T>, grads: &Gradients, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let groups = [
                (
                    &mut layer.weight,
                    &grads.weight[i],
                    &mut self.m.weight[i],
                    &mut self.v.weight[i],
                ),
                (
                    &mut layer.bias,
                    &grads.bias[i],
                    &mut self.m.bias[i],
                    &mut self.v.bias[i],
                ),
            ];
            for (params, g, m, v) in groups {
                for j in 0..params.len() {
                    m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                    v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                    let update = lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + eps);
                    params[j] = T::of(params[j].as_f64() - update);
                }
            }
        }
    }
}

/// One optimizer step on the mean loss over `batch`; returns that mean loss.
pub fn train_step<T: Real>(
    net: &mut Network<T>,
    batch: &[(&[f32], &StateParams)],
    cfg: &TrainConfig,
    opt: &mut Adam,
    scratch: &mut TrainScratch<T>,
    grads: &mut Gradients,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    grads.clear();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (seq, truth) in batch {
        total += net.accumulate_gradients(seq, truth, &cfg.weights, scale, scratch, grads)?;
    }
    let mean = total * scale;
    if !mean.is_finite() || !grads.all_finite() {
        return Err(Error::NonFiniteLoss {
            step: opt.steps() as usize + 1,
            detail: format!(
                "batch loss {mean}, gradients finite: {}",
                grads.all_finite()
            ),
        });
    }
    opt.apply(net, grads, cfg.learning_rate);
    Ok(mean)
}

/// Mean loss of `net` over the examples `indices` of `ds`.
pub fn mean_loss<T: Real>(
    net: &Network<T>,
    ds: &Dataset,
    indices: &[usize],
    weights: &LossWeights,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty("loss evaluation set"));
    }
    let mut ws = Workspace::new(net);
    let mut total = 0.0;
    for &i in indices {
        let head = net.forward_with(ds.sequence(i), &mut ws)?;
        total += loss(&head, ds.label(i), weights);
    }
    Ok(total / indices.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub best_epoch: usize,
    /// Row 0 holds the losses of the initialized model.
    pub log: Vec<EpochLog>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Global mean and standard deviation of the samples of `indices`.
pub fn normalization_constants(ds: &Dataset, indices: &[usize]) -> Result<(f64, f64)> {
    let n = (indices.len() * ds.seq_len()) as f64;
    if n == 0.0 {
        return Err(Error::Empty("normalization set"));
    }
    let sum: f64 = indices
        .iter()
        .map(|&i| ds.sequence(i).iter().map(|&v| v as f64).sum::<f64>())
        .sum();
    let mean = sum / n;
    let ss: f64 = indices
        .iter()
        .map(|&i| {
            ds.sequence(i)
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
        })
        .sum();
    let scale = (ss / n).sqrt();
    if !(scale > 0.0) {
        return Err(Error::InvalidParam(
            "training samples have zero variance".into(),
        ));
    }
    Ok((mean, scale))
}

/// Seeded train/validation split; validation gets ⌊n·val_fraction⌋ examples
/// and falls back to the training set when that is zero.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED));
    let n_val = (n as f64 * val_fraction).floor() as usize;
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    if val.is_empty() {
        (train.clone(), train)
    } else {
        (train, val)
    }
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let mut net = model_init(&cfg.arch, cfg.seed)?;
    if net.input_numel() != ds.seq_len() {
        return Err(Error::DimensionMismatch {
            left: net.input_numel(),
            right: ds.seq_len(),
        });
    }
    let (mut train_idx, val_idx) = split_indices(ds.len(), cfg.val_fraction, cfg.seed);
    let (mean, scale) = normalization_constants(ds, &train_idx)?;
    net.set_normalization(mean, scale)?;

    let initial = EpochLog {
        epoch: 0,
        train_loss: mean_loss(&net, ds, &train_idx, &cfg.weights)?,
        val_loss: mean_loss(&net, ds, &val_idx, &cfg.weights)?,
    };
    log::info!(
        "epoch 0: train {:.6} val {:.6}",
        initial.train_loss,
        initial.val_loss
    );
    let mut log_rows = vec![initial];
    let mut best = (initial.val_loss, 0, net.clone());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&net, cfg);
    let mut scratch = TrainScratch::new(&net);
    let mut grads = Gradients::zeros(&net);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (ds.sequence(i), ds.label(i))));
            total += train_step(&mut net, &batch, cfg, &mut opt, &mut scratch, &mut grads)?
                * chunk.len() as f64;
        }
        let row = EpochLog {
            epoch,
            train_loss: total / train_idx.len() as f64,
            val_loss: mean_loss(&net, ds, &val_idx, &cfg.weights)?,
        };
        log::info!(
            "epoch {epoch}: train {:.6} val {:.6}",
            row.train_loss,
            row.val_loss
        );
        if row.val_loss < best.0 {
            best = (row.val_loss, epoch, net.clone());
        }
        log_rows.push(row);
    }
    train_idx.sort_unstable();
    Ok(TrainOutcome {
        model: best.2,
        best_epoch: best.1,
        log: log_rows,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

pub fn write_training_log(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{}\n",
            row.epoch, row.train_loss, row.val_loss
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
