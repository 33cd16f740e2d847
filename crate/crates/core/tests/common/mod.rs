//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use qstomo::fock::{quadrature_pdf_fock, DensityMatrix};
use qstomo::nn::{
    loss, Gradients, Layer, LayerSpec, LossWeights, Network, TrainScratch, Workspace,
};
use qstomo::StateParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv1d {
            in_ch: 1,
            out_ch: 2,
            kernel: 4,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Conv1d {
            in_ch: 2,
            out_ch: 3,
            kernel: 3,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            inputs: 21,
            outputs: 6,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 6,
            outputs: 4,
        },
    ]
}

pub fn tiny_net(seed: u64) -> Network<f64> {
    let mut net = Network::<f64>::init(1, 32, &tiny_specs(), seed).unwrap();
    // nonzero biases so every bias gradient is exercised away from zero
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let layers: Vec<Layer<f64>> = net
        .layers()
        .iter()
        .map(|l| Layer {
            spec: l.spec,
            weight: l.weight.clone(),
            bias: l.bias.iter().map(|_| rng.gen_range(-0.2..0.2)).collect(),
        })
        .collect();
    net = Network::new(1, 32, 0.1, 0.8, layers).unwrap();
    net
}

pub fn batch_loss(net: &Network<f64>, batch: &[(Vec<f32>, StateParams)], w: &LossWeights) -> f64 {
    let mut ws = Workspace::new(net);
    batch
        .iter()
        .map(|(x, p)| loss(&net.forward_with(x, &mut ws).unwrap(), p, w))
        .sum::<f64>()
        / batch.len() as f64
}

/// Random batch of three 32-sample inputs with labels.
pub fn fd_batch(seed: u64) -> Vec<(Vec<f32>, StateParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3)
        .map(|_| {
            let x: Vec<f32> = (0..32).map(|_| rng.gen_range(-1.5f32..1.5)).collect();
            let p = StateParams::new(
                rng.gen_range(0.0..1.2),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..0.3),
            )
            .unwrap();
            (x, p)
        })
        .collect()
}

/// Outcome of comparing backprop against central differences on every
/// parameter of `net`.
pub struct FdReport {
    pub checked: usize,
    /// Worst |analytic − fd| / (max(|analytic|, |fd|) + 1e-5).
    pub worst_rel: f64,
    /// Parameters violating |g − fd| ≤ 1e-3·max(|g|,|fd|) + 1e-8.
    pub failures: Vec<String>,
    pub layer_kinds: Vec<&'static str>,
}

pub fn fd_gradient_check(
    net: &Network<f64>,
    batch: &[(Vec<f32>, StateParams)],
    w: &LossWeights,
) -> FdReport {
    let mut grads = Gradients::zeros(net);
    let mut scratch = TrainScratch::new(net);
    for (x, p) in batch {
        net.accumulate_gradients(x, p, w, 1.0 / batch.len() as f64, &mut scratch, &mut grads)
            .unwrap();
    }
    let (ch, len) = (net.input_channels(), net.input_len());
    let eps = 1e-6;
    let mut report = FdReport {
        checked: 0,
        worst_rel: 0.0,
        failures: Vec::new(),
        layer_kinds: net
            .layers()
            .iter()
            .map(|l| match l.spec {
                LayerSpec::Conv1d { .. } => "conv1d",
                LayerSpec::Dense { .. } => "dense",
                LayerSpec::Relu => "relu",
                LayerSpec::Flatten => "flatten",
            })
            .collect(),
    };
    for li in 0..net.layers().len() {
        for (which, n) in [
            (0, net.layers()[li].weight.len()),
            (1, net.layers()[li].bias.len()),
        ] {
            for j in 0..n {
                let perturbed = |delta: f64| {
                    let layers: Vec<Layer<f64>> = net
                        .layers()
                        .iter()
                        .enumerate()
                        .map(|(k, l)| {
                            let mut l = l.clone();
                            if k == li {
                                if which == 0 {
                                    l.weight[j] += delta;
                                } else {
                                    l.bias[j] += delta;
                                }
                            }
                            l
                        })
                        .collect();
                    let (m, s) = net.normalization();
                    Network::new(ch, len, m, s, layers).unwrap()
                };
                let fd = (batch_loss(&perturbed(eps), batch, w)
                    - batch_loss(&perturbed(-eps), batch, w))
                    / (2.0 * eps);
                let g = if which == 0 {
                    grads.weight[li][j]
                } else {
                    grads.bias[li][j]
                };
                let tol = 1e-3 * g.abs().max(fd.abs()) + 1e-8;
                report.worst_rel = report
                    .worst_rel
                    .max((g - fd).abs() / (g.abs().max(fd.abs()) + 1e-5));
                if (g - fd).abs() > tol {
                    report.failures.push(format!(
                        "layer {li} {} {j}: analytic {g} fd {fd}",
                        ["w", "b"][which]
                    ));
                }
                report.checked += 1;
            }
        }
    }
    report
}

/// Asymptotic Kolmogorov survival function with Stephens' small-n correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// CDF of the Fock-basis homodyne density at phase `phi`, by trapezoidal
/// integration on [−12, 12].
pub fn fock_marginal_cdf(rho: &DensityMatrix, phi: f64) -> impl Fn(f64) -> f64 {
    let (lo, hi, steps) = (-12.0, 12.0, 24_000);
    let h = (hi - lo) / steps as f64;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + h * i as f64).collect();
    let pdf: Vec<f64> = grid
        .iter()
        .map(|&x| quadrature_pdf_fock(rho, phi, x))
        .collect();
    let mut cdf = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cdf[i] = cdf[i - 1] + 0.5 * h * (pdf[i] + pdf[i - 1]);
    }
    let total = cdf[cdf.len() - 1];
    assert!((total - 1.0).abs() < 1e-6, "marginal mass {total}");
    move |x: f64| {
        let t = ((x - lo) / h).clamp(0.0, steps as f64 - 1e-9);
        let i = t.floor() as usize;
        let f = t - i as f64;
        (cdf[i] * (1.0 - f) + cdf[i + 1] * f) / total
    }
}

/// Kolmogorov–Smirnov distance of sorted samples from `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}
