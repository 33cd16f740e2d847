//! Activation range statistics over a calibration set.
//!
//! Tensor 0 is the normalized network input and tensor i + 1 the output of
//! layer i.

use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Model, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibMethod {
    MinMax,
    /// Clip each tensor to its [100 − p, p] percentile interval (p in (50, 100)).
    Percentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorStats {
    pub min: f64,
    pub max: f64,
    /// Percentile-clipped interval, when requested.
    pub clip: Option<(f64, f64)>,
}

impl TensorStats {
    fn empty() -> Self {
        TensorStats {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            clip: None,
        }
    }

    /// Range used for quantization.
    pub fn range(&self) -> (f64, f64) {
        self.clip.unwrap_or((self.min, self.max))
    }

    fn observe<T: Copy + Into<f64>>(&mut self, values: &[T]) {
        for &v in values {
            let v = v.into();
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibStats {
    pub tensors: Vec<TensorStats>,
    pub examples: usize,
}

impl CalibStats {
    /// Element-wise min/max union; percentile clips do not survive a merge.
    pub fn merge(&self, other: &CalibStats) -> Result<CalibStats> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::DimensionMismatch {
                left: self.tensors.len(),
                right: other.tensors.len(),
            });
        }
        let tensors = self
            .tensors
            .iter()
            .zip(&other.tensors)
            .map(|(a, b)| TensorStats {
                min: a.min.min(b.min),
                max: a.max.max(b.max),
                clip: None,
            })
            .collect();
        Ok(CalibStats {
            tensors,
            examples: self.examples + other.examples,
        })
    }

    /// CSV: `tensor,min,max,clip_lo,clip_hi` (clip columns empty for min/max).
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# examples={}\ntensor,min,max,clip_lo,clip_hi\n",
            self.examples
        );
        for (i, t) in self.tensors.iter().enumerate() {
            let (lo, hi) = match t.clip {
                Some((lo, hi)) => (format!("{lo:e}"), format!("{hi:e}")),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{i},{:e},{:e},{lo},{hi}", t.min, t.max);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<CalibStats> {
        let bad = |line: &str| Error::Corrupt(format!("calibration stats line {line:?}"));
        let mut examples = None;
        let mut tensors = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("tensor,") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# examples=") {
                examples = Some(rest.parse().map_err(|_| bad(line))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 || f[0].parse::<usize>().ok() != Some(tensors.len()) {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let clip = if f[3].is_empty() && f[4].is_empty() {
                None
            } else {
                Some((num(f[3])?, num(f[4])?))
            };
            let (min, max) = (num(f[1])?, num(f[2])?);
            if !(min <= max) {
                return Err(bad(line));
            }
            tensors.push(TensorStats { min, max, clip });
        }
        let examples = examples
            .ok_or_else(|| Error::Corrupt("calibration stats lack an example count".into()))?;
        if examples == 0 || tensors.is_empty() {
            return Err(Error::Empty("calibration statistics"));
        }
        Ok(CalibStats { tensors, examples })
    }

    pub fn read_csv(path: &Path) -> Result<CalibStats> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CalibStats::from_csv(&text)
    }
}

const HIST_BINS: usize = 4096;

/// Runs the float model over every calibration sequence and records the
/// range of each activation tensor.
pub fn collect_calibration_stats(
    model: &Model,
    calib: &Dataset,
    method: CalibMethod,
) -> Result<CalibStats> {
    if calib.is_empty() {
        return Err(Error::Empty("calibration dataset"));
    }
    let n_tensors = model.shapes().len();
    let mut ws = Workspace::new(model);
    let mut tensors = vec![TensorStats::empty(); n_tensors];
    for i in 0..calib.len() {
        model.forward_with(calib.sequence(i), &mut ws)?;
        for (t, stats) in tensors.iter_mut().enumerate() {
            stats.observe(ws.activation(t));
        }
    }
    if tensors
        .iter()
        .any(|t| !(t.min.is_finite() && t.max.is_finite()))
    {
        return Err(Error::NonFinite("calibration activations"));
    }

    if let CalibMethod::Percentile(p) = method {
        if !(p > 50.0 && p < 100.0) {
            return Err(Error::Config(format!(
                "percentile {p} must lie in (50, 100)"
            )));
        }
        // Second pass on fixed bin edges from the min/max pass.
        let mut hists = vec![vec![0u64; HIST_BINS]; n_tensors];
        for i in 0..calib.len() {
            model.forward_with(calib.sequence(i), &mut ws)?;
            for (t, hist) in hists.iter_mut().enumerate() {
                let TensorStats { min, max, .. } = tensors[t];
                let width = (max - min) / HIST_BINS as f64;
                for &v in ws.activation(t) {
                    let b = if width > 0.0 {
                        (((v as f64 - min) / width) as usize).min(HIST_BINS - 1)
                    } else {
                        0
                    };
                    hist[b] += 1;
                }
            }
        }
        for (stats, hist) in tensors.iter_mut().zip(&hists) {
            let total: u64 = hist.iter().sum();
            let width = (stats.max - stats.min) / HIST_BINS as f64;
            let tail = (total as f64 * (1.0 - p / 100.0)).floor() as u64;
            let mut acc = 0;
            let mut lo_bin = 0;
            while lo_bin < HIST_BINS - 1 && acc + hist[lo_bin] <= tail {
                acc += hist[lo_bin];
                lo_bin += 1;
            }
            acc = 0;
            let mut hi_bin = HIST_BINS - 1;
            while hi_bin > lo_bin && acc + hist[hi_bin] <= tail {
                acc += hist[hi_bin];
                hi_bin -= 1;
            }
            let lo = stats.min + width * lo_bin as f64;
            let hi = (stats.min + width * (hi_bin + 1) as f64).min(stats.max);
            stats.clip = Some((lo, hi));
        }
    }
    Ok(CalibStats {
        tensors,
        examples: calib.len(),
    })
}
