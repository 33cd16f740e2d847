//! Fidelity sweep over a labeled dataset, binned by true squeezing level.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::engine::Estimator;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::gaussian_fidelity;
use crate::StateParams;

pub const DEFAULT_BINS: usize = 10;
/// Squeezing axis covered by the bins, in dB.
pub const BIN_RANGE_DB: (f64, f64) = (0.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleRecord {
    pub index: usize,
    pub truth: StateParams,
    pub estimate: StateParams,
    pub fidelity: f64,
}

/// Aggregate of one squeezing bin. Mean and σ are `None` for an empty bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStats {
    pub lo_db: f64,
    pub hi_db: f64,
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl BinStats {
    pub fn center_db(&self) -> f64 {
        0.5 * (self.lo_db + self.hi_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub records: Vec<ExampleRecord>,
    pub bins: Vec<BinStats>,
}

/// Population mean and standard deviation.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let n = values.clone().count();
    if n == 0 {
        return None;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Some((mean, var.sqrt()))
}

fn bin_index(db: f64, bins: usize) -> usize {
    let (lo, hi) = BIN_RANGE_DB;
    let t = ((db - lo) / (hi - lo) * bins as f64).floor();
    // the top edge and anything outside the axis fall into the edge bins
    (t.max(0.0) as usize).min(bins - 1)
}

impl FidelityReport {
    /// Builds the report from estimates aligned with the dataset labels.
    pub fn from_estimates(
        truth: &[StateParams],
        estimates: &[StateParams],
        bins: usize,
    ) -> Result<FidelityReport> {
        if truth.len() != estimates.len() {
            return Err(Error::DimensionMismatch {
                left: truth.len(),
                right: estimates.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::Empty("evaluation dataset"));
        }
        if bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        let records: Vec<ExampleRecord> = truth
            .iter()
            .zip(estimates)
            .enumerate()
            .map(|(index, (t, e))| ExampleRecord {
                index,
                truth: *t,
                estimate: *e,
                fidelity: gaussian_fidelity(t, e),
            })
            .collect();
        let (lo, hi) = BIN_RANGE_DB;
        let width = (hi - lo) / bins as f64;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
        for r in &records {
            members[bin_index(r.truth.squeezing_db(), bins)].push(r.fidelity);
        }
        let bins = members
            .iter()
            .enumerate()
            .map(|(b, f)| {
                let stats = mean_std(f.iter().copied());
                if stats.is_none() {
                    log::warn!("fidelity bin {b} is empty");
                }
                BinStats {
                    lo_db: lo + width * b as f64,
                    hi_db: lo + width * (b + 1) as f64,
                    count: f.len(),
                    mean: stats.map(|s| s.0),
                    std: stats.map(|s| s.1),
                }
            })
            .collect();
        Ok(FidelityReport { records, bins })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_fidelity(&self) -> f64 {
        mean_std(self.records.iter().map(|r| r.fidelity)).map_or(f64::NAN, |s| s.0)
    }

    pub fn std_fidelity(&self) -> f64 {
        mean_std(self.records.iter().map(|r| r.fidelity)).map_or(f64::NAN, |s| s.1)
    }

    /// `bin_lo_db,bin_hi_db,count,mean_fidelity,std_fidelity`; empty bins
    /// leave the last two fields blank.
    pub fn bins_csv(&self) -> String {
        let mut out = String::from("bin_lo_db,bin_hi_db,count,mean_fidelity,std_fidelity\n");
        for b in &self.bins {
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.9}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                b.lo_db,
                b.hi_db,
                b.count,
                fmt(b.mean),
                fmt(b.std)
            );
        }
        out
    }

    /// `index,true_r,true_theta,true_nbar,est_r,est_theta,est_nbar,fidelity`.
    pub fn records_csv(&self) -> String {
        let mut out =
            String::from("index,true_r,true_theta,true_nbar,est_r,est_theta,est_nbar,fidelity\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                r.index,
                r.truth.r(),
                r.truth.theta(),
                r.truth.nbar(),
                r.estimate.r(),
                r.estimate.theta(),
                r.estimate.nbar(),
                r.fidelity
            );
        }
        out
    }

    pub fn write_bins_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.bins_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_records_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.records_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses a bins CSV written by [`FidelityReport::bins_csv`]; records are
    /// not part of that file and come back empty.
    pub fn bins_from_csv(text: &str) -> Result<Vec<BinStats>> {
        let mut lines = text.lines();
        if lines.next() != Some("bin_lo_db,bin_hi_db,count,mean_fidelity,std_fidelity") {
            return Err(Error::Corrupt("fidelity CSV header".into()));
        }
        lines
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|line| {
                let bad = || Error::Corrupt(format!("fidelity CSV line {line:?}"));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                let opt = |s: &str| -> Result<Option<f64>> {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse().map(Some).map_err(|_| bad())
                    }
                };
                Ok(BinStats {
                    lo_db: f[0].parse().map_err(|_| bad())?,
                    hi_db: f[1].parse().map_err(|_| bad())?,
                    count: f[2].parse().map_err(|_| bad())?,
                    mean: opt(f[3])?,
                    std: opt(f[4])?,
                })
            })
            .collect()
    }
}

/// Runs `engine` on every example (in parallel) and returns index-ordered
/// estimates.
pub fn estimate_all<E: Estimator>(engine: &E, ds: &Dataset) -> Result<Vec<StateParams>> {
    if ds.seq_len() != engine.input_len() {
        return Err(Error::DimensionMismatch {
            left: engine.input_len(),
            right: ds.seq_len(),
        });
    }
    (0..ds.len())
        .into_par_iter()
        .map_init(
            || engine.scratch(),
            |s, i| engine.estimate_with(ds.sequence(i), s),
        )
        .collect()
}

pub fn evaluate_fidelity_sweep<E: Estimator>(
    engine: &E,
    ds: &Dataset,
    bins: usize,
) -> Result<FidelityReport> {
    let estimates = estimate_all(engine, ds)?;
    FidelityReport::from_estimates(ds.labels(), &estimates, bins)
}
