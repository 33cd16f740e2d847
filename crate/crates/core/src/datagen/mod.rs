//! Synthetic homodyne records of degraded squeezed states.
//!
//! Every example owns a key `mix64(global_seed, index)`. Three sub-streams
//! hang off that key: labels (index 0), quadrature samples (index 1) and,
//! for the random schedule, local-oscillator phases (index 2). Generating
//! example 17 on its own therefore reproduces exactly what a full run
//! writes at position 17.

mod format;
pub mod rng;

use std::f64::consts::PI;

use rayon::prelude::*;

pub use format::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
use rng::{mix64, CounterRng, NormalStream};

use crate::error::{Error, Result};
use crate::gaussian::{params_from_db, quadrature_variance, DbLevels, StateParams};

pub const DEFAULT_SEQ_LEN: usize = 2048;
/// Samples with |x| above this are redrawn.
pub const SAMPLE_LIMIT: f64 = 50.0;

const LABEL_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const PHASE_STREAM: u64 = 2;

/// Local-oscillator phase protocol across a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSchedule {
    /// φ_k = π·k/L.
    Linear,
    /// φ_k uniform on [0, π), drawn per point.
    Random,
}

impl PhaseSchedule {
    pub fn id(self) -> u8 {
        match self {
            PhaseSchedule::Linear => 0,
            PhaseSchedule::Random => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(PhaseSchedule::Linear),
            1 => Ok(PhaseSchedule::Random),
            other => Err(Error::UnknownSchedule(other)),
        }
    }
}

/// Phases for `schedule_id`; `seed` only matters for the random schedule.
pub fn phase_schedule(schedule_id: u8, seq_len: usize, seed: u64) -> Result<Vec<f64>> {
    let schedule = PhaseSchedule::from_id(schedule_id)?;
    let mut out = vec![0.0; seq_len];
    fill_phases(schedule, seed, &mut out);
    Ok(out)
}

fn fill_phases(schedule: PhaseSchedule, seed: u64, out: &mut [f64]) {
    let len = out.len() as f64;
    match schedule {
        PhaseSchedule::Linear => {
            for (k, phi) in out.iter_mut().enumerate() {
                *phi = PI * k as f64 / len;
            }
        }
        PhaseSchedule::Random => {
            let mut rng = CounterRng::new(seed);
            for phi in out.iter_mut() {
                *phi = PI * rng.uniform();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSequence {
    pub values: Vec<f32>,
    pub schedule_id: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub params: StateParams,
    pub sequence: QuadratureSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_examples: usize,
    pub seq_len: usize,
    /// Squeezing below vacuum, dB.
    pub squeezing_db: (f64, f64),
    /// Anti-squeezing minus squeezing, dB.
    pub excess_db: (f64, f64),
    pub schedule_id: u8,
    pub global_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_examples: 20_000,
            seq_len: DEFAULT_SEQ_LEN,
            squeezing_db: (0.0, 10.0),
            excess_db: (0.0, 3.0),
            schedule_id: 0,
            global_seed: 0,
        }
    }
}

// Widest label box for which the Fock reconstruction at the default cutoff
// stays accurate; see the regime notes in `fock::density`.
const MAX_SQUEEZING_DB: f64 = 10.0;
const MAX_EXCESS_DB: f64 = 3.0;

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        PhaseSchedule::from_id(self.schedule_id)?;
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be positive".into()));
        }
        if u32::try_from(self.seq_len).is_err() || u32::try_from(self.n_examples).is_err() {
            return Err(Error::Config(
                "seq_len and n_examples must fit in u32".into(),
            ));
        }
        check_range("squeezing_db", self.squeezing_db, MAX_SQUEEZING_DB)?;
        check_range("excess_db", self.excess_db, MAX_EXCESS_DB)
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= max) {
        return Err(Error::Config(format!(
            "{name} range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= {max}"
        )));
    }
    Ok(())
}

/// Labels and samples stored contiguously, example-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    seq_len: usize,
    schedule_id: u8,
    labels: Vec<StateParams>,
    values: Vec<f32>,
}

impl Dataset {
    pub fn new(seq_len: usize, schedule_id: u8) -> Result<Self> {
        PhaseSchedule::from_id(schedule_id)?;
        if seq_len == 0 {
            return Err(Error::InvalidParam("seq_len must be positive".into()));
        }
        Ok(Dataset {
            seq_len,
            schedule_id,
            labels: Vec::new(),
            values: Vec::new(),
        })
    }

    pub fn push(&mut self, ex: LabeledExample) -> Result<()> {
        if ex.sequence.values.len() != self.seq_len {
            return Err(Error::DimensionMismatch {
                left: self.seq_len,
                right: ex.sequence.values.len(),
            });
        }
        if ex.sequence.schedule_id != self.schedule_id {
            return Err(Error::InvalidParam(format!(
                "schedule {} does not match dataset schedule {}",
                ex.sequence.schedule_id, self.schedule_id
            )));
        }
        self.labels.push(ex.params);
        self.values.extend_from_slice(&ex.sequence.values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn schedule_id(&self) -> u8 {
        self.schedule_id
    }

    pub fn label(&self, i: usize) -> &StateParams {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[StateParams] {
        &self.labels
    }

    pub fn sequence(&self, i: usize) -> &[f32] {
        &self.values[i * self.seq_len..(i + 1) * self.seq_len]
    }

    /// All samples, example-major.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn example(&self, i: usize) -> LabeledExample {
        LabeledExample {
            params: self.labels[i],
            sequence: QuadratureSequence {
                values: self.sequence(i).to_vec(),
                schedule_id: self.schedule_id,
            },
        }
    }

    /// Examples `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            seq_len: self.seq_len,
            schedule_id: self.schedule_id,
            labels: self.labels[range.clone()].to_vec(),
            values: self.values[range.start * self.seq_len..range.end * self.seq_len].to_vec(),
        }
    }

    pub(crate) fn from_parts(
        seq_len: usize,
        schedule_id: u8,
        labels: Vec<StateParams>,
        values: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(labels.len() * seq_len, values.len());
        Dataset {
            seq_len,
            schedule_id,
            labels,
            values,
        }
    }
}

/// Per-example key used by [`generate_dataset`].
pub fn example_seed(global_seed: u64, index: u64) -> u64 {
    mix64(global_seed, index)
}

/// Draws one record x_k ~ N(0, Var(φ_k)) for the configured schedule.
pub fn sample_sequence(
    p: &StateParams,
    cfg: &GenConfig,
    example_seed: u64,
) -> Result<QuadratureSequence> {
    let schedule = PhaseSchedule::from_id(cfg.schedule_id)?;
    let mut phases = vec![0.0; cfg.seq_len];
    fill_phases(schedule, mix64(example_seed, PHASE_STREAM), &mut phases);
    let mut values = vec![0.0f32; cfg.seq_len];
    fill_samples(p, &phases, example_seed, &mut values);
    Ok(QuadratureSequence {
        values,
        schedule_id: cfg.schedule_id,
    })
}

fn fill_samples(p: &StateParams, phases: &[f64], example_seed: u64, out: &mut [f32]) {
    let mut normals = NormalStream::new(mix64(example_seed, SAMPLE_STREAM));
    for (x, &phi) in out.iter_mut().zip(phases) {
        let sd = quadrature_variance(p, phi).sqrt();
        let v = loop {
            let v = sd * normals.next();
            if v.abs() <= SAMPLE_LIMIT {
                break v;
            }
        };
        *x = v as f32;
    }
}

/// Ground-truth label of example `example_seed`: squeezing S and excess E
/// uniform on their ranges, anti-squeezing S + E, θ uniform on [0, π).
pub fn sample_label(cfg: &GenConfig, example_seed: u64) -> Result<StateParams> {
    let mut rng = CounterRng::new(mix64(example_seed, LABEL_STREAM));
    let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
    let squeezing_db = lerp(cfg.squeezing_db, rng.uniform());
    let excess = lerp(cfg.excess_db, rng.uniform());
    let theta = PI * rng.uniform();
    params_from_db(
        &DbLevels {
            squeezing_db,
            antisqueezing_db: squeezing_db + excess,
        },
        theta,
    )
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let schedule = PhaseSchedule::from_id(cfg.schedule_id)?;
    let n = cfg.n_examples;
    let mut shared = vec![0.0; cfg.seq_len];
    fill_phases(PhaseSchedule::Linear, 0, &mut shared);

    let mut labels = vec![StateParams::VACUUM; n];
    let mut values = vec![0.0f32; n * cfg.seq_len];
    labels
        .par_iter_mut()
        .zip(values.par_chunks_mut(cfg.seq_len))
        .enumerate()
        .try_for_each_init(
            || vec![0.0; cfg.seq_len],
            |phases, (i, (label, out))| -> Result<()> {
                let seed = example_seed(cfg.global_seed, i as u64);
                *label = sample_label(cfg, seed)?;
                let phases: &[f64] = match schedule {
                    PhaseSchedule::Linear => &shared,
                    PhaseSchedule::Random => {
                        fill_phases(schedule, mix64(seed, PHASE_STREAM), phases);
                        phases
                    }
                };
                fill_samples(label, phases, seed, out);
                Ok(())
            },
        )?;
    Ok(Dataset::from_parts(
        cfg.seq_len,
        cfg.schedule_id,
        labels,
        values,
    ))
}
