//! Inference engines behind a common sequence → parameters contract.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{decode_head, load_model, Model, Workspace};
use crate::quant::{load_qmodel, QWorkspace, QuantizedModel};
use crate::StateParams;

/// Anything that maps a quadrature sequence to state parameters.
///
/// `Scratch` holds per-thread buffers so repeated calls do not allocate.
pub trait Estimator: Sync {
    type Scratch: Send;

    fn tag(&self) -> &str;
    fn input_len(&self) -> usize;
    fn scratch(&self) -> Self::Scratch;
    fn estimate_with(&self, seq: &[f32], scratch: &mut Self::Scratch) -> Result<StateParams>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Fp32,
    Int8,
}

impl EngineKind {
    pub fn tag(self) -> &'static str {
        match self {
            EngineKind::Fp32 => "fp32",
            EngineKind::Int8 => "int8",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp32" => Ok(EngineKind::Fp32),
            "int8" => Ok(EngineKind::Int8),
            other => Err(Error::Config(format!(
                "unknown engine {other:?} (expected fp32 or int8)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Engine {
    Fp32(Model),
    Int8(QuantizedModel),
}

pub enum EngineScratch {
    Fp32(Workspace<f32>),
    Int8(QWorkspace),
}

impl Engine {
    /// Loads a `.qnn` (fp32) or `.qnq` (int8) model file.
    pub fn load(kind: EngineKind, path: &Path) -> Result<Engine> {
        Ok(match kind {
            EngineKind::Fp32 => Engine::Fp32(load_model(path)?),
            EngineKind::Int8 => Engine::Int8(load_qmodel(path)?),
        })
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::Fp32(_) => EngineKind::Fp32,
            Engine::Int8(_) => EngineKind::Int8,
        }
    }

    /// Convenience single call that allocates its own scratch.
    pub fn estimate(&self, seq: &[f32]) -> Result<StateParams> {
        estimate_params(self, seq)
    }
}

impl Estimator for Engine {
    type Scratch = EngineScratch;

    fn tag(&self) -> &str {
        self.kind().tag()
    }

    fn input_len(&self) -> usize {
        match self {
            Engine::Fp32(m) => m.input_numel(),
            Engine::Int8(q) => q.input_numel(),
        }
    }

    fn scratch(&self) -> EngineScratch {
        match self {
            Engine::Fp32(m) => EngineScratch::Fp32(Workspace::new(m)),
            Engine::Int8(q) => EngineScratch::Int8(QWorkspace::new(q)),
        }
    }

    fn estimate_with(&self, seq: &[f32], scratch: &mut EngineScratch) -> Result<StateParams> {
        let head = match (self, scratch) {
            (Engine::Fp32(m), EngineScratch::Fp32(ws)) => m.forward_with(seq, ws)?,
            (Engine::Int8(q), EngineScratch::Int8(ws)) => q.qforward_with(seq, ws)?,
            _ => {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} scratch", self.tag()),
                    got: "scratch of the other engine".into(),
                })
            }
        };
        decode_head(&head)
    }
}

pub fn estimate_params<E: Estimator>(engine: &E, seq: &[f32]) -> Result<StateParams> {
    let mut scratch = engine.scratch();
    engine.estimate_with(seq, &mut scratch)
}
