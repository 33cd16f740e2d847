//! End-to-end tomography: engines, fidelity sweeps and reconstruction.

mod engine;
mod recon;
mod report;

pub use engine::{estimate_params, Engine, EngineKind, EngineScratch, Estimator};
pub use recon::{
    density_to_text, photon_report, reconstruct, write_density_text, ReconOptions,
    ReconstructionBundle, WignerGrid, WignerTable,
};
pub use report::{
    estimate_all, evaluate_fidelity_sweep, BinStats, ExampleRecord, FidelityReport, BIN_RANGE_DB,
    DEFAULT_BINS,
};
