//! Floating-point 1D convolutional regression network.

mod format;
pub mod kernels;
mod model;
mod train;

pub use format::{load_model, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub(crate) use format::{read_dim, read_spec, write_spec};
pub use model::{
    arch_layers, decode_head, head_from_raw, model_init, shape_walk, Layer, LayerSpec, Model,
    Network, Shape, Tensor, Workspace, DEFAULT_ARCH, HEAD_OUTPUTS,
};
pub use train::{
    loss, mean_loss, normalization_constants, split_indices, train, train_step, write_training_log,
    Adam, EpochLog, Gradients, LossWeights, TrainConfig, TrainOutcome, TrainScratch,
};
