//! The pixel-wise 1D convolutional classifier: kernels, parameters,
//! forward/backward passes and checkpoints.

pub mod kernels;
mod network;
mod params;
mod scalar;

pub use network::{apply_running_stats, backward, forward, predict, predict_proba, BackwardResult, ForwardTrace, Mode};
pub use params::{
    load_checkpoint, save_checkpoint, ArchConfig, Conv, Dense, Gradients, ModelParams, ResidualParams, CHECKPOINT_VERSION,
    CONV1_FILTERS, CONV2_FILTERS, FEATURE_LEN, FLAT_LEN, HIDDEN, INPUT_LEN, OUTPUT_CLASSES, RES1_CHANNELS, RES2_CHANNELS,
};
pub use scalar::{gemm, MatRef, Scalar};

pub(crate) use network::argmax_rows;
