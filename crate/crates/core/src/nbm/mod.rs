//! Autoencoder normal-behavior model: architecture, training with early
//! stopping, anomaly scoring, far-out-outlier threshold, and fine-tuning.

pub mod autoencoder;
pub mod model;
pub mod train;

pub use autoencoder::{AeGrads, AeTrace, Autoencoder, AutoencoderConfig, ModelError};
pub use model::{CheckpointError, NbmMeta, NbmModel, NBM_CHECKPOINT_VERSION};
pub use train::{
    classify, compute_threshold, mean_mse, patience_for, score, score_batch, train_autoencoder,
    NbmError, NbmTrainRegime, TrainOutcome,
};
