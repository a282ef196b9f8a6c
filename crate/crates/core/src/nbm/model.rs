//! Trained NBM bundle: autoencoder parameters, normalization statistics,
//! anomaly threshold, and training metadata, with a self-describing
//! single-file checkpoint format.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::normalize::NormalizationStats;
use crate::data::window::WindowSample;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::autoencoder::{Autoencoder, AutoencoderConfig};
use super::train::{
    classify, compute_threshold, score, score_batch, train_autoencoder, NbmError, NbmTrainRegime,
};

pub const NBM_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("unsupported checkpoint version {got} (supported: {supported})")]
    Version { got: u32, supported: u32 },
    #[error("checkpoint is of kind {got:?}, expected {expected:?}")]
    Kind { got: String, expected: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbmMeta {
    pub turbine_id: String,
    /// `None` for ground-truth (full data) training.
    pub scarcity_weeks: Option<u32>,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_mse: f64,
    /// Set when this model was fine-tuned from another NBM.
    pub fine_tuned_from: Option<String>,
}

#[derive(Debug, Clone)]
pub struct NbmModel<S> {
    pub net: Autoencoder<S>,
    pub norm: NormalizationStats,
    /// Anomaly threshold in normalized-error units, from validation scores.
    pub threshold: f64,
    pub meta: NbmMeta,
}

impl<S: Scalar> NbmModel<S> {
    /// Train a fresh NBM on filtered normal windows; the threshold comes
    /// from the best checkpoint's validation scores.
    pub fn train(
        config: &AutoencoderConfig,
        norm: &NormalizationStats,
        train: &[WindowSample<S>],
        validation: &[WindowSample<S>],
        regime: &NbmTrainRegime,
        turbine_id: &str,
        scarcity_weeks: Option<u32>,
    ) -> Result<Self, NbmError> {
        let net = Autoencoder::new(config, regime.seed)?;
        let outcome = train_autoencoder(net, train, validation, regime)?;
        let val_refs: Vec<&Tensor<S>> = validation.iter().map(|w| &w.values).collect();
        let val_scores = score_batch(&outcome.net, &val_refs, regime.grad_chunks);
        let threshold = compute_threshold(&val_scores)?;
        Ok(Self {
            net: outcome.net,
            norm: norm.clone(),
            threshold,
            meta: NbmMeta {
                turbine_id: turbine_id.to_string(),
                scarcity_weeks,
                seed: regime.seed,
                best_epoch: outcome.best_epoch,
                epochs_run: outcome.epochs_run,
                best_val_mse: outcome.best_val_mse,
                fine_tuned_from: None,
            },
        })
    }

    /// Continue gradient training from this model's parameters on scarce
    /// target data; the threshold is recomputed from the target validation
    /// scores. `max_epochs = 0` keeps the parameters identical and only
    /// refreshes the threshold.
    pub fn fine_tune(
        &self,
        target_train: &[WindowSample<S>],
        target_validation: &[WindowSample<S>],
        regime: &NbmTrainRegime,
        target_turbine_id: &str,
        scarcity_weeks: Option<u32>,
    ) -> Result<Self, NbmError> {
        if target_train.is_empty() {
            return Err(NbmError::EmptyTrainingSet);
        }
        let outcome = train_autoencoder(self.net.clone(), target_train, target_validation, regime)?;
        let val_refs: Vec<&Tensor<S>> = target_validation.iter().map(|w| &w.values).collect();
        let val_scores = score_batch(&outcome.net, &val_refs, regime.grad_chunks);
        let threshold = compute_threshold(&val_scores)?;
        Ok(Self {
            net: outcome.net,
            norm: self.norm.clone(),
            threshold,
            meta: NbmMeta {
                turbine_id: target_turbine_id.to_string(),
                scarcity_weeks,
                seed: regime.seed,
                best_epoch: outcome.best_epoch,
                epochs_run: outcome.epochs_run,
                best_val_mse: outcome.best_val_mse,
                fine_tuned_from: Some(self.meta.turbine_id.clone()),
            },
        })
    }

    pub fn score_window(&self, window: &WindowSample<S>) -> Result<f64, NbmError> {
        Ok(score(&self.net, &window.values)?.to_f64_c())
    }

    pub fn score_windows(&self, windows: &[WindowSample<S>]) -> Vec<f64> {
        let refs: Vec<&Tensor<S>> = windows.iter().map(|w| &w.values).collect();
        score_batch(&self.net, &refs, 4)
    }

    pub fn decide(&self, score: f64) -> bool {
        classify(score, self.threshold)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let params: Vec<(String, Vec<f64>)> = self
            .net
            .param_names()
            .into_iter()
            .zip(self.net.params())
            .map(|(name, p)| (name, p.iter().map(|v| v.to_f64_c()).collect()))
            .collect();
        let ckpt = NbmCheckpoint {
            version: NBM_CHECKPOINT_VERSION,
            kind: "nbm".into(),
            scalar: S::KIND.into(),
            config: self.net.config.clone(),
            normalization: self.norm.clone(),
            threshold: self.threshold,
            metadata: self.meta.clone(),
            params,
        };
        let io_err = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let json = serde_json::to_vec(&ckpt).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        std::fs::write(path, json).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: NbmCheckpoint =
            serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if ckpt.version != NBM_CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                got: ckpt.version,
                supported: NBM_CHECKPOINT_VERSION,
            });
        }
        if ckpt.kind != "nbm" {
            return Err(CheckpointError::Kind {
                got: ckpt.kind,
                expected: "nbm".into(),
            });
        }
        let mut net = Autoencoder::<S>::new(&ckpt.config, ckpt.metadata.seed)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let names = net.param_names();
        if names.len() != ckpt.params.len() {
            return Err(CheckpointError::Malformed(format!(
                "expected {} parameter tensors, got {}",
                names.len(),
                ckpt.params.len()
            )));
        }
        for (slot, (want, (name, values))) in names.iter().zip(&ckpt.params).enumerate() {
            if want != name {
                return Err(CheckpointError::Malformed(format!(
                    "parameter {slot} is {name:?}, expected {want:?}"
                )));
            }
            let target = &mut net.params_mut()[slot];
            if target.len() != values.len() {
                return Err(CheckpointError::Malformed(format!(
                    "parameter {name} has {} values, expected {}",
                    values.len(),
                    target.len()
                )));
            }
            **target = values.iter().map(|v| S::from_f64_c(*v)).collect();
        }
        Ok(Self {
            net,
            norm: ckpt.normalization,
            threshold: ckpt.threshold,
            meta: ckpt.metadata,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct NbmCheckpoint {
    version: u32,
    kind: String,
    scalar: String,
    config: AutoencoderConfig,
    normalization: NormalizationStats,
    threshold: f64,
    metadata: NbmMeta,
    params: Vec<(String, Vec<f64>)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nbm::autoencoder::AutoencoderConfig;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn mini_config() -> AutoencoderConfig {
        AutoencoderConfig {
            channels: 11,
            window: 24,
            filters: 4,
            bottleneck: 8,
            decoder_in: 2,
        }
    }

    fn norm_stats() -> NormalizationStats {
        NormalizationStats {
            min: [0.0; 11],
            max: [1.0; 11],
        }
    }

    fn noisy_windows(seed: u64, n: usize) -> Vec<WindowSample<f32>> {
        let mut rng = stream_rng(seed, "w");
        (0..n)
            .map(|_| WindowSample {
                values: Tensor::from_fn(11, 24, |c, t| {
                    ((c as f32) * 0.1 + (t as f32) * 0.05).sin() + rng.gen_range(-0.05..0.05)
                }),
                start_timestamp: 0,
                contains_incident: false,
            })
            .collect()
    }

    fn quick_regime(seed: u64, max_epochs: usize) -> NbmTrainRegime {
        NbmTrainRegime {
            batch_size: 8,
            patience: 5,
            max_epochs,
            seed,
            ..NbmTrainRegime::default()
        }
    }

    #[test]
    fn checkpoint_roundtrip_preserves_scores() {
        let train = noisy_windows(1, 12);
        let val = noisy_windows(2, 8);
        let model = NbmModel::<f32>::train(
            &mini_config(),
            &norm_stats(),
            &train,
            &val,
            &quick_regime(1, 10),
            "WT-A",
            None,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nbm.json");
        model.save(&path).unwrap();
        let loaded = NbmModel::<f32>::load(&path).unwrap();
        assert_eq!(loaded.threshold, model.threshold);
        assert_eq!(loaded.meta, model.meta);
        for w in &val {
            assert_eq!(
                loaded.score_window(w).unwrap(),
                model.score_window(w).unwrap(),
                "scores must be bit-identical after reload"
            );
        }
    }

    #[test]
    fn zero_epoch_fine_tune_keeps_parameters() {
        let train = noisy_windows(3, 12);
        let val = noisy_windows(4, 8);
        let source = NbmModel::<f32>::train(
            &mini_config(),
            &norm_stats(),
            &train,
            &val,
            &quick_regime(3, 10),
            "WT-A",
            None,
        )
        .unwrap();
        let target_val = noisy_windows(5, 8);
        let tuned = source
            .fine_tune(&train, &target_val, &quick_regime(7, 0), "WT-B", Some(2))
            .unwrap();
        assert_eq!(tuned.net, source.net, "no epochs means identical parameters");
        // but the threshold is recomputed on the target validation scores
        let scores = source.score_windows(&target_val);
        assert_eq!(tuned.threshold, compute_threshold(&scores).unwrap());
        assert_eq!(tuned.meta.fine_tuned_from.as_deref(), Some("WT-A"));
    }

    #[test]
    fn fine_tune_never_worsens_validation_error() {
        let source_train = noisy_windows(8, 12);
        let source_val = noisy_windows(9, 8);
        let source = NbmModel::<f32>::train(
            &mini_config(),
            &norm_stats(),
            &source_train,
            &source_val,
            &quick_regime(8, 15),
            "WT-A",
            None,
        )
        .unwrap();
        // target domain: shifted versions of the same windows
        let target_train: Vec<WindowSample<f32>> = noisy_windows(10, 12)
            .into_iter()
            .map(|mut w| {
                w.values = w.values.map(|v| v * 0.8 + 0.1);
                w
            })
            .collect();
        let target_val: Vec<WindowSample<f32>> = noisy_windows(11, 8)
            .into_iter()
            .map(|mut w| {
                w.values = w.values.map(|v| v * 0.8 + 0.1);
                w
            })
            .collect();
        let val_refs: Vec<&Tensor<f32>> = target_val.iter().map(|w| &w.values).collect();
        let before = super::super::train::mean_mse(&source.net, &val_refs, 4);
        let tuned = source
            .fine_tune(&target_train, &target_val, &quick_regime(12, 20), "WT-B", Some(2))
            .unwrap();
        let after = super::super::train::mean_mse(&tuned.net, &val_refs, 4);
        assert!(
            after <= before + 1e-12,
            "best-checkpoint selection cannot worsen target validation error ({before} -> {after})"
        );
    }

    #[test]
    fn same_seed_same_fine_tuned_parameters() {
        let train = noisy_windows(13, 10);
        let val = noisy_windows(14, 8);
        let source = NbmModel::<f32>::train(
            &mini_config(),
            &norm_stats(),
            &train,
            &val,
            &quick_regime(13, 8),
            "WT-A",
            None,
        )
        .unwrap();
        let a = source
            .fine_tune(&train, &val, &quick_regime(21, 6), "WT-B", Some(1))
            .unwrap();
        let b = source
            .fine_tune(&train, &val, &quick_regime(21, 6), "WT-B", Some(1))
            .unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.threshold, b.threshold);
    }
}
