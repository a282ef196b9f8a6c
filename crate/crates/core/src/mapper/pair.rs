//! The assembled domain-mapping network: both generators, both critics,
//! EMA generator copies, loss weights, and mask targets, with checkpointing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::window::WindowSample;
use crate::nbm::CheckpointError;
use crate::scalar::{sc, Scalar};

use super::critic::{Discriminator, DiscriminatorConfig};
use super::losses::{LossWeights, MaskTargets};
use super::tcn::{GeneratorConfig, TcnGenerator};

pub const MAPPER_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct MapperConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperMeta {
    pub source_id: String,
    pub target_id: String,
    pub scarcity_weeks: Option<u32>,
    pub seed: u64,
    pub best_iter: usize,
    pub iters_run: usize,
    pub best_early_stop_score: f64,
}

#[derive(Debug, Clone)]
pub struct MapperPair<S> {
    pub config: MapperConfig,
    pub weights: LossWeights,
    pub targets: MaskTargets,
    pub g_st: TcnGenerator<S>,
    pub g_ts: TcnGenerator<S>,
    pub disc_s: Discriminator<S>,
    pub disc_t: Discriminator<S>,
    /// Exponential moving averages of the generators, used at evaluation
    /// time and for early stopping.
    pub ema_st: TcnGenerator<S>,
    pub ema_ts: TcnGenerator<S>,
    pub meta: MapperMeta,
}

impl<S: Scalar> MapperPair<S> {
    /// Seed-deterministic assembly; EMA copies start equal to the
    /// generators.
    pub fn build(
        config: &MapperConfig,
        weights: LossWeights,
        targets: MaskTargets,
        seed: u64,
        source_id: &str,
        target_id: &str,
    ) -> Result<Self, String> {
        weights.validate()?;
        let g_st = TcnGenerator::new(&config.generator, seed, "gen-st")?;
        let g_ts = TcnGenerator::new(&config.generator, seed, "gen-ts")?;
        let disc_s = Discriminator::new(&config.discriminator, seed, "disc-s")?;
        let disc_t = Discriminator::new(&config.discriminator, seed, "disc-t")?;
        Ok(Self {
            config: config.clone(),
            weights,
            targets,
            ema_st: g_st.clone(),
            ema_ts: g_ts.clone(),
            g_st,
            g_ts,
            disc_s,
            disc_t,
            meta: MapperMeta {
                source_id: source_id.into(),
                target_id: target_id.into(),
                scarcity_weeks: None,
                seed,
                best_iter: 0,
                iters_run: 0,
                best_early_stop_score: f64::INFINITY,
            },
        })
    }

    /// `w_ema <- decay * w_ema + (1 - decay) * w` for every generator
    /// parameter. A decay of 0 copies the training weights exactly.
    pub fn ema_update(&mut self, decay: f64) {
        assert!((0.0..1.0).contains(&decay), "decay must be in [0, 1)");
        let d = sc::<S>(decay);
        let one_minus = S::one() - d;
        for (ema, live) in [(&mut self.ema_st, &self.g_st), (&mut self.ema_ts, &self.g_ts)] {
            let src = live.params();
            for (e, w) in ema.params_mut().into_iter().zip(src) {
                for (ev, wv) in e.iter_mut().zip(w) {
                    *ev = d * *ev + one_minus * *wv;
                }
            }
        }
    }

    /// Map target-domain windows to the source domain with the EMA
    /// generator; shapes and metadata are preserved and the output is
    /// directly consumable by the source NBM.
    pub fn map_to_source(&self, windows: &[WindowSample<S>]) -> Vec<WindowSample<S>> {
        windows
            .iter()
            .map(|w| WindowSample {
                values: self.ema_ts.forward(&w.values),
                start_timestamp: w.start_timestamp,
                contains_incident: w.contains_incident,
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let dump = |g: &TcnGenerator<S>| -> Vec<(String, Vec<f64>)> {
            g.param_names()
                .into_iter()
                .zip(g.params())
                .map(|(n, p)| (n, p.iter().map(|v| v.to_f64_c()).collect()))
                .collect()
        };
        let dump_d = |d: &Discriminator<S>| -> Vec<(String, Vec<f64>)> {
            d.param_names()
                .into_iter()
                .zip(d.params())
                .map(|(n, p)| (n, p.iter().map(|v| v.to_f64_c()).collect()))
                .collect()
        };
        let ckpt = MapperCheckpoint {
            version: MAPPER_CHECKPOINT_VERSION,
            kind: "mapper".into(),
            scalar: S::KIND.into(),
            config: self.config.clone(),
            weights: self.weights,
            targets: self.targets.clone(),
            metadata: self.meta.clone(),
            g_st: dump(&self.g_st),
            g_ts: dump(&self.g_ts),
            ema_st: dump(&self.ema_st),
            ema_ts: dump(&self.ema_ts),
            disc_s: dump_d(&self.disc_s),
            disc_t: dump_d(&self.disc_t),
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
        let ckpt: MapperCheckpoint =
            serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if ckpt.version != MAPPER_CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                got: ckpt.version,
                supported: MAPPER_CHECKPOINT_VERSION,
            });
        }
        if ckpt.kind != "mapper" {
            return Err(CheckpointError::Kind {
                got: ckpt.kind,
                expected: "mapper".into(),
            });
        }
        let mut pair = Self::build(
            &ckpt.config,
            ckpt.weights,
            ckpt.targets.clone(),
            ckpt.metadata.seed,
            &ckpt.metadata.source_id,
            &ckpt.metadata.target_id,
        )
        .map_err(CheckpointError::Malformed)?;
        restore_gen(&mut pair.g_st, &ckpt.g_st)?;
        restore_gen(&mut pair.g_ts, &ckpt.g_ts)?;
        restore_gen(&mut pair.ema_st, &ckpt.ema_st)?;
        restore_gen(&mut pair.ema_ts, &ckpt.ema_ts)?;
        restore_disc(&mut pair.disc_s, &ckpt.disc_s)?;
        restore_disc(&mut pair.disc_t, &ckpt.disc_t)?;
        pair.meta = ckpt.metadata;
        Ok(pair)
    }
}

fn restore_params<S: Scalar>(
    names: Vec<String>,
    mut slots: Vec<&mut Vec<S>>,
    stored: &[(String, Vec<f64>)],
) -> Result<(), CheckpointError> {
    if names.len() != stored.len() {
        return Err(CheckpointError::Malformed(format!(
            "expected {} parameter tensors, got {}",
            names.len(),
            stored.len()
        )));
    }
    for ((want, slot), (name, values)) in names.iter().zip(slots.iter_mut()).zip(stored) {
        if want != name {
            return Err(CheckpointError::Malformed(format!(
                "parameter {name:?} does not match expected {want:?}"
            )));
        }
        if slot.len() != values.len() {
            return Err(CheckpointError::Malformed(format!(
                "parameter {name} has {} values, expected {}",
                values.len(),
                slot.len()
            )));
        }
        **slot = values.iter().map(|v| S::from_f64_c(*v)).collect();
    }
    Ok(())
}

fn restore_gen<S: Scalar>(g: &mut TcnGenerator<S>, stored: &[(String, Vec<f64>)]) -> Result<(), CheckpointError> {
    restore_params(g.param_names(), g.params_mut(), stored)
}

fn restore_disc<S: Scalar>(d: &mut Discriminator<S>, stored: &[(String, Vec<f64>)]) -> Result<(), CheckpointError> {
    restore_params(d.param_names(), d.params_mut(), stored)
}

#[derive(Serialize, Deserialize)]
struct MapperCheckpoint {
    version: u32,
    kind: String,
    scalar: String,
    config: MapperConfig,
    weights: LossWeights,
    targets: MaskTargets,
    metadata: MapperMeta,
    g_st: Vec<(String, Vec<f64>)>,
    g_ts: Vec<(String, Vec<f64>)>,
    ema_st: Vec<(String, Vec<f64>)>,
    ema_ts: Vec<(String, Vec<f64>)>,
    disc_s: Vec<(String, Vec<f64>)>,
    disc_t: Vec<(String, Vec<f64>)>,
}
