//! Content-preserving domain mapping between turbine domains: TCN
//! generators, convolutional critics, GAN-QP adversarial losses, cycle /
//! zero-state / rated-power consistency losses, anomaly augmentation, EMA
//! generator tracking, and the full training loop.

pub mod augment;
pub mod critic;
pub mod losses;
pub mod pair;
pub mod tcn;
pub mod train;

pub use augment::{augment_anomalies, augment_tensors};
pub use critic::{DiscGrads, Discriminator, DiscriminatorConfig};
pub use losses::{
    cycle_loss, gan_qp_critic_objective, gan_qp_generator_objective, rated_loss, zero_loss,
    BatchMasks, Domain, LossError, LossWeights, MapFn, MaskTargets, StateMask,
};
pub use pair::{MapperConfig, MapperMeta, MapperPair, MAPPER_CHECKPOINT_VERSION};
pub use tcn::{GenGrads, GeneratorConfig, TcnBlockConfig, TcnGenerator};
pub use train::{
    early_stop_score, generator_gradients, train_mapper, GenBackward, GenLossValues, IterMetrics,
    MapperError, MapperTrainLog, MapperTrainRegime,
};
