//! Raw-waveform WGAN-GP: generator and critic builders, objectives,
//! per-class training and sampling.

mod arch;
mod loss;
mod train;

pub use arch::{build_critic, build_generator, ArchConfig, LadderStep, Width};
pub use loss::{
    critic_loss, generator_loss, gradient_penalty, gradient_penalty_with_eps, minimax_value, minimax_value_estimate,
    CriticLoss, PROBABILITY_FLOOR,
};
pub use train::{
    condition_clips, sample_latent, train_gan, train_gan_with, write_training_log, EpochLog, Gan, GanTrainConfig,
    TrainedGan,
};
