//! Multi-head conditional GAN that predicts motion templates from frames.

mod inference;
mod loss;
mod networks;
mod params;
mod train;

pub use inference::{
    constant_l1, discriminator_features, evaluate, generate, generate_raw, mean_template, panel,
    probe, realism, DiscProbe, Evaluation,
};
pub use loss::{
    adversarial_losses, mean_l1, multimodal_reconstruction, sum_vars, AdversarialLosses,
    Reconstruction,
};
pub use networks::{
    DiscOutput, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, HEAD_BIAS_INIT,
    LEAKY_SLOPE, OUTPUT_EDGE,
};
pub use params::ParamSet;
pub use train::{
    metrics_csv, train, EpochMetrics, Model, TrainConfig, TrainData, Trainer, METRICS_HEADER,
};
