//! Semantic-to-visual feature GAN: a noise-conditioned generator, a critic
//! with an auxiliary classifier head, triplet regularisation and the
//! adversarial training loop.

mod discriminator;
mod generator;
pub mod loss;
pub mod objective;
mod scaler;
mod train;

pub use discriminator::{Discriminator, DiscriminatorConfig, DiscriminatorOutput};
pub use generator::{Generator, GeneratorCache, GeneratorConfig, NoiseMode};
pub use scaler::MinMaxScaler;
pub use train::{train_gan, GanModel, GanTrainConfig, TrainLog, TrainLogEntry, TrainingData, ValidationProbe};
