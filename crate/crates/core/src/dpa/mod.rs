//! The distributional principal autoencoder: encoder, noise-fed decoder and
//! the nested energy-score objective over every latent width.

mod energy;
mod model;
mod train;

pub use energy::{energy_score_terms, EnergyScoreEstimate};
pub use model::{DpaConfig, DpaModel, Standardizer};
pub use train::{train_dpa, LossCurves, LossRecord, TrainConfig, TrainOutcome};
