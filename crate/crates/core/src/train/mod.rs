//! Optimization consumers of the latent distance: particle flow and a small
//! dense auto-encoder.

pub mod adam;
pub mod checkpoint;
pub mod data;
pub mod flow;
pub mod mlp;
pub mod vae;

pub use adam::{Adam, AdamConfig};
pub use flow::{particle_flow, FlowConfig, FlowInit, FlowResult};
pub use mlp::{Activation, Dense, Mlp};
pub use vae::{
    batch_loss_and_gradient, dense_backward, dense_forward, evaluate, generate, train_from,
    xsvae_train, Architecture, BatchLoss, EpochLog, LossMode, TrainConfig, TrainState,
};
