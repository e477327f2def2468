//! Denoisers behind a common v-prediction interface.

mod analytic;
pub mod checkpoint;
mod optim;
mod toy;
mod train;

pub use analytic::GaussianDenoiser;
pub use optim::{AdamW, Ema, LrSchedule};
pub use toy::{Example, ToyConfig, ToyDenoiser};
pub use train::{
    finetune, train, IterationStats, TrainConfig, TrainOutcome, TrainingSet, TrainingItem,
};

use crate::diffusion::NoiseLevel;
use crate::error::Result;
use crate::latent::Latent;

/// A v-prediction model `f(z_t, t, condition)`.
///
/// Implementations return a latent of the input's shape and finite values
/// for finite input. `condition` is an optional class label; `None` asks for
/// the unconditional prediction.
pub trait Denoiser: Send + Sync {
    fn predict_v(&self, z_t: &Latent, level: NoiseLevel, condition: Option<u32>) -> Result<Latent>;

    /// Clean estimate `alpha * z_t - sigma * v`.
    fn predict_x0(&self, z_t: &Latent, level: NoiseLevel, condition: Option<u32>) -> Result<Latent> {
        let v = self.predict_v(z_t, level, condition)?;
        z_t.lincomb(level.alpha, &v, -level.sigma)
    }
}

/// Closed-form Gaussian denoiser; see [`GaussianDenoiser::new`].
pub fn analytic_gaussian_denoiser(mu0: Vec<f64>, cov0: Vec<Vec<f64>>) -> Result<GaussianDenoiser> {
    GaussianDenoiser::new(mu0, cov0)
}

/// Untrained residual network; see [`ToyDenoiser::new`].
pub fn toy_denoiser(
    layers: usize,
    width: usize,
    latent_channels: usize,
    context_frames: usize,
    n_conditions: usize,
    seed: u64,
) -> Result<ToyDenoiser> {
    ToyDenoiser::new(ToyConfig {
        layers,
        width,
        latent_channels,
        context_frames,
        n_conditions,
        time_embedding: ToyConfig::DEFAULT_TIME_EMBEDDING,
        seed,
    })
}
