//! Prompt-conditioned audio extension and morphing in a latent diffusion space.
//!
//! The crate is organised bottom-up:
//!
//! * [`audio`], [`wav`], [`stereo`]: waveform data model and I/O.
//! * [`latent`], [`codec`], [`mask`]: the latent domain, the invertible block
//!   codec that maps audio into it, and the masking function that pins prompt
//!   frames into a generation.
//! * [`diffusion`]: variance-preserving v-prediction process, the prompt
//!   guidance combiner and the masked sampler.
//! * [`denoisers`]: the closed-form Gaussian denoiser and a small trainable
//!   residual network with its training loop.
//! * [`noisefloor`]: stationary noise-floor corpus synthesis.
//! * [`eval`]: Fréchet distance, embedders and the convolutional noise
//!   matching baseline.

pub mod audio;
pub mod codec;
pub mod denoisers;
pub mod diffusion;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod latent;
pub mod mask;
pub mod noisefloor;
pub mod preprocess;
pub mod rng;
pub mod stereo;
pub mod wav;

pub use audio::AudioBuffer;
pub use codec::{BlockCodec, BlockTransform, CodecConfig, LatentCodec};
pub use error::{Error, Result};
pub use latent::Latent;
pub use mask::{apply_mask, postprocess, MaskMode, MaskSpec};

/// Version of this library, recorded in run stamps and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
