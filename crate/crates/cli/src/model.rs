//! Denoiser selection for the generation commands.

use std::path::Path;

use anyhow::{Context, Result};
use genextend::codec::CodecConfig;
use genextend::denoisers::checkpoint::Checkpoint;
use genextend::denoisers::{Denoiser, GaussianDenoiser};
use genextend::eval::fit_stats;
use genextend::{Error, Latent};
use nalgebra::DMatrix;

/// Codec settings stored in a checkpoint's metadata by `train`.
pub fn checkpoint_codec(ck: &Checkpoint) -> Result<CodecConfig> {
    let codec = ck
        .meta
        .get("codec")
        .ok_or_else(|| Error::Checkpoint("checkpoint metadata has no codec settings".into()))?;
    Ok(serde_json::from_value(codec.clone()).map_err(|e| Error::Checkpoint(format!("codec settings: {e}")))?)
}

/// Loads a toy checkpoint, preferring its EMA weights.
pub fn load_toy(path: &Path) -> Result<(Box<dyn Denoiser>, CodecConfig, Checkpoint)> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let codec = checkpoint_codec(&ck)?;
    let model = match ck.ema_model()? {
        Some(m) => m,
        None => ck.model()?,
    };
    Ok((Box::new(model), codec, ck))
}

/// Per-frame Gaussian prior fitted to the prompt frames. The covariance is
/// loaded with `ridge` times its mean variance so short prompts stay
/// well-conditioned.
pub fn fit_prompt_prior(prompts: &[&Latent], ridge: f64) -> Result<GaussianDenoiser> {
    let frames: Vec<Vec<f64>> = prompts
        .iter()
        .flat_map(|p| (0..p.n_frames()).map(move |f| p.frame(f).to_vec()))
        .collect();
    let stats = fit_stats(&frames).context("fitting the prompt prior")?;
    let d = stats.dim();
    let load = ridge * (stats.cov.trace() / d as f64).max(f64::MIN_POSITIVE) + 1e-12;
    let cov = &stats.cov + DMatrix::identity(d, d) * load;
    Ok(GaussianDenoiser::from_matrix(stats.mean, cov)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use genextend::rng::rng_from_seed;

    #[test]
    fn prior_from_short_prompt_is_usable() {
        let p = Latent::gaussian(16, 5, 40.0, &mut rng_from_seed(1));
        let g = fit_prompt_prior(&[&p], 1e-3).unwrap();
        assert_eq!(g.dim(), 16);
    }

    #[test]
    fn single_frame_prompt_is_rejected() {
        let p = Latent::gaussian(4, 1, 40.0, &mut rng_from_seed(1));
        assert!(fit_prompt_prior(&[&p], 1e-3).is_err());
    }
}
