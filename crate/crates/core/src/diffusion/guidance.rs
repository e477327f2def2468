use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Latent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub gamma: f64,
}

impl GuidanceConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!("guidance scale must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { gamma: 5.0 }
    }
}

/// Audio prompt guidance: `v_uncond + gamma * (v_masked - v_uncond)`.
///
/// Evaluated as `(1 - gamma) * v_uncond + gamma * v_masked` so that
/// `gamma = 0` and `gamma = 1` return the respective branch bit for bit.
pub fn apg_combine(v_uncond: &Latent, v_masked: &Latent, gamma: f64) -> Result<Latent> {
    v_uncond.check_same_shape(v_masked, "guidance branches")?;
    let keep = 1.0 - gamma;
    let mut out = v_uncond.clone();
    for (o, m) in out.data_mut().iter_mut().zip(v_masked.data()) {
        *o = keep * *o + gamma * m;
    }
    Ok(out)
}
