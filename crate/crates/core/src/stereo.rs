//! Mid/side stereo parametrization.
//!
//! `mid = L + R`, `side = L - R`, inverted by `L = (mid + side) / 2`,
//! `R = (mid - side) / 2`. The round trip is bit-exact whenever `L + R` and
//! `L - R` are exactly representable, which holds for every sample on a PCM
//! grid of up to 32 bits.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

fn require_stereo(audio: &AudioBuffer, what: &str) -> Result<()> {
    if audio.n_channels() != 2 {
        return Err(Error::Domain(format!(
            "{what} needs 2 channels, got {}",
            audio.n_channels()
        )));
    }
    Ok(())
}

/// Maps left/right to mid/side (channel 0 = mid, channel 1 = side).
pub fn to_mid_side(audio: &AudioBuffer) -> Result<AudioBuffer> {
    require_stereo(audio, "mid/side encoding")?;
    let (l, r) = (audio.channel(0), audio.channel(1));
    let mid = l.iter().zip(r).map(|(a, b)| a + b).collect();
    let side = l.iter().zip(r).map(|(a, b)| a - b).collect();
    AudioBuffer::stereo(audio.sample_rate(), mid, side)
}

/// Inverse of [`to_mid_side`].
pub fn from_mid_side(audio: &AudioBuffer) -> Result<AudioBuffer> {
    require_stereo(audio, "mid/side decoding")?;
    let (m, s) = (audio.channel(0), audio.channel(1));
    let left = m.iter().zip(s).map(|(a, b)| (a + b) * 0.5).collect();
    let right = m.iter().zip(s).map(|(a, b)| (a - b) * 0.5).collect();
    AudioBuffer::stereo(audio.sample_rate(), left, right)
}
