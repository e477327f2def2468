//! Deterministic invertible audio codec.
//!
//! Stereo input is rotated into orthonormal mid/side (`(L ± R) / √2`), each
//! channel is cut into frames of `frame_size` samples, and every frame is
//! projected onto an orthonormal basis. Coefficients are interleaved by basis
//! index across channels (`[c0_k0, c1_k0, c0_k1, ...]`) and the first
//! `latent_channels` of them form the latent frame, so truncation drops the
//! highest basis functions of every channel first. With
//! `latent_channels == frame_size * audio_channels` the codec is an exact
//! orthonormal map and Parseval holds for the discarded part.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::latent::Latent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BlockTransform {
    /// Orthonormal DCT-II.
    #[default]
    Dct,
    /// Raw samples; frame coefficients are the time-domain samples.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub sample_rate: u32,
    pub frame_rate: u32,
    pub audio_channels: usize,
    pub latent_channels: usize,
    #[serde(default)]
    pub transform: BlockTransform,
}

impl CodecConfig {
    pub fn new(
        sample_rate: u32,
        frame_rate: u32,
        audio_channels: usize,
        latent_channels: usize,
        transform: BlockTransform,
    ) -> Result<Self> {
        let cfg = Self {
            sample_rate,
            frame_rate,
            audio_channels,
            latent_channels,
            transform,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 8 kHz, 40 Hz frames (200 samples), 16 latent channels.
    pub fn desk_default(audio_channels: usize) -> Self {
        Self {
            sample_rate: 8_000,
            frame_rate: 40,
            audio_channels,
            latent_channels: 16,
            transform: BlockTransform::Dct,
        }
    }

    /// 48 kHz at 40 Hz frames with 256 latent channels.
    pub fn studio(audio_channels: usize) -> Self {
        Self {
            sample_rate: 48_000,
            frame_rate: 40,
            audio_channels,
            latent_channels: 256,
            transform: BlockTransform::Dct,
        }
    }

    /// Same config with every coefficient kept.
    pub fn full_rank(&self) -> Self {
        Self {
            latent_channels: self.coefficients_per_frame(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || self.frame_rate == 0 {
            return Err(Error::Config("sample and frame rates must be positive".into()));
        }
        if self.sample_rate % self.frame_rate != 0 {
            return Err(Error::Config(format!(
                "sample rate {} is not divisible by frame rate {}",
                self.sample_rate, self.frame_rate
            )));
        }
        if !(1..=2).contains(&self.audio_channels) {
            return Err(Error::Config(format!(
                "audio channels must be 1 or 2, got {}",
                self.audio_channels
            )));
        }
        if self.latent_channels == 0 || self.latent_channels > self.coefficients_per_frame() {
            return Err(Error::Config(format!(
                "latent channels must be in 1..={} (frame size x audio channels), got {}",
                self.coefficients_per_frame(),
                self.latent_channels
            )));
        }
        Ok(())
    }

    pub fn frame_size(&self) -> usize {
        (self.sample_rate / self.frame_rate) as usize
    }

    pub fn coefficients_per_frame(&self) -> usize {
        self.frame_size() * self.audio_channels
    }

    pub fn is_full_rank(&self) -> bool {
        self.latent_channels == self.coefficients_per_frame()
    }

    /// Number of latent frames needed for `samples` audio samples.
    pub fn frames_for_samples(&self, samples: usize) -> usize {
        samples.div_ceil(self.frame_size())
    }

    /// Whole frames in `seconds`; errors unless the duration is frame aligned.
    pub fn frames_for_seconds(&self, seconds: f64) -> Result<usize> {
        let frames = seconds * self.frame_rate as f64;
        let rounded = frames.round();
        if (frames - rounded).abs() > 1e-6 || rounded < 0.0 {
            return Err(Error::Config(format!(
                "{seconds} s is not a whole number of {} Hz frames",
                self.frame_rate
            )));
        }
        Ok(rounded as usize)
    }
}

/// Audio <-> latent mapping. Implementations must be deterministic.
pub trait LatentCodec {
    fn config(&self) -> &CodecConfig;
    fn encode(&self, audio: &AudioBuffer) -> Result<Latent>;
    fn decode(&self, latent: &Latent) -> Result<AudioBuffer>;
}

/// The default block-transform codec.
#[derive(Debug, Clone)]
pub struct BlockCodec {
    cfg: CodecConfig,
    /// `frame_size x frame_size`, row `k` is basis function `k`.
    basis: Vec<f64>,
}

impl BlockCodec {
    pub fn new(cfg: CodecConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.frame_size();
        let basis = match cfg.transform {
            BlockTransform::Dct => dct_basis(n),
            BlockTransform::Identity => {
                let mut b = vec![0.0; n * n];
                (0..n).for_each(|i| b[i * n + i] = 1.0);
                b
            }
        };
        Ok(Self { cfg, basis })
    }

    fn to_coding_channels(&self, audio: &AudioBuffer) -> Vec<Vec<f64>> {
        if audio.n_channels() == 2 {
            let (l, r) = (audio.channel(0), audio.channel(1));
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                l.iter().zip(r).map(|(a, b)| (a + b) * s).collect(),
                l.iter().zip(r).map(|(a, b)| (a - b) * s).collect(),
            ]
        } else {
            vec![audio.channel(0).to_vec()]
        }
    }

    fn from_coding_channels(&self, mut chans: Vec<Vec<f64>>) -> Result<AudioBuffer> {
        if chans.len() == 2 {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let side = chans.pop().unwrap();
            let mid = chans.pop().unwrap();
            let left = mid.iter().zip(&side).map(|(m, d)| (m + d) * s).collect();
            let right = mid.iter().zip(&side).map(|(m, d)| (m - d) * s).collect();
            AudioBuffer::stereo(self.cfg.sample_rate, left, right)
        } else {
            AudioBuffer::new(self.cfg.sample_rate, chans)
        }
    }
}

impl LatentCodec for BlockCodec {
    fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    fn encode(&self, audio: &AudioBuffer) -> Result<Latent> {
        let cfg = &self.cfg;
        if audio.sample_rate() != cfg.sample_rate {
            return Err(Error::Config(format!(
                "audio is {} Hz but the codec expects {} Hz",
                audio.sample_rate(),
                cfg.sample_rate
            )));
        }
        if audio.n_channels() != cfg.audio_channels {
            return Err(Error::Shape(format!(
                "audio has {} channels but the codec expects {}",
                audio.n_channels(),
                cfg.audio_channels
            )));
        }
        let fs = cfg.frame_size();
        let n_frames = cfg.frames_for_samples(audio.len());
        let pad = n_frames * fs - audio.len();
        let chans = self.to_coding_channels(audio);
        let n_ch = chans.len();
        let k = cfg.latent_channels;
        let mut data = vec![0.0; n_frames * k];
        let mut block = vec![0.0; fs];
        for f in 0..n_frames {
            for (c, chan) in chans.iter().enumerate() {
                let start = f * fs;
                let end = (start + fs).min(chan.len());
                block[..end - start].copy_from_slice(&chan[start..end]);
                block[end - start..].iter_mut().for_each(|v| *v = 0.0);
                // Coefficient j of the latent frame is basis index j / n_ch of channel j % n_ch.
                for j in (c..k).step_by(n_ch) {
                    let row = &self.basis[(j / n_ch) * fs..(j / n_ch + 1) * fs];
                    data[f * k + j] = row.iter().zip(&block).map(|(b, x)| b * x).sum();
                }
            }
        }
        let mut latent = Latent::from_frames(k, n_frames, cfg.frame_rate as f64, data)?;
        latent.set_pad_samples(pad);
        Ok(latent)
    }

    fn decode(&self, latent: &Latent) -> Result<AudioBuffer> {
        let cfg = &self.cfg;
        if latent.n_channels() != cfg.latent_channels {
            return Err(Error::Shape(format!(
                "latent has {} channels but the codec produces {}",
                latent.n_channels(),
                cfg.latent_channels
            )));
        }
        if latent.frame_rate() != cfg.frame_rate as f64 {
            return Err(Error::Shape(format!(
                "latent frame rate {} does not match codec frame rate {}",
                latent.frame_rate(),
                cfg.frame_rate
            )));
        }
        let fs = cfg.frame_size();
        let n_ch = cfg.audio_channels;
        let k = cfg.latent_channels;
        let total = latent.n_frames() * fs;
        if latent.pad_samples() > total {
            return Err(Error::Shape("pad exceeds latent duration".into()));
        }
        let mut chans = vec![vec![0.0; total]; n_ch];
        for f in 0..latent.n_frames() {
            let frame = latent.frame(f);
            for (j, &coef) in frame.iter().enumerate().take(k) {
                let (c, b) = (j % n_ch, j / n_ch);
                let row = &self.basis[b * fs..(b + 1) * fs];
                let out = &mut chans[c][f * fs..(f + 1) * fs];
                for (o, r) in out.iter_mut().zip(row) {
                    *o += coef * r;
                }
            }
        }
        let keep = total - latent.pad_samples();
        chans.iter_mut().for_each(|c| c.truncate(keep));
        self.from_coding_channels(chans)
    }
}

/// Encodes with a freshly built [`BlockCodec`].
pub fn encode(audio: &AudioBuffer, cfg: &CodecConfig) -> Result<Latent> {
    BlockCodec::new(cfg.clone())?.encode(audio)
}

/// Decodes with a freshly built [`BlockCodec`].
pub fn decode(latent: &Latent, cfg: &CodecConfig) -> Result<AudioBuffer> {
    BlockCodec::new(cfg.clone())?.decode(latent)
}

fn dct_basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            b[k * n + i] =
                scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / nf).cos();
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from_seed};

    fn random_audio(channels: usize, len: usize, sr: u32, seed: u64) -> AudioBuffer {
        let mut rng = rng_from_seed(seed);
        AudioBuffer::new(
            sr,
            (0..channels)
                .map(|_| gaussian_vec(&mut rng, len).iter().map(|x| 0.3 * x).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn frame_count_at_studio_rate() {
        let cfg = CodecConfig::studio(1);
        assert_eq!(cfg.frame_size(), 1200);
        assert_eq!(cfg.frames_for_samples(13 * 48_000), 520);
        let z = encode(&AudioBuffer::silence(48_000, 1, 13 * 48_000).unwrap(), &cfg).unwrap();
        assert_eq!(z.n_frames(), 520);
        assert_eq!(z.n_channels(), 256);
    }

    #[test]
    fn silence_encodes_to_zero_and_back() {
        let cfg = CodecConfig::desk_default(2);
        let z = encode(&AudioBuffer::silence(8000, 2, 8000).unwrap(), &cfg).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        let y = decode(&Latent::zeros(16, 10, 40.0), &cfg).unwrap();
        assert_eq!(y.len(), 2000);
        assert!(y.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn full_rank_round_trip() {
        for (channels, transform) in [(1, BlockTransform::Dct), (2, BlockTransform::Dct), (2, BlockTransform::Identity)] {
            let cfg = CodecConfig::new(8000, 40, channels, 200 * channels, transform).unwrap();
            let x = random_audio(channels, 8000, 8000, 3);
            let y = decode(&encode(&x, &cfg).unwrap(), &cfg).unwrap();
            let err = x
                .channels()
                .iter()
                .flatten()
                .zip(y.channels().iter().flatten())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-9, "max error {err}");
        }
    }

    #[test]
    fn unaligned_audio_is_padded_and_trimmed() {
        let cfg = CodecConfig::desk_default(1).full_rank();
        let x = random_audio(1, 1234, 8000, 5);
        let z = encode(&x, &cfg).unwrap();
        assert_eq!(z.n_frames(), 7);
        assert_eq!(z.pad_samples(), 7 * 200 - 1234);
        let y = decode(&z, &cfg).unwrap();
        assert_eq!(y.len(), 1234);
    }

    #[test]
    fn truncation_error_equals_discarded_energy() {
        // Brute force: the discarded coefficients come from a full-rank encode.
        let full = CodecConfig::desk_default(2).full_rank();
        let half = CodecConfig { latent_channels: 200, ..full.clone() };
        let x = random_audio(2, 4000, 8000, 11);
        let all = encode(&x, &full).unwrap();
        let discarded: f64 = (0..all.n_frames())
            .map(|f| all.frame(f)[200..].iter().map(|v| v * v).sum::<f64>())
            .sum();
        let y = decode(&encode(&x, &half).unwrap(), &half).unwrap();
        let err: f64 = x
            .channels()
            .iter()
            .flatten()
            .zip(y.channels().iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!((err - discarded).abs() <= 1e-9 * discarded.max(1.0), "{err} vs {discarded}");
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            CodecConfig::new(44_100, 40, 1, 16, BlockTransform::Dct),
            Err(Error::Config(_))
        ));
        assert!(CodecConfig::new(8000, 40, 1, 201, BlockTransform::Dct).is_err());
        assert!(CodecConfig::new(8000, 40, 2, 400, BlockTransform::Dct).is_ok());
        let cfg = CodecConfig::desk_default(1);
        assert!(matches!(decode(&Latent::zeros(8, 4, 40.0), &cfg), Err(Error::Shape(_))));
        let stereo = AudioBuffer::silence(8000, 2, 200).unwrap();
        assert!(matches!(encode(&stereo, &cfg), Err(Error::Shape(_))));
        assert_eq!(cfg.frames_for_seconds(13.0).unwrap(), 520);
        assert!(cfg.frames_for_seconds(0.01).is_err());
    }
}
