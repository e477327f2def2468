use crate::audio::AudioBuffer;
use crate::dsp::{fft, hann};
use crate::error::{Error, Result};

/// Lowest value any log-domain feature can take.
pub const FLOOR_DB: f64 = -80.0;

/// Maps audio to one or more fixed-dimension feature vectors.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, audio: &AudioBuffer) -> Result<Vec<Vec<f64>>>;
    fn name(&self) -> String;
}

/// Per-window log band energies on a mel-spaced filter bank, followed by
/// spectral flatness and crest factor (both in dB).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedder {
    pub n_bands: usize,
    pub window_s: f64,
    pub min_hz: f64,
}

pub fn spectral_embedder(n_bands: usize, window_s: f64) -> Result<SpectralEmbedder> {
    SpectralEmbedder::new(n_bands, window_s)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

fn db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(FLOOR_DB)
    } else {
        FLOOR_DB
    }
}

impl SpectralEmbedder {
    pub fn new(n_bands: usize, window_s: f64) -> Result<Self> {
        if n_bands < 2 {
            return Err(Error::Config(format!("need at least 2 bands, got {n_bands}")));
        }
        if !(window_s > 0.0 && window_s.is_finite()) {
            return Err(Error::Config(format!("window must be positive, got {window_s}")));
        }
        Ok(Self { n_bands, window_s, min_hz: 50.0 })
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        ((self.window_s * sample_rate as f64).round() as usize).max(2)
    }

    /// Bin ranges `[lo, hi)` of each band for a given FFT size.
    fn bands(&self, sample_rate: u32, nfft: usize) -> Vec<(usize, usize)> {
        let nyq = sample_rate as f64 / 2.0;
        let (m_lo, m_hi) = (hz_to_mel(self.min_hz.min(nyq / 2.0)), hz_to_mel(nyq));
        let bin_hz = sample_rate as f64 / nfft as f64;
        let last = nfft / 2;
        (0..self.n_bands)
            .map(|b| {
                let f0 = mel_to_hz(m_lo + (m_hi - m_lo) * b as f64 / self.n_bands as f64);
                let f1 = mel_to_hz(m_lo + (m_hi - m_lo) * (b + 1) as f64 / self.n_bands as f64);
                let lo = ((f0 / bin_hz).round() as usize).min(last);
                let hi = ((f1 / bin_hz).round() as usize).clamp(lo + 1, last + 1);
                (lo, hi)
            })
            .collect()
    }

    fn embed_window(&self, x: &[f64], window: &[f64], bands: &[(usize, usize)], nfft: usize) -> Vec<f64> {
        let norm: f64 = window.iter().map(|w| w * w).sum();
        let mut frame = vec![0.0; nfft];
        for (f, (s, w)) in frame.iter_mut().zip(x.iter().zip(window)) {
            *f = s * w;
        }
        let power: Vec<f64> = fft(&frame)[..=nfft / 2].iter().map(|c| c.norm_sqr() / norm).collect();
        let mut v: Vec<f64> = bands
            .iter()
            .map(|&(lo, hi)| db(power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64))
            .collect();

        let floor = 10f64.powf(FLOOR_DB / 10.0);
        let clamped: Vec<f64> = power[1..].iter().map(|p| p.max(floor)).collect();
        let arith = clamped.iter().sum::<f64>() / clamped.len() as f64;
        let geo = (clamped.iter().map(|p| p.ln()).sum::<f64>() / clamped.len() as f64).exp();
        v.push(db(geo / arith));

        let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let rms = (x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64).sqrt();
        v.push(if rms > 0.0 { 20.0 * (peak / rms).log10() } else { 0.0 });
        v
    }
}

impl Embedder for SpectralEmbedder {
    fn dim(&self) -> usize {
        self.n_bands + 2
    }

    /// One vector per non-overlapping window of the mono downmix; a trailing
    /// partial window is dropped.
    fn embed(&self, audio: &AudioBuffer) -> Result<Vec<Vec<f64>>> {
        let w = self.window_samples(audio.sample_rate());
        if audio.len() < w {
            return Err(Error::Domain(format!(
                "audio has {} samples, shorter than one {w}-sample window",
                audio.len()
            )));
        }
        let mono = audio.downmix();
        let nfft = w.next_power_of_two();
        let window = hann(w);
        let bands = self.bands(audio.sample_rate(), nfft);
        Ok(mono
            .chunks_exact(w)
            .map(|x| self.embed_window(x, &window, &bands, nfft))
            .collect())
    }

    fn name(&self) -> String {
        format!("spectral(bands={}, window_s={})", self.n_bands, self.window_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from_seed};

    #[test]
    fn noise_and_tone_are_well_separated() {
        let e = spectral_embedder(16, 0.1).unwrap();
        let sr = 8000;
        let mut rng = rng_from_seed(1);
        let noise = AudioBuffer::mono(sr, gaussian_vec(&mut rng, 4 * sr as usize).iter().map(|v| 0.1 * v).collect()).unwrap();
        let tone = AudioBuffer::mono(
            sr,
            (0..4 * sr as usize)
                .map(|i| 0.1 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / sr as f64 + 0.3).sin())
                .collect(),
        )
        .unwrap();
        let a = e.embed(&noise).unwrap();
        let b = e.embed(&tone).unwrap();
        let mean = |s: &[Vec<f64>]| -> Vec<f64> {
            (0..e.dim()).map(|d| s.iter().map(|v| v[d]).sum::<f64>() / s.len() as f64).collect()
        };
        let (ma, mb) = (mean(&a), mean(&b));
        let var = |s: &[Vec<f64>], m: &[f64]| -> f64 {
            s.iter().map(|v| v.iter().zip(m).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sum::<f64>() / (s.len() - 1) as f64
        };
        let pooled = ((var(&a, &ma) + var(&b, &mb)) / 2.0).sqrt();
        let dist = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dist >= 5.0 * pooled, "{dist} vs {pooled}");
    }

    #[test]
    fn deterministic_floor_and_short_input() {
        let e = spectral_embedder(8, 0.05).unwrap();
        let mut rng = rng_from_seed(2);
        let a = AudioBuffer::stereo(8000, gaussian_vec(&mut rng, 1000), gaussian_vec(&mut rng, 1000)).unwrap();
        assert_eq!(e.embed(&a).unwrap(), e.embed(&a).unwrap());
        assert_eq!(e.embed(&a).unwrap().len(), 2);

        let s = e.embed(&AudioBuffer::silence(8000, 1, 800).unwrap()).unwrap();
        for v in &s {
            assert_eq!(v.len(), 10);
            assert!(v.iter().all(|x| x.is_finite()));
            assert!(v[..8].iter().all(|&x| x == FLOOR_DB));
        }
        assert!(matches!(e.embed(&AudioBuffer::silence(8000, 1, 399).unwrap()), Err(Error::Domain(_))));
        assert!(spectral_embedder(1, 0.1).is_err());
    }

    #[test]
    fn bands_cover_spectrum_in_order() {
        let e = spectral_embedder(24, 0.05).unwrap();
        let b = e.bands(8000, 512);
        assert_eq!(b.len(), 24);
        for w in b.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        assert!(b.iter().all(|&(lo, hi)| lo < hi && hi <= 257));
    }
}
