use rustfft::num_complex::Complex64;

use crate::audio::AudioBuffer;
use crate::dsp::{hann, ifft_real, linear_convolve, rms, welch_power};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct CnmConfig {
    /// Cutoff of the envelope low-pass, Hz.
    pub envelope_cutoff_hz: f64,
    /// FFT size of the spectrum estimate and length of the FIR filter.
    pub fir_len: usize,
}

impl Default for CnmConfig {
    fn default() -> Self {
        Self { envelope_cutoff_hz: 20.0, fir_len: 1024 }
    }
}

pub fn cnm_baseline(prompt: &AudioBuffer, out_samples: usize, seed: u64) -> Result<AudioBuffer> {
    cnm_baseline_with(prompt, out_samples, seed, &CnmConfig::default())
}

/// Convolutional noise matching: white noise shaped by the prompt's
/// octave-smoothed magnitude spectrum and modulated by its amplitude
/// envelope (looped to the output length), RMS-matched per channel.
pub fn cnm_baseline_with(prompt: &AudioBuffer, out_samples: usize, seed: u64, cfg: &CnmConfig) -> Result<AudioBuffer> {
    if !(cfg.envelope_cutoff_hz > 0.0) || cfg.fir_len < 4 || !cfg.fir_len.is_power_of_two() {
        return Err(Error::Config("envelope cutoff must be positive and FIR length a power of two ≥ 4".into()));
    }
    if prompt.is_empty() || prompt.peak() == 0.0 {
        return Err(Error::Domain("prompt is silent".into()));
    }
    let sr = prompt.sample_rate() as f64;
    let channels = prompt
        .channels()
        .iter()
        .enumerate()
        .map(|(ch, x)| {
            let target = rms(x);
            if target == 0.0 {
                return vec![0.0; out_samples];
            }
            let env = envelope(x, cfg.envelope_cutoff_hz, sr);
            let env_mean = env.iter().sum::<f64>() / env.len() as f64;
            let h = matching_filter(x, cfg.fir_len);
            let mut rng = rng_from_seed(derive_seed(seed, ch as u64));
            let noise = gaussian_vec(&mut rng, out_samples + cfg.fir_len);
            let filtered = linear_convolve(&noise, &h);
            let mut y: Vec<f64> = (0..out_samples)
                .map(|i| filtered[cfg.fir_len + i] * env[i % env.len()] / env_mean)
                .collect();
            let level = rms(&y);
            if level > 0.0 {
                y.iter_mut().for_each(|v| *v *= target / level);
            }
            y
        })
        .collect();
    AudioBuffer::new(prompt.sample_rate(), channels)
}

/// Rectified signal through a zero-phase (forward-backward) one-pole low-pass.
fn envelope(x: &[f64], cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    let a = (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate).exp();
    let mut e: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let mut y = mean;
    for v in e.iter_mut() {
        y = a * y + (1.0 - a) * *v;
        *v = y;
    }
    y = mean;
    for v in e.iter_mut().rev() {
        y = a * y + (1.0 - a) * *v;
        *v = y;
    }
    e
}

/// Linear-phase FIR whose magnitude response is the prompt's average
/// magnitude spectrum smoothed over one octave around each bin.
fn matching_filter(x: &[f64], n: usize) -> Vec<f64> {
    let mag: Vec<f64> = welch_power(x, n).into_iter().map(f64::sqrt).collect();
    let bins = mag.len();
    let mut prefix = vec![0.0; bins + 1];
    for (i, m) in mag.iter().enumerate() {
        prefix[i + 1] = prefix[i] + m;
    }
    let smooth: Vec<f64> = (0..bins)
        .map(|k| {
            if k == 0 {
                return mag[0];
            }
            let lo = ((k as f64 / std::f64::consts::SQRT_2).floor() as usize).max(1);
            let hi = ((k as f64 * std::f64::consts::SQRT_2).ceil() as usize).min(bins - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect();
    let spectrum: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(smooth[if k < bins { k } else { n - k }], 0.0))
        .collect();
    let h = ifft_real(&spectrum);
    let w = hann(n);
    (0..n).map(|i| h[(i + n / 2) % n] * w[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{pearson, to_db};
    use crate::rng::gaussian_vec;

    fn lowpassed_noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut y = 0.0;
        gaussian_vec(&mut rng, n)
            .into_iter()
            .map(|v| {
                y = 0.9 * y + 0.1 * v;
                y
            })
            .collect()
    }

    #[test]
    fn stationary_prompt_spectrum_is_reproduced() {
        let prompt = AudioBuffer::mono(8000, lowpassed_noise(3, 24000)).unwrap();
        let out = cnm_baseline(&prompt, 40000, 5).unwrap();
        let a = to_db(&welch_power(prompt.channel(0), 256), 1e-20);
        let b = to_db(&welch_power(out.channel(0), 256), 1e-20);
        assert!(pearson(&a, &b) >= 0.9, "{}", pearson(&a, &b));
        assert!((out.rms() / prompt.rms() - 1.0).abs() < 1e-12);
        assert_eq!(out.len(), 40000);
    }

    #[test]
    fn deterministic_and_rejects_silence() {
        let prompt = AudioBuffer::stereo(8000, lowpassed_noise(1, 4000), lowpassed_noise(2, 4000)).unwrap();
        let a = cnm_baseline(&prompt, 9000, 7).unwrap();
        assert_eq!(a, cnm_baseline(&prompt, 9000, 7).unwrap());
        assert_ne!(a, cnm_baseline(&prompt, 9000, 8).unwrap());
        assert!(matches!(cnm_baseline(&AudioBuffer::silence(8000, 1, 100).unwrap(), 10, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn click_is_not_reproduced() {
        let mut x: Vec<f64> = lowpassed_noise(4, 24000).into_iter().map(|v| 0.1 * v).collect();
        x[12000] = 0.9;
        let prompt = AudioBuffer::mono(8000, x).unwrap();
        assert!(prompt.peak() > 6.0 * prompt.rms());
        let out = cnm_baseline(&prompt, 40000, 1).unwrap();
        assert!(out.peak() <= 6.0 * out.rms(), "crest {}", out.peak() / out.rms());
    }
}
