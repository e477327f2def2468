//! Bundled toy corpus: three synthetic sound classes with content below a
//! few hundred hertz, so it survives the desk codec's coefficient truncation.

use genextend::codec::{encode, CodecConfig};
use genextend::denoisers::TrainingSet;
use genextend::dsp::rms;
use genextend::rng::{derive_seed, gaussian_vec, rng_from_seed, Rng};
use genextend::AudioBuffer;
use rand::Rng as _;

pub const TOY_CLASSES: [&str; 3] = ["rumble", "bursts", "tones"];

fn one_pole(x: &mut [f64], cutoff_hz: f64, sample_rate: f64) {
    let a = (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = a * y + (1.0 - a) * *v;
        *v = y;
    }
}

fn lowpassed_noise(rng: &mut Rng, n: usize, cutoff_hz: f64, sample_rate: f64, level: f64) -> Vec<f64> {
    let warm = (sample_rate / 10.0) as usize;
    let mut x = gaussian_vec(rng, n + warm);
    one_pole(&mut x, cutoff_hz, sample_rate);
    one_pole(&mut x, cutoff_hz, sample_rate);
    let x = x.split_off(warm);
    let g = level / rms(&x).max(1e-300);
    x.into_iter().map(|v| v * g).collect()
}

/// One mono clip of `class` (index into [`TOY_CLASSES`]).
pub fn toy_clip(class: u32, duration_s: f64, sample_rate: u32, seed: u64) -> anyhow::Result<AudioBuffer> {
    let sr = sample_rate as f64;
    let n = (duration_s * sr).round() as usize;
    let mut rng = rng_from_seed(seed);
    let samples = match class {
        0 => {
            let fc = rng.random_range(60.0..200.0);
            let level = 0.1 * rng.random_range(0.7..1.4);
            lowpassed_noise(&mut rng, n, fc, sr, level)
        }
        1 => {
            let mut x = lowpassed_noise(&mut rng, n, 150.0, sr, 0.01);
            let events = ((duration_s * 2.0).round() as usize).max(1);
            for _ in 0..events {
                let onset = rng.random_range(0..n);
                let tau = rng.random_range(0.03..0.12) * sr;
                let amp = rng.random_range(0.3..0.6);
                let fc = rng.random_range(150.0..300.0);
                let len = ((5.0 * tau) as usize).min(n - onset);
                let burst = lowpassed_noise(&mut rng, len.max(1), fc, sr, amp);
                for (i, b) in burst.iter().enumerate().take(len) {
                    x[onset + i] += b * (-(i as f64) / tau).exp();
                }
            }
            x
        }
        2 => {
            let k = rng.random_range(2..=3);
            let parts: Vec<(f64, f64, f64, f64)> = (0..k)
                .map(|_| {
                    (
                        rng.random_range(40.0..280.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                        rng.random_range(0.5..2.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let noise = lowpassed_noise(&mut rng, n, 200.0, sr, 0.005);
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    parts
                        .iter()
                        .map(|&(f, ph, am, amph)| {
                            (1.0 + 0.3 * (std::f64::consts::TAU * am * t + amph).sin())
                                * (std::f64::consts::TAU * f * t + ph).sin()
                        })
                        .sum::<f64>()
                })
                .collect();
            let g = 0.1 / rms(&x);
            x.iter().zip(&noise).map(|(a, b)| a * g + b).collect()
        }
        _ => anyhow::bail!("toy class {class} does not exist (have {})", TOY_CLASSES.len()),
    };
    Ok(AudioBuffer::mono(sample_rate, samples)?)
}

/// `n_per_class` clips of every class as `(name, audio, label)`.
pub fn toy_audio_set(n_per_class: usize, duration_s: f64, sample_rate: u32, seed: u64) -> anyhow::Result<Vec<(String, AudioBuffer, u32)>> {
    let mut out = Vec::with_capacity(n_per_class * TOY_CLASSES.len());
    for i in 0..n_per_class {
        for (c, name) in TOY_CLASSES.iter().enumerate() {
            let idx = (i * TOY_CLASSES.len() + c) as u64;
            let audio = toy_clip(c as u32, duration_s, sample_rate, derive_seed(seed, idx))?;
            out.push((format!("{name}_{i:04}.wav"), audio, c as u32));
        }
    }
    Ok(out)
}

/// Labelled latents of [`toy_audio_set`] under `codec` (mono content is
/// duplicated for stereo codecs).
pub fn toy_training_set(codec: &CodecConfig, n_per_class: usize, duration_s: f64, seed: u64) -> anyhow::Result<TrainingSet> {
    let mut set = TrainingSet::default();
    for (_, audio, label) in toy_audio_set(n_per_class, duration_s, codec.sample_rate, seed)? {
        set.push(encode(&match_channels(audio, codec.audio_channels)?, codec)?, Some(label));
    }
    Ok(set)
}

/// Latent-domain classes of band-limited noise: class `c` concentrates its
/// energy on a band of latent channels centred at a class-specific index,
/// with AR(1) correlation along time. Channels outside the band carry only
/// a faint floor.
pub fn band_limited_latents(n_per_class: usize, n_classes: usize, channels: usize, n_frames: usize, frame_rate: f64, seed: u64) -> anyhow::Result<TrainingSet> {
    anyhow::ensure!(n_classes >= 1 && channels >= 1 && n_frames >= 2, "band-limited set needs classes, channels and at least two frames");
    const IN_BAND: f64 = 0.5;
    const FLOOR: f64 = 0.01;
    const RHO: f64 = 0.9;
    let width = (channels as f64 / (6.0 * n_classes as f64)).max(0.75);
    let mut set = TrainingSet::default();
    for i in 0..n_per_class {
        for c in 0..n_classes {
            let mut rng = rng_from_seed(derive_seed(seed, (i * n_classes + c) as u64));
            let centre = (c as f64 + 0.5) * channels as f64 / n_classes as f64 - 0.5;
            let gains: Vec<f64> = (0..channels)
                .map(|ch| FLOOR + IN_BAND * (-((ch as f64 - centre) / width).powi(2) / 2.0).exp())
                .collect();
            let mut state = gaussian_vec(&mut rng, channels);
            let innov = (1.0 - RHO * RHO).sqrt();
            let mut data = Vec::with_capacity(channels * n_frames);
            for _ in 0..n_frames {
                let e = gaussian_vec(&mut rng, channels);
                for ch in 0..channels {
                    state[ch] = RHO * state[ch] + innov * e[ch];
                    data.push(gains[ch] * state[ch]);
                }
            }
            set.push(genextend::Latent::from_frames(channels, n_frames, frame_rate, data)?, Some(c as u32));
        }
    }
    Ok(set)
}

pub fn match_channels(audio: AudioBuffer, channels: usize) -> anyhow::Result<AudioBuffer> {
    Ok(match (audio.n_channels(), channels) {
        (a, b) if a == b => audio,
        (1, 2) => {
            let x = audio.channel(0).to_vec();
            AudioBuffer::stereo(audio.sample_rate(), x.clone(), x)?
        }
        (2, 1) => AudioBuffer::mono(audio.sample_rate(), audio.downmix())?,
        (a, b) => anyhow::bail!("cannot map {a} audio channels to {b}"),
    })
}
