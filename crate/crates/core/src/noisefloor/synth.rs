use rand::Rng as _;

use super::RoomToneCorpus;
use crate::audio::AudioBuffer;
use crate::dsp::{circular_convolve, rms};
use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, rng_from_seed};

/// Where a synthesized noise floor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseFloorSource {
    pub entry: usize,
    pub offset: usize,
}

pub fn synthesize_noise_floor(corpus: &RoomToneCorpus, length_samples: usize, channels: usize, seed: u64) -> Result<AudioBuffer> {
    synthesize_noise_floor_with_source(corpus, length_samples, channels, seed).map(|(a, _)| a)
}

/// Picks a random segment of a random long-enough entry and convolves it
/// (circularly) with fresh Gaussian white noise per output channel. Each
/// channel is rescaled to the segment's RMS.
pub fn synthesize_noise_floor_with_source(
    corpus: &RoomToneCorpus,
    length_samples: usize,
    channels: usize,
    seed: u64,
) -> Result<(AudioBuffer, NoiseFloorSource)> {
    corpus.validate()?;
    if !(1..=2).contains(&channels) {
        return Err(Error::Config(format!("channels must be 1 or 2, got {channels}")));
    }
    if length_samples == 0 {
        return Err(Error::Config("length must be positive".into()));
    }
    let eligible: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus.entries[i].audio.len() >= length_samples)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Corpus(format!("no room-tone entry has at least {length_samples} samples")));
    }
    let mut rng = rng_from_seed(seed);
    let entry = eligible[rng.random_range(0..eligible.len())];
    let audio = &corpus.entries[entry].audio;
    let offset = rng.random_range(0..=audio.len() - length_samples);
    let segment = audio.downmix()[offset..offset + length_samples].to_vec();
    let target = rms(&segment);

    let out = (0..channels)
        .map(|_| {
            let noise = gaussian_vec(&mut rng, length_samples);
            let y = circular_convolve(&segment, &noise);
            let level = rms(&y);
            if level > 0.0 {
                y.into_iter().map(|v| v * target / level).collect()
            } else {
                y
            }
        })
        .collect();
    Ok((AudioBuffer::new(corpus.sample_rate(), out)?, NoiseFloorSource { entry, offset }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{pearson, to_db, variance, welch_power, windowed_rms};
    use crate::noisefloor::make_synthetic_room_tones;

    fn corpus() -> RoomToneCorpus {
        make_synthetic_room_tones(4, 3.0, 8000, 77).unwrap()
    }

    #[test]
    fn deterministic_and_rms_matched() {
        let c = corpus();
        let (a, src) = synthesize_noise_floor_with_source(&c, 8000, 2, 9).unwrap();
        assert_eq!(a, synthesize_noise_floor(&c, 8000, 2, 9).unwrap());
        assert_ne!(a, synthesize_noise_floor(&c, 8000, 2, 10).unwrap());
        let seg = &c.entries[src.entry].audio.channel(0)[src.offset..src.offset + 8000];
        for ch in 0..2 {
            assert!((rms(a.channel(ch)) / rms(seg) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stereo_channels_are_uncorrelated() {
        let c = corpus();
        for seed in 0..10 {
            let a = synthesize_noise_floor(&c, 16000, 2, seed).unwrap();
            let r = pearson(a.channel(0), a.channel(1));
            assert!(r.abs() < 0.2, "seed {seed}: r = {r}");
        }
    }

    #[test]
    fn spectrum_follows_source_segment() {
        let c = corpus();
        let mut total = 0.0;
        for seed in 0..20 {
            let (a, src) = synthesize_noise_floor_with_source(&c, 16000, 1, seed).unwrap();
            let seg = &c.entries[src.entry].audio.channel(0)[src.offset..src.offset + 16000];
            let sy = to_db(&welch_power(a.channel(0), 256), 1e-20);
            let ss = to_db(&welch_power(seg, 256), 1e-20);
            total += pearson(&sy, &ss);
        }
        assert!(total / 20.0 >= 0.95, "mean correlation {}", total / 20.0);
    }

    #[test]
    fn output_is_as_stationary_as_source() {
        let c = corpus();
        let (mut vy, mut vs) = (0.0, 0.0);
        for seed in 0..20 {
            let (a, src) = synthesize_noise_floor_with_source(&c, 16000, 1, seed).unwrap();
            let seg = &c.entries[src.entry].audio.channel(0)[src.offset..src.offset + 16000];
            vy += variance(&windowed_rms(a.channel(0), 800));
            vs += variance(&windowed_rms(seg, 800));
        }
        assert!(vy <= 1.5 * vs, "{vy} vs {vs}");
    }

    #[test]
    fn too_long_request_is_a_corpus_error() {
        let c = corpus();
        assert!(matches!(synthesize_noise_floor(&c, 30000, 1, 0), Err(Error::Corpus(_))));
        assert!(synthesize_noise_floor(&c, 100, 3, 0).is_err());
    }
}
