use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::audio::AudioBuffer;
use crate::dsp::rms;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed};
use crate::wav::{read_wav, write_wav, SampleFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct RoomToneEntry {
    pub name: String,
    pub path: Option<PathBuf>,
    pub audio: AudioBuffer,
}

impl RoomToneEntry {
    pub fn duration_s(&self) -> f64 {
        self.audio.duration_s()
    }
}

/// A set of room-tone recordings sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomToneCorpus {
    pub entries: Vec<RoomToneEntry>,
    /// Seed of the synthetic generator, if the corpus is synthetic.
    pub seed: Option<u64>,
}

impl RoomToneCorpus {
    pub fn new(entries: Vec<RoomToneEntry>, seed: Option<u64>) -> Result<Self> {
        let corpus = Self { entries, seed };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .entries
            .first()
            .ok_or_else(|| Error::Corpus("room-tone corpus is empty".into()))?;
        let rate = first.audio.sample_rate();
        for e in &self.entries {
            if e.audio.is_empty() {
                return Err(Error::Corpus(format!("entry `{}` has zero duration", e.name)));
            }
            if e.audio.sample_rate() != rate {
                return Err(Error::Corpus(format!(
                    "entry `{}` is {} Hz, corpus is {rate} Hz",
                    e.name,
                    e.audio.sample_rate()
                )));
            }
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> u32 {
        self.entries[0].audio.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads every `.wav` file in `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        let entries = paths
            .into_iter()
            .map(|p| {
                let (audio, _) = read_wav(&p)?;
                Ok(RoomToneEntry {
                    name: p.file_name().unwrap().to_string_lossy().into_owned(),
                    path: Some(p),
                    audio,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, None)
    }

    /// Writes every entry as 32-bit float WAV into `dir` and records the paths.
    pub fn write_to_dir(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::create_dir_all(dir.as_ref())?;
        for e in &mut self.entries {
            let name = if e.name.ends_with(".wav") { e.name.clone() } else { format!("{}.wav", e.name) };
            let path = dir.as_ref().join(&name);
            write_wav(&path, &e.audio, SampleFormat::Float32)?;
            e.name = name;
            e.path = Some(path);
        }
        Ok(())
    }
}

const TARGET_RMS: f64 = 0.1;

/// Synthetic room tones: white noise through a random low-order filter
/// (one or two real low-pass poles plus a damped resonance), mixed with a
/// little broadband noise and normalised to a fixed RMS.
pub fn make_synthetic_room_tones(n_files: usize, duration_s: f64, sample_rate: u32, seed: u64) -> Result<RoomToneCorpus> {
    if n_files == 0 {
        return Err(Error::Config("need at least one room-tone file".into()));
    }
    if !(duration_s > 0.0) || sample_rate == 0 {
        return Err(Error::Config("duration and sample rate must be positive".into()));
    }
    let len = (duration_s * sample_rate as f64).round() as usize;
    let warmup = sample_rate as usize / 2;
    let entries = (0..n_files)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let n_real = rng.random_range(1..=2);
            // Cutoffs drawn log-uniformly, so most of the mass sits at low frequencies.
            let poles: Vec<f64> = (0..n_real)
                .map(|_| {
                    let fc = rng.random_range((80.0f64).ln()..(1000.0f64).ln()).exp();
                    (-2.0 * std::f64::consts::PI * fc / sample_rate as f64).exp()
                })
                .collect();
            let nyquist = sample_rate as f64 / 2.0;
            let res_hz = (rng.random_range((60.0f64).ln()..(0.4 * nyquist).ln())).exp();
            let res_r = rng.random_range(0.8..0.95);
            let res_gain = rng.random_range(0.0..1.0);
            let floor_gain = rng.random_range(0.02..0.15);

            let white = gaussian_vec(&mut rng, len + warmup);
            let mut shaped = white.clone();
            for &p in &poles {
                let mut y = 0.0;
                for s in shaped.iter_mut() {
                    y = p * y + (1.0 - p) * *s;
                    *s = y;
                }
            }
            let w = 2.0 * std::f64::consts::PI * res_hz / sample_rate as f64;
            let (a1, a2) = (2.0 * res_r * w.cos(), -res_r * res_r);
            let (mut y1, mut y2) = (0.0, 0.0);
            let resonant: Vec<f64> = white
                .iter()
                .map(|&x| {
                    let y = (1.0 - res_r) * x + a1 * y1 + a2 * y2;
                    y2 = y1;
                    y1 = y;
                    y
                })
                .collect();
            let (rs, rr, rw) = (rms(&shaped[warmup..]), rms(&resonant[warmup..]), rms(&white[warmup..]));
            let mixed: Vec<f64> = (warmup..len + warmup)
                .map(|k| shaped[k] / rs + res_gain * resonant[k] / rr + floor_gain * white[k] / rw)
                .collect();
            let g = TARGET_RMS / rms(&mixed);
            Ok(RoomToneEntry {
                name: format!("roomtone_{i:04}"),
                path: None,
                audio: AudioBuffer::mono(sample_rate, mixed.into_iter().map(|v| v * g).collect())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RoomToneCorpus::new(entries, Some(seed))
}
