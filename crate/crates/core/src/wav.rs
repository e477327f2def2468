//! RIFF/WAVE reading and writing for 16-bit, 24-bit and 32-bit float PCM.

use std::path::Path;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl SampleFormat {
    fn spec(self, channels: u16, sample_rate: u32) -> hound::WavSpec {
        let (bits_per_sample, sample_format) = match self {
            SampleFormat::Pcm16 => (16, hound::SampleFormat::Int),
            SampleFormat::Pcm24 => (24, hound::SampleFormat::Int),
            SampleFormat::Float32 => (32, hound::SampleFormat::Float),
        };
        hound::WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

/// Reads a WAV file, returning the audio and the sample format it was stored in.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(AudioBuffer, SampleFormat)> {
    let reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if n_channels == 0 || n_channels > 2 {
        return Err(Error::Domain(format!(
            "{}: only mono and stereo WAV files are supported, got {n_channels} channels",
            path.as_ref().display()
        )));
    }
    let (format, interleaved): (SampleFormat, Vec<f64>) =
        match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => (
                SampleFormat::Pcm16,
                reader
                    .into_samples::<i16>()
                    .map(|s| s.map(|v| v as f64 / 32_768.0))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            (hound::SampleFormat::Int, 24) => (
                SampleFormat::Pcm24,
                reader
                    .into_samples::<i32>()
                    .map(|s| s.map(|v| v as f64 / 8_388_608.0))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            (hound::SampleFormat::Float, 32) => (
                SampleFormat::Float32,
                reader
                    .into_samples::<f32>()
                    .map(|s| s.map(|v| v as f64))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            (fmt, bits) => {
                return Err(Error::Domain(format!(
                    "{}: unsupported sample format {fmt:?} at {bits} bits",
                    path.as_ref().display()
                )))
            }
        };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_channels); n_channels];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n_channels].push(v);
    }
    Ok((AudioBuffer::new(spec.sample_rate, channels)?, format))
}

/// Writes `audio` to `path`. Integer formats clip to [-1, 1).
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer, format: SampleFormat) -> Result<()> {
    let spec = format.spec(audio.n_channels() as u16, audio.sample_rate());
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for i in 0..audio.len() {
        for c in audio.channels() {
            let x = c[i];
            match format {
                SampleFormat::Pcm16 => writer.write_sample(quantize(x, 32_768.0) as i16)?,
                SampleFormat::Pcm24 => writer.write_sample(quantize(x, 8_388_608.0) as i32)?,
                SampleFormat::Float32 => writer.write_sample(x as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

fn quantize(x: f64, full_scale: f64) -> i64 {
    let v = (x * full_scale).round();
    v.clamp(-full_scale, full_scale - 1.0) as i64
}
