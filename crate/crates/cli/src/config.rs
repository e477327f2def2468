//! Run configuration and the structured-text config file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use genextend::codec::{BlockTransform, CodecConfig};
use genextend::denoisers::{ToyConfig, TrainConfig};
use genextend::diffusion::Solver;
use genextend::wav::SampleFormat;
use genextend::{Error, MaskMode};
use serde::{Deserialize, Serialize};

/// Codec settings shared by every command. The audio channel count is taken
/// from the input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSettings {
    pub sample_rate: u32,
    pub frame_rate: u32,
    pub latent_channels: usize,
    pub transform: BlockTransform,
}

impl Default for CodecSettings {
    fn default() -> Self {
        let d = CodecConfig::desk_default(1);
        Self {
            sample_rate: d.sample_rate,
            frame_rate: d.frame_rate,
            latent_channels: d.latent_channels,
            transform: d.transform,
        }
    }
}

impl CodecSettings {
    pub fn for_channels(&self, audio_channels: usize) -> genextend::Result<CodecConfig> {
        CodecConfig::new(
            self.sample_rate,
            self.frame_rate,
            audio_channels,
            self.latent_channels,
            self.transform,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub codec: CodecSettings,
    pub steps: usize,
    pub gamma: f64,
    pub duration_s: f64,
    pub seed: u64,
    /// Toy checkpoint. Without one, a Gaussian prior is fitted to the prompts.
    pub model: Option<PathBuf>,
    pub condition: Option<u32>,
    pub solver: Solver,
    /// Diagonal loading of the fitted prior, relative to its mean variance.
    pub prior_ridge: f64,
    pub format: SampleFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            codec: CodecSettings::default(),
            steps: 24,
            gamma: 5.0,
            duration_s: 13.0,
            seed: 0,
            model: None,
            condition: None,
            solver: Solver::default(),
            prior_ridge: 1e-3,
            format: SampleFormat::Float32,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> genextend::Result<()> {
        self.codec.for_channels(1)?;
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration_s)));
        }
        self.total_frames()?;
        if !(self.prior_ridge >= 0.0) {
            return Err(Error::Config("prior_ridge must be >= 0".into()));
        }
        Ok(())
    }

    /// Generation length in latent frames; the duration must be a whole
    /// number of frames.
    pub fn total_frames(&self) -> genextend::Result<usize> {
        self.codec.for_channels(1)?.frames_for_seconds(self.duration_s)
    }
}

/// Architecture of a freshly trained toy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyArch {
    pub layers: usize,
    pub width: usize,
    pub context_frames: usize,
    pub time_embedding: usize,
    pub seed: u64,
}

impl Default for ToyArch {
    fn default() -> Self {
        Self {
            layers: 2,
            width: 32,
            context_frames: 3,
            time_embedding: ToyConfig::DEFAULT_TIME_EMBEDDING,
            seed: 0,
        }
    }
}

impl ToyArch {
    pub fn config(&self, latent_channels: usize, n_conditions: usize) -> ToyConfig {
        ToyConfig {
            layers: self.layers,
            width: self.width,
            latent_channels,
            context_frames: self.context_frames,
            n_conditions,
            time_embedding: self.time_embedding,
            seed: self.seed,
        }
    }
}

/// Training settings sized for a single CPU core.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        iterations: 2_000,
        batch_size: 8,
        learning_rate: 2e-3,
        warmup_steps: 100,
        ema_decay: 0.99,
        ema_every: 1,
        segment_seconds: 1.0,
        mask_len_max_seconds: 0.5,
        ..TrainConfig::default()
    }
}

/// Desk training settings with the fine-tuning iteration count and modes.
pub fn desk_finetune_config() -> TrainConfig {
    let ft = TrainConfig::finetune_default();
    TrainConfig {
        iterations: ft.iterations,
        mode_set: ft.mode_set,
        ..desk_train_config()
    }
}

/// Contents of a `--config` file: run settings at the top level plus
/// optional `[train]` and `[toy]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub train: Option<TrainConfig>,
    pub toy: Option<ToyArch>,
}

impl ConfigFile {
    /// Unknown keys are rejected at the top level and in `[codec]` / `[toy]`.
    pub fn parse(text: &str) -> genextend::Result<Self> {
        let bad = |e: toml::de::Error| Error::Config(e.to_string());
        let mut table: toml::Table = toml::from_str(text).map_err(bad)?;
        let train = table.remove("train").map(|v| v.try_into()).transpose().map_err(bad)?;
        let toy = table.remove("toy").map(|v| v.try_into()).transpose().map_err(bad)?;
        let run = toml::Value::Table(table).try_into().map_err(bad)?;
        Ok(Self { run, train, toy })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Self::parse(&text).with_context(|| format!("in {}", path.display()))?)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}

/// Parses a comma-separated list of mask modes.
pub fn parse_modes(s: &str) -> genextend::Result<Vec<MaskMode>> {
    s.split(',').map(|m| MaskMode::parse(m.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_desk_settings() {
        let c = RunConfig::default();
        assert_eq!(c.steps, 24);
        assert_eq!(c.gamma, 5.0);
        assert_eq!(c.total_frames().unwrap(), 520);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_fractional_frames_and_negative_gamma() {
        let c = RunConfig {
            duration_s: 1.01,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            gamma: -1.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            steps: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_toml_with_tables() {
        let text = r#"
            gamma = 3.0
            seed = 9
            [codec]
            latent_channels = 8
            [train]
            iterations = 50
            mode_set = ["extend_forward"]
            [toy]
            width = 16
        "#;
        let f = ConfigFile::parse(text).unwrap();
        assert_eq!(f.run.gamma, 3.0);
        assert_eq!(f.run.codec.latent_channels, 8);
        assert_eq!(f.run.codec.sample_rate, 8000);
        assert_eq!(f.train.as_ref().unwrap().iterations, 50);
        assert_eq!(f.train.unwrap().mode_set, vec![MaskMode::ExtendForward]);
        assert_eq!(f.toy.unwrap().width, 16);
        assert!(ConfigFile::parse("gama = 1.0").is_err());
        assert!(ConfigFile::parse("[toy]\nwidht = 3").is_err());
    }

    #[test]
    fn mode_lists() {
        assert_eq!(
            parse_modes("forward, backward").unwrap(),
            vec![MaskMode::ExtendForward, MaskMode::ExtendBackward]
        );
        assert!(parse_modes("sideways").is_err());
    }
}
