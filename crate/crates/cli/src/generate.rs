//! `extend` and `morph`: prompt-conditioned generation from WAV prompts.

use std::path::Path;

use anyhow::{Context, Result};
use genextend::codec::{BlockCodec, CodecConfig, LatentCodec};
use genextend::denoisers::Denoiser;
use genextend::diffusion::{make_schedule, sample_with, GenerationRequest, SamplerConfig};
use genextend::preprocess::{Preprocessor, SpeechRemovalHook};
use genextend::wav::{read_wav, write_wav};
use genextend::{postprocess, AudioBuffer, Error, Latent, MaskMode, MaskSpec};

use crate::config::RunConfig;
use crate::model::{fit_prompt_prior, load_toy};
use crate::stamp::Stamp;

/// Reads a prompt and passes it through the preprocessing hook.
pub fn load_prompt(path: &Path) -> Result<AudioBuffer> {
    let (audio, _) = read_wav(path).with_context(|| format!("reading prompt {}", path.display()))?;
    Ok(SpeechRemovalHook.process(audio)?)
}

/// Where a prompt sits in the generation; decides which side gets the
/// padding up to a whole frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Head,
    Tail,
}

fn encode_prompt(codec: &BlockCodec, audio: &AudioBuffer, side: Side) -> Result<Latent> {
    let fs = codec.config().frame_size();
    let rem = audio.len() % fs;
    if side == Side::Head || rem == 0 {
        return Ok(codec.encode(audio)?);
    }
    let pad = fs - rem;
    let chans = audio
        .channels()
        .iter()
        .map(|c| std::iter::repeat_n(0.0, pad).chain(c.iter().copied()).collect())
        .collect();
    Ok(codec.encode(&AudioBuffer::new(audio.sample_rate(), chans)?)?)
}

/// Codec and denoiser shared by every generation of a run. Without a
/// checkpoint a Gaussian prior is fitted to the prompts of each generation.
pub struct Generator {
    codec: BlockCodec,
    model: Option<Box<dyn Denoiser>>,
}

impl Generator {
    pub fn new(cfg: &RunConfig, channels: usize, sample_rate: u32) -> Result<Self> {
        cfg.validate()?;
        let (codec_cfg, model): (CodecConfig, _) = match &cfg.model {
            Some(path) => {
                let (m, c, _) = load_toy(path)?;
                if c.audio_channels != channels {
                    return Err(Error::Shape(format!(
                        "the model was trained on {}-channel audio but the prompt has {channels}",
                        c.audio_channels
                    ))
                    .into());
                }
                (c, Some(m))
            }
            None => (cfg.codec.for_channels(channels)?, None),
        };
        if sample_rate != codec_cfg.sample_rate {
            return Err(Error::Config(format!(
                "prompt is {sample_rate} Hz but the run uses {} Hz",
                codec_cfg.sample_rate
            ))
            .into());
        }
        Ok(Self {
            codec: BlockCodec::new(codec_cfg)?,
            model,
        })
    }

    pub fn codec(&self) -> &CodecConfig {
        self.codec.config()
    }

    /// The audio as the codec reproduces it.
    pub fn roundtrip(&self, audio: &AudioBuffer) -> Result<AudioBuffer> {
        self.check_prompt(audio)?;
        Ok(self.codec.decode(&self.codec.encode(audio)?)?)
    }

    fn frames(&self, seconds: f64) -> Result<usize> {
        Ok(self.codec.config().frames_for_seconds(seconds)?)
    }

    fn check_prompt(&self, prompt: &AudioBuffer) -> Result<()> {
        let c = self.codec.config();
        if prompt.n_channels() != c.audio_channels || prompt.sample_rate() != c.sample_rate {
            return Err(Error::Shape(format!(
                "prompt is {} Hz / {} channels but the run uses {} Hz / {} channels",
                prompt.sample_rate(),
                prompt.n_channels(),
                c.sample_rate,
                c.audio_channels
            ))
            .into());
        }
        Ok(())
    }

    fn run(&self, cfg: &RunConfig, spec: MaskSpec, head: Option<Latent>, tail: Option<Latent>) -> Result<AudioBuffer> {
        let fitted;
        let model: &dyn Denoiser = match &self.model {
            Some(m) => m.as_ref(),
            None => {
                let prompts: Vec<&Latent> = head.iter().chain(tail.iter()).collect();
                fitted = fit_prompt_prior(&prompts, cfg.prior_ridge)?;
                &fitted
            }
        };
        let sched = make_schedule(cfg.steps)?;
        let req = GenerationRequest::masked(spec, head, tail, cfg.gamma, cfg.seed)?.with_condition(cfg.condition);
        let raw = sample_with(model, &req, &sched, &SamplerConfig { solver: cfg.solver })?;
        let z = postprocess(&raw, req.prompt_head.as_ref(), req.prompt_tail.as_ref(), &spec)?;
        Ok(self.codec.decode(&z)?)
    }

    /// Generates `cfg.duration_s` of audio continuing the prompt after it
    /// (`ExtendForward`) or leading into it (`ExtendBackward`).
    pub fn extend(&self, prompt: &AudioBuffer, direction: MaskMode, cfg: &RunConfig) -> Result<AudioBuffer> {
        self.check_prompt(prompt)?;
        let total = self.frames(cfg.duration_s)?;
        match direction {
            MaskMode::ExtendForward => {
                let z = encode_prompt(&self.codec, prompt, Side::Head)?;
                let spec = MaskSpec::extend_forward(z.n_frames(), total)?;
                self.run(cfg, spec, Some(z), None)
            }
            MaskMode::ExtendBackward => {
                let z = encode_prompt(&self.codec, prompt, Side::Tail)?;
                let spec = MaskSpec::extend_backward(z.n_frames(), total)?;
                self.run(cfg, spec, None, Some(z))
            }
            MaskMode::Morph => Err(Error::Config("extension takes forward or backward, not morph".into()).into()),
        }
    }

    /// Generates a transition that starts with `a` and ends with `b`.
    pub fn morph(&self, a: &AudioBuffer, b: &AudioBuffer, offsets: MorphOffsets, cfg: &RunConfig) -> Result<AudioBuffer> {
        self.check_prompt(a)?;
        self.check_prompt(b)?;
        let total = self.frames(cfg.duration_s)?;
        let za = encode_prompt(&self.codec, a, Side::Head)?;
        let zb = encode_prompt(&self.codec, b, Side::Tail)?;
        let spec = MaskSpec::with_offsets(
            MaskMode::Morph,
            za.n_frames(),
            zb.n_frames(),
            total,
            self.frames(offsets.head_s)?,
            self.frames(offsets.tail_s)?,
        )?;
        self.run(cfg, spec, Some(za), Some(zb))
    }
}

/// Gaps between the prompts and the ends of a morph, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct MorphOffsets {
    pub head_s: f64,
    pub tail_s: f64,
}

pub fn extend_audio(prompt: &AudioBuffer, direction: MaskMode, cfg: &RunConfig) -> Result<AudioBuffer> {
    Generator::new(cfg, prompt.n_channels(), prompt.sample_rate())?.extend(prompt, direction, cfg)
}

pub fn morph_audio(a: &AudioBuffer, b: &AudioBuffer, offsets: MorphOffsets, cfg: &RunConfig) -> Result<AudioBuffer> {
    Generator::new(cfg, a.n_channels(), a.sample_rate())?.morph(a, b, offsets, cfg)
}

fn write_output(output: &Path, audio: &AudioBuffer, cfg: &RunConfig, stamp: Stamp) -> Result<()> {
    write_wav(output, audio, cfg.format).with_context(|| format!("writing {}", output.display()))?;
    stamp.write_for(output)?;
    Ok(())
}

pub fn cmd_extend(input: &Path, direction: MaskMode, output: &Path, cfg: &RunConfig) -> Result<()> {
    let prompt = load_prompt(input)?;
    let audio = extend_audio(&prompt, direction, cfg)?;
    let stamp = Stamp::new(
        "extend",
        cfg.seed,
        &serde_json::json!({ "run": cfg, "direction": direction, "input": input }),
    )?;
    write_output(output, &audio, cfg, stamp)
}

pub fn cmd_morph(a: &Path, b: &Path, output: &Path, offsets: MorphOffsets, cfg: &RunConfig) -> Result<()> {
    let audio = morph_audio(&load_prompt(a)?, &load_prompt(b)?, offsets, cfg)?;
    let stamp = Stamp::new(
        "morph",
        cfg.seed,
        &serde_json::json!({ "run": cfg, "a": a, "b": b, "offsets": offsets }),
    )?;
    write_output(output, &audio, cfg, stamp)
}
