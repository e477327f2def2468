//! `train` and `finetune`: toy model training with checkpoint output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use genextend::codec::{encode, CodecConfig};
use genextend::denoisers::checkpoint::Checkpoint;
use genextend::denoisers::{finetune, train, ToyDenoiser, TrainConfig, TrainOutcome, TrainingSet};
use genextend::diffusion::make_schedule;
use genextend::wav::read_wav;
use genextend::{AudioBuffer, Error, MaskMode};
use serde::Serialize;

use crate::config::{CodecSettings, ToyArch};
use crate::model::checkpoint_codec;
use crate::stamp::Stamp;
use crate::toydata::{match_channels, toy_training_set};

/// Sorted `(file name, audio)` pairs of every WAV in `dir`.
pub fn read_wav_dir(dir: &Path) -> Result<Vec<(String, AudioBuffer)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .wav files in {}", dir.display())).into());
    }
    paths
        .into_iter()
        .map(|p| {
            let (audio, _) = read_wav(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), audio))
        })
        .collect()
}

fn encode_dir(dir: &Path, codec: &CodecConfig) -> Result<TrainingSet> {
    let mut set = TrainingSet::default();
    for (name, audio) in read_wav_dir(dir)? {
        let audio = match_channels(audio, codec.audio_channels).with_context(|| name.clone())?;
        set.push(encode(&audio, codec).with_context(|| name.clone())?, None);
    }
    Ok(set)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainArgs {
    pub out: PathBuf,
    /// WAV directory; the bundled toy corpus is used when absent.
    pub data: Option<PathBuf>,
    pub toy_per_class: usize,
    pub toy_clip_s: f64,
    pub audio_channels: usize,
    pub codec: CodecSettings,
    pub toy: ToyArch,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinetuneArgs {
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub data: PathBuf,
    pub train: TrainConfig,
}

fn write_losses(out: &Path, outcome: &TrainOutcome) -> Result<()> {
    let mut csv = String::from("iteration,loss,lr\n");
    for (i, s) in outcome.history.iter().enumerate() {
        writeln!(csv, "{i},{},{}", s.loss, s.lr)?;
    }
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".losses.csv");
    std::fs::write(out.with_file_name(name), csv)?;
    Ok(())
}

fn save(out: &Path, outcome: &TrainOutcome, cfg: &TrainConfig, codec: &CodecConfig, stamp: &Stamp, parent: Option<serde_json::Value>) -> Result<()> {
    let n = outcome.history.len();
    let w = n.min(100);
    let meta = serde_json::json!({
        "codec": codec,
        "train": cfg,
        "stamp": stamp.to_json()?,
        "parent": parent,
        "loss_first": outcome.mean_loss(0..w),
        "loss_last": outcome.mean_loss(n - w..n),
    });
    let ck = Checkpoint {
        config: outcome.model.config().clone(),
        params: outcome.model.params().to_vec(),
        ema: Some(outcome.ema.params().to_vec()),
        train_seed: cfg.seed,
        meta,
    };
    ck.save(out).with_context(|| format!("writing checkpoint {}", out.display()))?;
    stamp.write_for(out)?;
    write_losses(out, outcome)?;
    eprintln!(
        "{n} iterations, mean loss {:.4} (first {w}) -> {:.4} (last {w}); wrote {}",
        outcome.mean_loss(0..w),
        outcome.mean_loss(n - w..n),
        out.display()
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    args.train.validate()?;
    let codec = args.codec.for_channels(args.audio_channels)?;
    let (data, n_conditions) = match &args.data {
        Some(dir) => (encode_dir(dir, &codec)?, 0),
        None => (
            toy_training_set(&codec, args.toy_per_class, args.toy_clip_s, args.train.seed)?,
            crate::toydata::TOY_CLASSES.len(),
        ),
    };
    let model = ToyDenoiser::new(args.toy.config(codec.latent_channels, n_conditions))?;
    let sched = make_schedule(24)?;
    let outcome = train(&model, &data, &args.train, &sched)?;
    let stamp = Stamp::new("train", args.train.seed, args)?;
    save(&args.out, &outcome, &args.train, &codec, &stamp, None)?;
    Ok(outcome)
}

pub fn cmd_finetune(args: &FinetuneArgs) -> Result<TrainOutcome> {
    args.train.validate()?;
    if args.train.mode_set.contains(&MaskMode::Morph) {
        return Err(Error::Config("fine-tuning uses forward/backward extension only; morph is not allowed".into()).into());
    }
    let base = Checkpoint::load(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let codec = checkpoint_codec(&base)?;
    let data = encode_dir(&args.data, &codec)?;
    let sched = make_schedule(24)?;
    let outcome = finetune(&base.model()?, &data, &args.train, &sched)?;
    let stamp = Stamp::new("finetune", args.train.seed, args)?;
    let parent = base.meta.get("stamp").cloned();
    save(&args.out, &outcome, &args.train, &codec, &stamp, parent)?;
    Ok(outcome)
}
