//! Argument parsing and dispatch.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use genextend::denoisers::TrainConfig;
use genextend::diffusion::Solver;
use genextend::wav::SampleFormat;
use genextend::{Error, MaskMode};

use crate::config::{desk_finetune_config, desk_train_config, parse_modes, ConfigFile, RunConfig};
use crate::evaluate::{cmd_ablate, cmd_eval, AblateArgs, EmbedSettings, EvalArgs, DEFAULT_GAMMAS};
use crate::exit::PartialFailure;
use crate::generate::{cmd_extend, cmd_morph, MorphOffsets};
use crate::noisefloor::{cmd_synth_noisefloor, CorpusSource, SynthArgs};
use crate::training::{cmd_finetune, cmd_train, FinetuneArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(name = "genextend", version, about = "Prompt-conditioned audio extension and morphing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Continue a prompt forward in time, or generate a lead-in to it.
    Extend {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "forward", value_parser = parse_direction)]
        direction: MaskMode,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenFlags,
    },
    /// Generate a transition that starts with A and ends with B.
    Morph {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Generated gap before A, in seconds (whole frames).
        #[arg(long, default_value_t = 0.0)]
        head_gap_s: f64,
        /// Generated gap after B, in seconds (whole frames).
        #[arg(long, default_value_t = 0.0)]
        tail_gap_s: f64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenFlags,
    },
    /// Build a noise-floor dataset from a room-tone corpus.
    SynthNoisefloor {
        /// Directory of room-tone WAVs.
        #[arg(long, conflicts_with = "synthetic_corpus")]
        corpus: Option<PathBuf>,
        /// Generate this many synthetic room tones instead of reading a corpus.
        #[arg(long)]
        synthetic_corpus: Option<usize>,
        #[arg(long, default_value_t = 20.0)]
        corpus_duration_s: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_files: usize,
        #[arg(long, default_value_t = 13.0)]
        length_s: f64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Train the toy denoiser (bundled toy corpus unless --data is given).
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        toy_per_class: usize,
        #[arg(long, default_value_t = 3.0)]
        toy_clip_s: f64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        context_frames: Option<usize>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Continue training a checkpoint on stationary data.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Fréchet distance between a candidate and a reference directory.
    Eval {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        crops: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedFlags,
    },
    /// Sweep the guidance strength over extension and morphing.
    Ablate {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated guidance strengths (default 0,1,...,6).
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        prompt_s: f64,
        /// Compare against the reference files as stored rather than after a
        /// codec round trip.
        #[arg(long)]
        raw_reference: bool,
        #[command(flatten)]
        embed: EmbedFlags,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenFlags,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML file with run settings and optional [train] / [toy] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenFlags {
    /// Toy checkpoint; without one a Gaussian prior is fitted to the prompts.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub condition: Option<u32>,
    #[arg(long, value_parser = parse_solver)]
    pub solver: Option<Solver>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<SampleFormat>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    #[arg(long)]
    pub ema_every: Option<usize>,
    #[arg(long)]
    pub mask_dropout_prob: Option<f64>,
    #[arg(long)]
    pub condition_dropout_prob: Option<f64>,
    #[arg(long)]
    pub mask_len_max_s: Option<f64>,
    #[arg(long)]
    pub segment_s: Option<f64>,
    /// Comma-separated mask modes: forward, backward, morph.
    #[arg(long)]
    pub modes: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedFlags {
    #[arg(long, default_value_t = EmbedSettings::default().bands)]
    pub bands: usize,
    #[arg(long, default_value_t = EmbedSettings::default().window_s)]
    pub window_s: f64,
}

fn parse_direction(s: &str) -> std::result::Result<MaskMode, String> {
    match MaskMode::parse(s) {
        Ok(m @ (MaskMode::ExtendForward | MaskMode::ExtendBackward)) => Ok(m),
        _ => Err(format!("direction must be forward or backward, got `{s}`")),
    }
}

fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    match s {
        "ddim" => Ok(Solver::Ddim),
        "dpm2m" | "dpm_solver2_m" => Ok(Solver::DpmSolver2M),
        _ => Err(format!("solver must be ddim or dpm2m, got `{s}`")),
    }
}

fn parse_format(s: &str) -> std::result::Result<SampleFormat, String> {
    match s {
        "pcm16" => Ok(SampleFormat::Pcm16),
        "pcm24" => Ok(SampleFormat::Pcm24),
        "float32" => Ok(SampleFormat::Float32),
        _ => Err(format!("format must be pcm16, pcm24 or float32, got `{s}`")),
    }
}

impl Common {
    fn file(&self) -> Result<ConfigFile> {
        ConfigFile::load_or_default(self.config.as_deref())
    }

    fn apply(&self, run: &mut RunConfig) {
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.gamma {
            run.gamma = v;
        }
        if let Some(v) = self.steps {
            run.steps = v;
        }
        if let Some(v) = self.duration_s {
            run.duration_s = v;
        }
    }

    /// Run settings from the config file with command-line overrides.
    pub fn run_config(&self, gen: &GenFlags) -> Result<RunConfig> {
        let mut run = self.file()?.run;
        self.apply(&mut run);
        if gen.model.is_some() {
            run.model = gen.model.clone();
        }
        if gen.condition.is_some() {
            run.condition = gen.condition;
        }
        if let Some(s) = gen.solver {
            run.solver = s;
        }
        if let Some(f) = gen.format {
            run.format = f;
        }
        run.validate()?;
        Ok(run)
    }
}

impl TrainFlags {
    fn apply(&self, mut cfg: TrainConfig, seed: Option<u64>) -> Result<TrainConfig> {
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(
            iterations => iterations,
            batch_size => batch_size,
            learning_rate => learning_rate,
            weight_decay => weight_decay,
            warmup_steps => warmup_steps,
            ema_decay => ema_decay,
            ema_every => ema_every,
            mask_dropout_prob => mask_dropout_prob,
            condition_dropout_prob => condition_dropout_prob,
            mask_len_max_s => mask_len_max_seconds,
            segment_s => segment_seconds
        );
        if let Some(m) = &self.modes {
            cfg.mode_set = parse_modes(m)?;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

impl From<&EmbedFlags> for EmbedSettings {
    fn from(f: &EmbedFlags) -> Self {
        Self {
            bands: f.bands,
            window_s: f.window_s,
        }
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extend {
            input,
            output,
            direction,
            common,
            gen,
        } => cmd_extend(&input, direction, &output, &common.run_config(&gen)?),
        Command::Morph {
            a,
            b,
            output,
            head_gap_s,
            tail_gap_s,
            common,
            gen,
        } => {
            let offsets = MorphOffsets {
                head_s: head_gap_s,
                tail_s: tail_gap_s,
            };
            cmd_morph(&a, &b, &output, offsets, &common.run_config(&gen)?)
        }
        Command::SynthNoisefloor {
            corpus,
            synthetic_corpus,
            corpus_duration_s,
            out,
            n_files,
            length_s,
            channels,
            common,
        } => {
            let run = common.run_config(&GenFlags::default())?;
            let corpus = match (corpus, synthetic_corpus) {
                (Some(dir), _) => CorpusSource::Dir(dir),
                (None, Some(files)) => CorpusSource::Synthetic {
                    files,
                    duration_s: corpus_duration_s,
                    sample_rate: run.codec.sample_rate,
                },
                (None, None) => return Err(Error::Config("give --corpus <dir> or --synthetic-corpus <n>".into()).into()),
            };
            let report = cmd_synth_noisefloor(&SynthArgs {
                corpus,
                out,
                n_files,
                length_s,
                channels,
                seed: run.seed,
            })?;
            if !report.failures.is_empty() {
                return Err(PartialFailure(format!("{} of {n_files} files failed", report.failures.len())).into());
            }
            Ok(())
        }
        Command::Train {
            out,
            data,
            toy_per_class,
            toy_clip_s,
            channels,
            layers,
            width,
            context_frames,
            train,
            common,
        } => {
            let file = common.file()?;
            let mut run = file.run.clone();
            common.apply(&mut run);
            let mut toy = file.toy.clone().unwrap_or_default();
            toy.layers = layers.unwrap_or(toy.layers);
            toy.width = width.unwrap_or(toy.width);
            toy.context_frames = context_frames.unwrap_or(toy.context_frames);
            let cfg = train.apply(file.train.unwrap_or_else(desk_train_config), common.seed)?;
            cmd_train(&TrainArgs {
                out,
                data,
                toy_per_class,
                toy_clip_s,
                audio_channels: channels,
                codec: run.codec,
                toy,
                train: cfg,
            })
            .map(drop)
        }
        Command::Finetune {
            checkpoint,
            data,
            out,
            train,
            common,
        } => {
            let file = common.file()?;
            let cfg = train.apply(file.train.unwrap_or_else(desk_finetune_config), common.seed)?;
            cmd_finetune(&FinetuneArgs {
                checkpoint,
                out,
                data,
                train: cfg,
            })
            .map(drop)
        }
        Command::Eval {
            candidate,
            reference,
            crops,
            out,
            embed,
        } => cmd_eval(&EvalArgs {
            candidate,
            reference,
            crops,
            out,
            embed: (&embed).into(),
        })
        .map(drop),
        Command::Ablate {
            prompts,
            reference,
            out,
            gammas,
            prompt_s,
            raw_reference,
            embed,
            common,
            gen,
        } => {
            let gammas = if gammas.is_empty() { DEFAULT_GAMMAS.to_vec() } else { gammas };
            let ablation = cmd_ablate(&AblateArgs {
                prompts,
                reference,
                out,
                gammas,
                prompt_s,
                codec_reference: !raw_reference,
                embed: (&embed).into(),
                run: common.run_config(&gen)?,
            })?;
            match ablation.failures() {
                0 => Ok(()),
                n => Err(PartialFailure(format!("{n} of {} sweep rows failed", ablation.rows.len())).into()),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}
