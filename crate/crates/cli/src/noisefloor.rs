//! `synth-noisefloor`: builds a noise-floor dataset directory.

use std::path::PathBuf;

use anyhow::{Context, Result};
use genextend::noisefloor::{build_dataset, make_synthetic_room_tones, BuildReport, RoomToneCorpus};
use serde::Serialize;

use crate::stamp::Stamp;

#[derive(Debug, Clone, Serialize)]
pub enum CorpusSource {
    /// Directory of room-tone WAVs.
    Dir(PathBuf),
    /// Generated room tones: file count, seconds each, sample rate.
    Synthetic { files: usize, duration_s: f64, sample_rate: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthArgs {
    pub corpus: CorpusSource,
    pub out: PathBuf,
    pub n_files: usize,
    pub length_s: f64,
    pub channels: usize,
    pub seed: u64,
}

pub fn cmd_synth_noisefloor(args: &SynthArgs) -> Result<BuildReport> {
    let corpus = match &args.corpus {
        CorpusSource::Dir(dir) => RoomToneCorpus::from_dir(dir).with_context(|| format!("loading corpus {}", dir.display()))?,
        CorpusSource::Synthetic {
            files,
            duration_s,
            sample_rate,
        } => make_synthetic_room_tones(*files, *duration_s, *sample_rate, args.seed)?,
    };
    let length = (args.length_s * corpus.sample_rate() as f64).round() as usize;
    let report = build_dataset(&corpus, args.n_files, length, args.channels, &args.out, args.seed)?;
    Stamp::new("synth-noisefloor", args.seed, args)?.write_for(&args.out)?;
    eprintln!(
        "{} records ({} synthesized, {} reused, {} failed) in {}",
        report.manifest.len(),
        report.synthesized,
        report.skipped,
        report.failures.len(),
        args.out.display()
    );
    for (name, err) in &report.failures {
        eprintln!("  {name}: {err}");
    }
    Ok(report)
}
