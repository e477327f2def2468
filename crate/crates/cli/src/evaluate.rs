//! `eval` and `ablate`: Fréchet distance reports and the guidance sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use genextend::eval::{evaluate_run, evaluate_sets, spectral_embedder, CropSpec, CropSpecs, EvalReport, REPORT_FILE};
use genextend::rng::derive_seed;
use genextend::{AudioBuffer, Error, MaskMode};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::generate::{Generator, MorphOffsets};
use crate::stamp::Stamp;
use crate::training::read_wav_dir;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedSettings {
    pub bands: usize,
    pub window_s: f64,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        Self { bands: 16, window_s: 0.25 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalArgs {
    pub candidate: PathBuf,
    pub reference: PathBuf,
    /// JSON object mapping candidate file names to `{head_s, tail_s}`.
    pub crops: Option<PathBuf>,
    /// Report path; defaults to `fad_report.json` in the candidate directory.
    pub out: Option<PathBuf>,
    pub embed: EmbedSettings,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let crops: CropSpecs = match &args.crops {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => CropSpecs::new(),
    };
    let embedder = spectral_embedder(args.embed.bands, args.embed.window_s)?;
    let report = evaluate_run(&args.candidate, &args.reference, &embedder, &crops)?;
    let out = args.out.clone().unwrap_or_else(|| args.candidate.join(REPORT_FILE));
    report.write_json(&out)?;
    Stamp::new("eval", 0, args)?.write_for(&out)?;
    eprintln!("FAD {:.6} -> {}", report.fad, out.display());
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblateArgs {
    /// Directory of prompt source WAVs.
    pub prompts: PathBuf,
    pub reference: PathBuf,
    pub out: PathBuf,
    pub gammas: Vec<f64>,
    /// Seconds taken from each source as a prompt.
    pub prompt_s: f64,
    /// Pass the reference set through the codec so both sets share its
    /// bandwidth.
    pub codec_reference: bool,
    pub embed: EmbedSettings,
    pub run: RunConfig,
}

pub const DEFAULT_GAMMAS: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const TABLE_FILE: &str = "ablation.csv";
pub const SERIES_FILE: &str = "ablation_series.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub gamma: f64,
    /// `extend` (forward) or `morph`.
    pub mode: String,
    pub fad: Option<f64>,
    pub files: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub gamma: Vec<f64>,
    pub fad: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ablation {
    pub rows: Vec<AblationRow>,
}

impl Ablation {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,mode,fad,files,status,error\n");
        for r in &self.rows {
            let fad = r.fad.map(|f| f.to_string()).unwrap_or_default();
            let (status, err) = match &r.error {
                Some(e) => ("error", e.replace(['"', '\n'], " ")),
                None => ("ok", String::new()),
            };
            let _ = writeln!(s, "{},{},{fad},{},{status},\"{err}\"", r.gamma, r.mode, r.files);
        }
        s
    }

    pub fn series(&self) -> std::collections::BTreeMap<String, Series> {
        let mut out: std::collections::BTreeMap<String, Series> = Default::default();
        for r in &self.rows {
            let e = out.entry(r.mode.clone()).or_insert(Series { gamma: vec![], fad: vec![] });
            e.gamma.push(r.gamma);
            e.fad.push(r.fad);
        }
        out
    }
}

/// One prompt per source: its first `prompt_s` seconds, plus its last
/// `prompt_s` seconds for use as a morph target.
fn prompts(sources: &[(String, AudioBuffer)], prompt_s: f64) -> Result<Vec<(String, AudioBuffer, AudioBuffer)>> {
    sources
        .iter()
        .map(|(name, a)| {
            let n = (prompt_s * a.sample_rate() as f64).round() as usize;
            if n == 0 || n > a.len() {
                return Err(Error::Domain(format!("{name} is shorter than the {prompt_s} s prompt")).into());
            }
            Ok((name.clone(), a.slice(0, n)?, a.slice(a.len() - n, a.len())?))
        })
        .collect()
}

fn run_row(
    gen: &Generator,
    mode: &str,
    gamma: f64,
    args: &AblateArgs,
    prompts: &[(String, AudioBuffer, AudioBuffer)],
    reference: &[(String, AudioBuffer)],
) -> Result<(f64, usize)> {
    let mut candidates = Vec::with_capacity(prompts.len());
    let mut crops = CropSpecs::new();
    for (i, (name, head, _)) in prompts.iter().enumerate() {
        let cfg = RunConfig {
            gamma,
            seed: derive_seed(args.run.seed, i as u64),
            ..args.run.clone()
        };
        let audio = if mode == "extend" {
            crops.insert(name.clone(), CropSpec { head_s: args.prompt_s, tail_s: 0.0 });
            gen.extend(head, MaskMode::ExtendForward, &cfg)?
        } else {
            let tail = &prompts[(i + 1) % prompts.len()].2;
            crops.insert(name.clone(), CropSpec { head_s: args.prompt_s, tail_s: args.prompt_s });
            gen.morph(head, tail, MorphOffsets::default(), &cfg)?
        };
        candidates.push((name.clone(), audio));
    }
    let embedder = spectral_embedder(args.embed.bands, args.embed.window_s)?;
    let report = evaluate_sets(&candidates, reference, &embedder, &crops)?;
    let used = report.candidate.files_used;
    if used == 0 {
        return Err(Error::Domain("no candidate could be embedded".into()).into());
    }
    Ok((report.fad, used))
}

/// Sweeps guidance strengths over forward extension and morphing. A failed
/// row is recorded and the sweep continues.
pub fn ablate(args: &AblateArgs) -> Result<Ablation> {
    if args.gammas.is_empty() {
        return Err(Error::Config("the gamma list is empty".into()).into());
    }
    args.run.validate()?;
    let sources = read_wav_dir(&args.prompts)?;
    let prompts = prompts(&sources, args.prompt_s)?;
    let first = &prompts[0].1;
    let gen = Generator::new(&args.run, first.n_channels(), first.sample_rate())?;
    let mut reference = read_wav_dir(&args.reference)?;
    if args.codec_reference {
        for (name, audio) in reference.iter_mut() {
            *audio = gen.roundtrip(audio).with_context(|| format!("reference {name}"))?;
        }
    }
    let mut rows = Vec::new();
    for &gamma in &args.gammas {
        for mode in ["extend", "morph"] {
            let row = match run_row(&gen, mode, gamma, args, &prompts, &reference) {
                Ok((fad, files)) => AblationRow { gamma, mode: mode.into(), fad: Some(fad), files, error: None },
                Err(e) => AblationRow { gamma, mode: mode.into(), fad: None, files: 0, error: Some(format!("{e:#}")) },
            };
            eprintln!(
                "gamma {gamma} {mode}: {}",
                row.fad.map(|f| format!("FAD {f:.6}")).unwrap_or_else(|| row.error.clone().unwrap_or_default())
            );
            rows.push(row);
        }
    }
    Ok(Ablation { rows })
}

pub fn write_ablation(out: &Path, ablation: &Ablation) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(TABLE_FILE), ablation.to_csv())?;
    std::fs::write(out.join(SERIES_FILE), serde_json::to_string_pretty(&ablation.series())?)?;
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<Ablation> {
    let ablation = ablate(args)?;
    write_ablation(&args.out, &ablation)?;
    Stamp::new("ablate", args.run.seed, args)?.write_for(&args.out)?;
    Ok(ablation)
}
