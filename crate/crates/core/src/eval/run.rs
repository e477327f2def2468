use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_stats, frechet_distance, Embedder, EmbeddingStats};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::wav::read_wav;

pub const REPORT_FILE: &str = "fad_report.json";

/// Seconds of prompt to remove from the start and end of a candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    #[serde(default)]
    pub head_s: f64,
    #[serde(default)]
    pub tail_s: f64,
}

/// Crop regions keyed by candidate file name. Files without an entry are
/// used whole.
pub type CropSpecs = BTreeMap<String, CropSpec>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDiagnostic {
    pub set: String,
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seconds_used: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDiagnostics {
    pub files_found: usize,
    pub files_used: usize,
    pub windows: usize,
    pub dim: usize,
    pub condition_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fad: f64,
    pub embedder: String,
    /// How embeddings are pooled before fitting the Gaussians.
    pub pooling: String,
    pub candidate: SetDiagnostics,
    pub reference: SetDiagnostics,
    pub files: Vec<FileDiagnostic>,
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn crop(audio: &AudioBuffer, spec: CropSpec) -> Result<AudioBuffer> {
    let sr = audio.sample_rate() as f64;
    let head = (spec.head_s.max(0.0) * sr).round() as usize;
    let tail = (spec.tail_s.max(0.0) * sr).round() as usize;
    if head + tail >= audio.len() {
        return Err(Error::Domain(format!(
            "cropping {head}+{tail} samples leaves nothing of {}",
            audio.len()
        )));
    }
    audio.slice(head, audio.len() - tail)
}

type Embedded = (FileDiagnostic, Vec<Vec<f64>>);

fn embed_set(set: &str, items: Vec<(String, Result<AudioBuffer>)>, embedder: &dyn Embedder, crops: &CropSpecs) -> Vec<Embedded> {
    items
        .into_par_iter()
        .map(|(name, audio)| {
            let outcome = audio.and_then(|a| {
                let a = match crops.get(&name) {
                    Some(&c) => crop(&a, c)?,
                    None => a,
                };
                let v = embedder.embed(&a)?;
                Ok((a.duration_s(), v))
            });
            match outcome {
                Ok((secs, v)) => (
                    FileDiagnostic {
                        set: set.into(),
                        name,
                        status: "ok".into(),
                        error: None,
                        seconds_used: secs,
                        windows: v.len(),
                    },
                    v,
                ),
                Err(e) => (
                    FileDiagnostic {
                        set: set.into(),
                        name,
                        status: "error".into(),
                        error: Some(e.to_string()),
                        seconds_used: 0.0,
                        windows: 0,
                    },
                    Vec::new(),
                ),
            }
        })
        .collect()
}

fn summarize(set: &str, embedded: &[Embedded], dim: usize) -> Result<(EmbeddingStats, SetDiagnostics)> {
    let vectors: Vec<Vec<f64>> = embedded.iter().flat_map(|(_, v)| v.iter().cloned()).collect();
    let stats = fit_stats(&vectors).map_err(|e| Error::Domain(format!("{set} set: {e}")))?;
    let diag = SetDiagnostics {
        files_found: embedded.len(),
        files_used: embedded.iter().filter(|(d, _)| d.error.is_none()).count(),
        windows: vectors.len(),
        dim,
        condition_number: stats.condition_number(),
    };
    Ok((stats, diag))
}

fn evaluate_items(
    candidates: Vec<(String, Result<AudioBuffer>)>,
    references: Vec<(String, Result<AudioBuffer>)>,
    embedder: &dyn Embedder,
    crops: &CropSpecs,
) -> Result<EvalReport> {
    let cand = embed_set("candidate", candidates, embedder, crops);
    let refs = embed_set("reference", references, embedder, &CropSpecs::new());
    let (cs, cd) = summarize("candidate", &cand, embedder.dim())?;
    let (rs, rd) = summarize("reference", &refs, embedder.dim())?;
    Ok(EvalReport {
        fad: frechet_distance(&cs, &rs)?,
        embedder: embedder.name(),
        pooling: "window".into(),
        candidate: cd,
        reference: rd,
        files: cand.into_iter().chain(refs).map(|(d, _)| d).collect(),
    })
}

/// FAD between in-memory candidate and reference sets. Candidates are
/// cropped per `crops` before embedding; window-level embeddings are pooled.
pub fn evaluate_sets(
    candidates: &[(String, AudioBuffer)],
    references: &[(String, AudioBuffer)],
    embedder: &dyn Embedder,
    crops: &CropSpecs,
) -> Result<EvalReport> {
    let wrap = |s: &[(String, AudioBuffer)]| s.iter().map(|(n, a)| (n.clone(), Ok(a.clone()))).collect();
    evaluate_items(wrap(candidates), wrap(references), embedder, crops)
}

fn load_dir(dir: &Path) -> Result<Vec<(String, Result<AudioBuffer>)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Domain(format!("no .wav files in {}", dir.display())));
    }
    Ok(paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, read_wav(&p).map(|(a, _)| a))
        })
        .collect())
}

/// FAD between the WAVs of two directories. Unreadable files are listed in
/// the report and skipped.
pub fn evaluate_run(
    candidate_dir: impl AsRef<Path>,
    reference_dir: impl AsRef<Path>,
    embedder: &dyn Embedder,
    crops: &CropSpecs,
) -> Result<EvalReport> {
    evaluate_items(load_dir(candidate_dir.as_ref())?, load_dir(reference_dir.as_ref())?, embedder, crops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::spectral_embedder;
    use crate::rng::{gaussian_vec, rng_from_seed};

    fn noise_set(seed: u64, n: usize, len: usize) -> Vec<(String, AudioBuffer)> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| (format!("f{i}.wav"), AudioBuffer::mono(8000, gaussian_vec(&mut rng, len)).unwrap()))
            .collect()
    }

    #[test]
    fn identical_sets_score_zero() {
        let e = spectral_embedder(8, 0.05).unwrap();
        let s = noise_set(1, 4, 8000);
        let r = evaluate_sets(&s, &s, &e, &CropSpecs::new()).unwrap();
        assert!(r.fad <= 1e-6, "{}", r.fad);
        assert_eq!(r.candidate.windows, 80);
        assert_eq!(r.candidate.dim, 10);
        assert_eq!(r.pooling, "window");
    }

    #[test]
    fn crops_shorten_and_overcrop_is_reported() {
        let e = spectral_embedder(8, 0.05).unwrap();
        let s = noise_set(2, 3, 8000);
        let mut crops = CropSpecs::new();
        crops.insert("f0.wav".into(), CropSpec { head_s: 0.3, tail_s: 0.0 });
        crops.insert("f1.wav".into(), CropSpec { head_s: 0.6, tail_s: 0.5 });
        let r = evaluate_sets(&s, &s, &e, &crops).unwrap();
        let f0 = &r.files[0];
        assert_eq!(f0.status, "ok");
        assert!((f0.seconds_used - 0.7).abs() < 1e-12);
        assert_eq!(f0.windows, 14);
        assert_eq!(r.files[1].status, "error");
        assert_eq!(r.candidate.files_used, 2);
        assert_eq!(r.candidate.files_found, 3);
    }

    #[test]
    fn directories_with_unreadable_files() {
        let c = tempfile::tempdir().unwrap();
        for (n, a) in noise_set(3, 3, 4000) {
            crate::wav::write_wav(c.path().join(n), &a, crate::wav::SampleFormat::Float32).unwrap();
        }
        std::fs::write(c.path().join("broken.wav"), b"not a wav").unwrap();
        let e = spectral_embedder(8, 0.05).unwrap();
        let r = evaluate_run(c.path(), c.path(), &e, &CropSpecs::new()).unwrap();
        assert!(r.fad <= 1e-6);
        let broken: Vec<_> = r.files.iter().filter(|f| f.name == "broken.wav").collect();
        assert_eq!(broken.len(), 2);
        assert!(broken.iter().all(|f| f.status == "error"));
        let empty = tempfile::tempdir().unwrap();
        assert!(evaluate_run(empty.path(), c.path(), &e, &CropSpecs::new()).is_err());
    }
}
