use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synthesize_noise_floor_with_source, RoomToneCorpus};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::wav::{write_wav, SampleFormat};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One line of `manifest.jsonl`. `path` is relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseFloorRecord {
    pub path: String,
    pub source: String,
    pub offset: usize,
    pub length: usize,
    pub seed: u64,
    pub channels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseFloorManifest {
    pub records: Vec<NoiseFloorRecord>,
}

impl NoiseFloorManifest {
    /// Reads a manifest, skipping lines that do not parse.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if let Ok(r) = serde_json::from_str::<NoiseFloorRecord>(&line) {
                records.push(r);
            }
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            for r in &self.records {
                serde_json::to_writer(&mut f, r)?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn paths(&self, dir: impl AsRef<Path>) -> Vec<PathBuf> {
        self.records.iter().map(|r| dir.as_ref().join(&r.path)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub manifest: NoiseFloorManifest,
    pub synthesized: usize,
    pub skipped: usize,
    /// `(file name, error message)` for every record that failed.
    pub failures: Vec<(String, String)>,
}

pub fn record_name(index: usize) -> String {
    format!("nf_{index:06}.wav")
}

fn is_valid(dir: &Path, rec: &NoiseFloorRecord, seed: u64, length: usize, channels: usize) -> bool {
    if rec.seed != seed || rec.length != length || rec.channels != channels {
        return false;
    }
    match hound::WavReader::open(dir.join(&rec.path)) {
        Ok(r) => r.duration() as usize == length && r.spec().channels as usize == channels,
        Err(_) => false,
    }
}

/// Writes `n_files` noise-floor WAVs plus `manifest.jsonl` into `out_dir`.
/// Records already present in the manifest with a matching seed, shape and a
/// readable file are kept as-is. Per-file failures are reported, and the
/// manifest lists only the files that exist.
pub fn build_dataset(
    corpus: &RoomToneCorpus,
    n_files: usize,
    length_samples: usize,
    channels: usize,
    out_dir: impl AsRef<Path>,
    seed: u64,
) -> Result<BuildReport> {
    corpus.validate()?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let existing: BTreeMap<String, NoiseFloorRecord> = if manifest_path.exists() {
        NoiseFloorManifest::read(&manifest_path)?
            .records
            .into_iter()
            .map(|r| (r.path.clone(), r))
            .collect()
    } else {
        BTreeMap::new()
    };

    let results: Vec<std::result::Result<(NoiseFloorRecord, bool), (String, String)>> = (0..n_files)
        .into_par_iter()
        .map(|i| {
            let name = record_name(i);
            let rec_seed = derive_seed(seed, i as u64);
            if let Some(rec) = existing.get(&name) {
                if is_valid(dir, rec, rec_seed, length_samples, channels) {
                    return Ok((rec.clone(), false));
                }
            }
            let made = synthesize_noise_floor_with_source(corpus, length_samples, channels, rec_seed).and_then(|(audio, src)| {
                write_wav(dir.join(&name), &audio, SampleFormat::Float32)?;
                Ok(NoiseFloorRecord {
                    path: name.clone(),
                    source: corpus.entries[src.entry].name.clone(),
                    offset: src.offset,
                    length: length_samples,
                    seed: rec_seed,
                    channels,
                })
            });
            made.map(|r| (r, true)).map_err(|e| (name, e.to_string()))
        })
        .collect();

    let mut report = BuildReport {
        manifest: NoiseFloorManifest::default(),
        synthesized: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok((rec, fresh)) => {
                if fresh {
                    report.synthesized += 1;
                } else {
                    report.skipped += 1;
                }
                report.manifest.records.push(rec);
            }
            Err(f) => report.failures.push(f),
        }
    }
    report.manifest.write(&manifest_path)?;
    if report.manifest.is_empty() && n_files > 0 {
        return Err(Error::Corpus(format!(
            "no noise floor file could be produced: {}",
            report.failures.first().map(|f| f.1.as_str()).unwrap_or("unknown error")
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisefloor::make_synthetic_room_tones;
    use crate::wav::read_wav;

    #[test]
    fn builds_counts_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let c = make_synthetic_room_tones(3, 1.0, 8000, 2).unwrap();
        let rep = build_dataset(&c, 100, 400, 2, dir.path(), 11).unwrap();
        assert_eq!(rep.manifest.len(), 100);
        assert_eq!(rep.synthesized, 100);
        assert!(rep.failures.is_empty());
        let wavs = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav"))
            .count();
        assert_eq!(wavs, 100);
        let seeds: std::collections::HashSet<u64> = rep.manifest.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 100);
        let back = NoiseFloorManifest::read(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, rep.manifest);

        let stamp = |p: &str| std::fs::metadata(dir.path().join(p)).unwrap().modified().unwrap();
        let before = stamp("nf_000042.wav");
        let again = build_dataset(&c, 100, 400, 2, dir.path(), 11).unwrap();
        assert_eq!(again.synthesized, 0);
        assert_eq!(again.skipped, 100);
        assert_eq!(stamp("nf_000042.wav"), before);
        assert_eq!(again.manifest, rep.manifest);
    }

    #[test]
    fn missing_files_are_regenerated_identically() {
        let dir = tempfile::tempdir().unwrap();
        let c = make_synthetic_room_tones(2, 1.0, 8000, 4).unwrap();
        build_dataset(&c, 5, 300, 1, dir.path(), 1).unwrap();
        let p = dir.path().join(record_name(3));
        let (orig, _) = read_wav(&p).unwrap();
        std::fs::remove_file(&p).unwrap();
        let rep = build_dataset(&c, 5, 300, 1, dir.path(), 1).unwrap();
        assert_eq!(rep.synthesized, 1);
        assert_eq!(read_wav(&p).unwrap().0, orig);
    }

    #[test]
    fn failures_are_reported_per_file() {
        let dir = tempfile::tempdir().unwrap();
        let c = make_synthetic_room_tones(1, 0.1, 8000, 4).unwrap();
        let err = build_dataset(&c, 3, 8000, 1, dir.path(), 1).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
        assert_eq!(NoiseFloorManifest::read(dir.path().join(MANIFEST_FILE)).unwrap().len(), 0);
    }
}
