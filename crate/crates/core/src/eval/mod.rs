//! Fréchet Audio Distance with pluggable embedders, the convolutional
//! noise matching baseline, and directory-level evaluation.

mod cnm;
mod embed;
mod run;
mod stats;

pub use cnm::{cnm_baseline, cnm_baseline_with, CnmConfig};
pub use embed::{spectral_embedder, Embedder, SpectralEmbedder, FLOOR_DB};
pub use run::{evaluate_run, evaluate_sets, CropSpec, CropSpecs, EvalReport, FileDiagnostic, SetDiagnostics, REPORT_FILE};
pub use stats::{fit_stats, frechet_distance, EmbeddingStats};
