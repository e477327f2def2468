//! Command-line front end: run configuration, reproducibility stamps and the
//! `extend`, `morph`, `synth-noisefloor`, `train`, `finetune`, `eval` and
//! `ablate` commands.

pub mod cli;
pub mod config;
pub mod evaluate;
pub mod exit;
pub mod generate;
pub mod model;
pub mod noisefloor;
pub mod stamp;
pub mod toydata;
pub mod training;

pub use cli::{run, run_from, Cli};
