//! Noise floor synthesis: stationary noise whose spectrum follows a room-tone
//! recording, obtained by circularly convolving a room-tone segment with
//! white noise.

mod corpus;
mod dataset;
mod synth;

pub use corpus::{make_synthetic_room_tones, RoomToneCorpus, RoomToneEntry};
pub use dataset::{build_dataset, BuildReport, NoiseFloorManifest, NoiseFloorRecord, MANIFEST_FILE};
pub use synth::{synthesize_noise_floor, synthesize_noise_floor_with_source, NoiseFloorSource};
