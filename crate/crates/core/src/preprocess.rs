//! Input preprocessing hooks applied to prompts before encoding.

use crate::audio::AudioBuffer;
use crate::error::Result;

pub trait Preprocessor: Send + Sync {
    fn name(&self) -> &str;
    fn process(&self, audio: AudioBuffer) -> Result<AudioBuffer>;
}

/// Placeholder for a speech-removal stage. Passes audio through unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct SpeechRemovalHook;

impl Preprocessor for SpeechRemovalHook {
    fn name(&self) -> &str {
        "speech-removal (pass-through)"
    }

    fn process(&self, audio: AudioBuffer) -> Result<AudioBuffer> {
        Ok(audio)
    }
}
