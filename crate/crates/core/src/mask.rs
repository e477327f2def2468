//! The masking function: pins prompt latent frames into a generation-length
//! latent. The same function prepares sampler inputs and restores prompts in
//! the sampler output.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Latent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Prompt at the start, continuation generated after it.
    ExtendForward,
    /// Prompt at the end, lead-in generated before it.
    ExtendBackward,
    /// One prompt at each end, transition generated between them.
    Morph,
}

impl MaskMode {
    pub const ALL: [MaskMode; 3] = [MaskMode::ExtendForward, MaskMode::ExtendBackward, MaskMode::Morph];

    pub fn name(self) -> &'static str {
        match self {
            MaskMode::ExtendForward => "forward",
            MaskMode::ExtendBackward => "backward",
            MaskMode::Morph => "morph",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forward" | "extend_forward" => Ok(MaskMode::ExtendForward),
            "backward" | "extend_backward" => Ok(MaskMode::ExtendBackward),
            "morph" => Ok(MaskMode::Morph),
            other => Err(Error::Config(format!("unknown mask mode `{other}`"))),
        }
    }
}

/// Placement of the prompt frames inside a `total_frames` generation.
///
/// The head prompt occupies `[head_offset, head_offset + prefix_frames)` and
/// the tail prompt `[total - tail_offset - suffix_frames, total - tail_offset)`.
/// Offsets default to zero (prompts at the extreme ends); frames left between
/// an offset prompt and the boundary are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub mode: MaskMode,
    pub prefix_frames: usize,
    pub suffix_frames: usize,
    pub total_frames: usize,
    #[serde(default)]
    pub head_offset: usize,
    #[serde(default)]
    pub tail_offset: usize,
}

impl MaskSpec {
    pub fn extend_forward(prefix_frames: usize, total_frames: usize) -> Result<Self> {
        Self::with_offsets(MaskMode::ExtendForward, prefix_frames, 0, total_frames, 0, 0)
    }

    pub fn extend_backward(suffix_frames: usize, total_frames: usize) -> Result<Self> {
        Self::with_offsets(MaskMode::ExtendBackward, 0, suffix_frames, total_frames, 0, 0)
    }

    pub fn morph(prefix_frames: usize, suffix_frames: usize, total_frames: usize) -> Result<Self> {
        Self::with_offsets(MaskMode::Morph, prefix_frames, suffix_frames, total_frames, 0, 0)
    }

    pub fn with_offsets(
        mode: MaskMode,
        prefix_frames: usize,
        suffix_frames: usize,
        total_frames: usize,
        head_offset: usize,
        tail_offset: usize,
    ) -> Result<Self> {
        let spec = Self {
            mode,
            prefix_frames,
            suffix_frames,
            total_frames,
            head_offset,
            tail_offset,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, s, d) = (self.prefix_frames, self.suffix_frames, self.total_frames);
        match self.mode {
            MaskMode::ExtendForward => {
                if s != 0 || self.tail_offset != 0 {
                    return Err(Error::Constraint("forward extension takes no tail prompt".into()));
                }
                if p == 0 {
                    return Err(Error::Constraint("prompt must be at least one frame".into()));
                }
                if p >= d {
                    return Err(Error::Constraint(format!(
                        "prompt of {p} frames must be shorter than the {d}-frame generation (T_z < d_z)"
                    )));
                }
            }
            MaskMode::ExtendBackward => {
                if p != 0 || self.head_offset != 0 {
                    return Err(Error::Constraint("backward extension takes no head prompt".into()));
                }
                if s == 0 {
                    return Err(Error::Constraint("prompt must be at least one frame".into()));
                }
                if s >= d {
                    return Err(Error::Constraint(format!(
                        "prompt of {s} frames must be shorter than the {d}-frame generation (T_z < d_z)"
                    )));
                }
            }
            MaskMode::Morph => {
                if p == 0 || s == 0 {
                    return Err(Error::Constraint("both morph prompts must be at least one frame".into()));
                }
                if p + s >= d {
                    return Err(Error::Constraint(format!(
                        "prompts of {p} + {s} frames break the rule that their total sum is less than the fixed generation length ({d} frames)"
                    )));
                }
            }
        }
        let head_end = self.head_offset + p;
        let tail_start = d
            .checked_sub(self.tail_offset + s)
            .ok_or_else(|| Error::Constraint("tail prompt offset exceeds generation".into()))?;
        if head_end > tail_start {
            return Err(Error::Constraint(format!(
                "prompt regions overlap: head ends at frame {head_end}, tail starts at {tail_start}"
            )));
        }
        Ok(())
    }

    pub fn head_range(&self) -> Range<usize> {
        self.head_offset..self.head_offset + self.prefix_frames
    }

    pub fn tail_range(&self) -> Range<usize> {
        let end = self.total_frames - self.tail_offset;
        end - self.suffix_frames..end
    }

    pub fn is_masked(&self, frame: usize) -> bool {
        self.head_range().contains(&frame) || self.tail_range().contains(&frame)
    }

    /// One flag per frame, true where a prompt is pinned.
    pub fn frame_mask(&self) -> Vec<bool> {
        (0..self.total_frames).map(|f| self.is_masked(f)).collect()
    }

    pub fn masked_frames(&self) -> usize {
        self.prefix_frames + self.suffix_frames
    }

    /// Frames produced by the generator: `d_z - T_z` for extension and
    /// `d_z - T_z1 - T_z2` for morphing.
    pub fn generated_frames(&self) -> usize {
        self.total_frames - self.masked_frames()
    }

    fn check_prompt(&self, prompt: Option<&Latent>, frames: usize, what: &str, channels: usize) -> Result<()> {
        match (frames, prompt) {
            (0, None) => Ok(()),
            (0, Some(_)) => Err(Error::Shape(format!("{what} prompt given but the mask has no {what} region"))),
            (_, None) => Err(Error::Shape(format!("{what} prompt of {frames} frames required"))),
            (n, Some(p)) => {
                if p.n_frames() != n {
                    Err(Error::Shape(format!("{what} prompt has {} frames, mask expects {n}", p.n_frames())))
                } else if p.n_channels() != channels {
                    Err(Error::Shape(format!(
                        "{what} prompt has {} channels, target has {channels}",
                        p.n_channels()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Copy of `target` with the head prompt written over the head region and the
/// tail prompt over the tail region. Every other frame is untouched.
pub fn apply_mask(
    target: &Latent,
    prompt_head: Option<&Latent>,
    prompt_tail: Option<&Latent>,
    spec: &MaskSpec,
) -> Result<Latent> {
    spec.validate()?;
    if target.n_frames() != spec.total_frames {
        return Err(Error::Shape(format!(
            "target has {} frames, mask expects {}",
            target.n_frames(),
            spec.total_frames
        )));
    }
    spec.check_prompt(prompt_head, spec.prefix_frames, "head", target.n_channels())?;
    spec.check_prompt(prompt_tail, spec.suffix_frames, "tail", target.n_channels())?;
    let mut out = target.clone();
    if let Some(head) = prompt_head {
        out.write_frames(spec.head_range().start, head)?;
    }
    if let Some(tail) = prompt_tail {
        out.write_frames(spec.tail_range().start, tail)?;
    }
    Ok(out)
}

/// Restores the prompt frames in a sampler output. Same contract as
/// [`apply_mask`].
pub fn postprocess(
    raw_output: &Latent,
    prompt_head: Option<&Latent>,
    prompt_tail: Option<&Latent>,
    spec: &MaskSpec,
) -> Result<Latent> {
    apply_mask(raw_output, prompt_head, prompt_tail, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn noise(channels: usize, frames: usize, seed: u64) -> Latent {
        Latent::gaussian(channels, frames, 40.0, &mut rng_from_seed(seed))
    }

    #[test]
    fn forward_extension_copies_prompt_to_start() {
        let target = noise(4, 520, 1);
        let prompt = noise(4, 130, 2);
        let spec = MaskSpec::extend_forward(130, 520).unwrap();
        let out = apply_mask(&target, Some(&prompt), None, &spec).unwrap();
        assert_eq!(out.slice_frames(0..130).unwrap().data(), prompt.data());
        assert_eq!(out.slice_frames(130..520).unwrap(), target.slice_frames(130..520).unwrap());
        assert_eq!(spec.generated_frames(), 390);
    }

    #[test]
    fn morph_leaves_middle_frames() {
        let target = noise(2, 520, 3);
        let spec = MaskSpec::morph(100, 100, 520).unwrap();
        let out = apply_mask(&target, Some(&noise(2, 100, 4)), Some(&noise(2, 100, 5)), &spec).unwrap();
        let unchanged = (0..520).filter(|&f| out.frame(f) == target.frame(f)).count();
        assert_eq!(unchanged, 320);
    }

    #[test]
    fn matching_prompt_is_a_no_op() {
        let target = noise(3, 50, 6);
        let spec = MaskSpec::extend_backward(10, 50).unwrap();
        let tail = target.slice_frames(40..50).unwrap();
        assert_eq!(apply_mask(&target, None, Some(&tail), &spec).unwrap(), target);
    }

    #[test]
    fn constraint_violations() {
        assert!(matches!(MaskSpec::extend_forward(520, 520), Err(Error::Constraint(_))));
        assert!(matches!(MaskSpec::extend_forward(0, 520), Err(Error::Constraint(_))));
        assert!(matches!(MaskSpec::extend_backward(600, 520), Err(Error::Constraint(_))));
        assert!(matches!(MaskSpec::morph(260, 260, 520), Err(Error::Constraint(_))));
        assert!(matches!(MaskSpec::morph(0, 10, 520), Err(Error::Constraint(_))));
        assert!(MaskSpec::morph(259, 260, 520).is_ok());
        assert!(MaskSpec::with_offsets(MaskMode::Morph, 10, 10, 40, 15, 16).is_err());
    }

    #[test]
    fn offsets_leave_interior_gaps() {
        let spec = MaskSpec::with_offsets(MaskMode::Morph, 4, 4, 40, 2, 3).unwrap();
        assert_eq!(spec.head_range(), 2..6);
        assert_eq!(spec.tail_range(), 33..37);
        let mask = spec.frame_mask();
        assert!(!mask[0] && !mask[1] && mask[2] && !mask[37] && !mask[39]);
        assert_eq!(spec.generated_frames(), 32);
    }

    #[test]
    fn prompt_shape_errors() {
        let target = noise(2, 40, 7);
        let spec = MaskSpec::extend_forward(10, 40).unwrap();
        assert!(matches!(apply_mask(&target, None, None, &spec), Err(Error::Shape(_))));
        assert!(apply_mask(&target, Some(&noise(2, 9, 8)), None, &spec).is_err());
        assert!(apply_mask(&target, Some(&noise(3, 10, 8)), None, &spec).is_err());
        assert!(apply_mask(&noise(2, 41, 7), Some(&noise(2, 10, 8)), None, &spec).is_err());
    }
}
