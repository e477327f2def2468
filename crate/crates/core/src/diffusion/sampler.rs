//! Deterministic masked sampler with audio prompt guidance.
//!
//! Each model query runs two branches: the running state `z` (unmasked) and a
//! copy of it whose prompt regions are overwritten with the prompt latents
//! forward-diffused to the current level using one noise draw fixed for the
//! whole run (masked). Their v-predictions are combined with
//! [`apg_combine`] on the frames being generated and the result drives a
//! deterministic update. Frames under the mask are advanced with the
//! unguided prediction only; they are replaced by the prompt afterwards.
//!
//! The trajectory starts at pure noise: the initial Gaussian draw is the
//! state at `alpha = 0`, which is mapped onto the first schedule level with
//! an exact first-order step, then the schedule is walked from its noisiest
//! level down to clean.

use serde::{Deserialize, Serialize};

use super::guidance::{apg_combine, GuidanceConfig};
use super::schedule::{NoiseLevel, NoiseSchedule};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::latent::Latent;
use crate::mask::{apply_mask, MaskSpec};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// First-order DDIM (eta = 0).
    Ddim,
    /// Second-order multistep update in data-prediction form (DPM-Solver++ 2M).
    /// Reduces to DDIM on its first step.
    #[default]
    DpmSolver2M,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub solver: Solver,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            solver: Solver::DpmSolver2M,
        }
    }
}

/// Everything that determines one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    /// `None` samples unconditionally with a single branch.
    pub mask: Option<MaskSpec>,
    pub prompt_head: Option<Latent>,
    pub prompt_tail: Option<Latent>,
    pub n_channels: usize,
    pub total_frames: usize,
    pub frame_rate: f64,
    pub guidance: GuidanceConfig,
    pub condition: Option<u32>,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn unconditional(n_channels: usize, total_frames: usize, frame_rate: f64, seed: u64) -> Self {
        Self {
            mask: None,
            prompt_head: None,
            prompt_tail: None,
            n_channels,
            total_frames,
            frame_rate,
            guidance: GuidanceConfig::default(),
            condition: None,
            seed,
        }
    }

    pub fn extend_forward(prompt: Latent, total_frames: usize, gamma: f64, seed: u64) -> Result<Self> {
        let spec = MaskSpec::extend_forward(prompt.n_frames(), total_frames)?;
        Self::masked(spec, Some(prompt), None, gamma, seed)
    }

    pub fn extend_backward(prompt: Latent, total_frames: usize, gamma: f64, seed: u64) -> Result<Self> {
        let spec = MaskSpec::extend_backward(prompt.n_frames(), total_frames)?;
        Self::masked(spec, None, Some(prompt), gamma, seed)
    }

    pub fn morph(head: Latent, tail: Latent, total_frames: usize, gamma: f64, seed: u64) -> Result<Self> {
        let spec = MaskSpec::morph(head.n_frames(), tail.n_frames(), total_frames)?;
        Self::masked(spec, Some(head), Some(tail), gamma, seed)
    }

    /// Masked request for an arbitrary spec. Shape and frame rate come from
    /// the prompts.
    pub fn masked(
        spec: MaskSpec,
        prompt_head: Option<Latent>,
        prompt_tail: Option<Latent>,
        gamma: f64,
        seed: u64,
    ) -> Result<Self> {
        let reference = prompt_head
            .as_ref()
            .or(prompt_tail.as_ref())
            .ok_or_else(|| Error::Shape("a masked request needs at least one prompt".into()))?;
        let req = Self {
            mask: Some(spec),
            n_channels: reference.n_channels(),
            frame_rate: reference.frame_rate(),
            total_frames: spec.total_frames,
            prompt_head,
            prompt_tail,
            guidance: GuidanceConfig::new(gamma)?,
            condition: None,
            seed,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_condition(mut self, condition: Option<u32>) -> Self {
        self.condition = condition;
        self
    }

    pub fn validate(&self) -> Result<()> {
        GuidanceConfig::new(self.guidance.gamma)?;
        if let Some(spec) = &self.mask {
            if spec.total_frames != self.total_frames {
                return Err(Error::Shape(format!(
                    "mask covers {} frames but the request generates {}",
                    spec.total_frames, self.total_frames
                )));
            }
            // Shape checks of the prompts against the spec.
            apply_mask(
                &Latent::zeros(self.n_channels, self.total_frames, self.frame_rate),
                self.prompt_head.as_ref(),
                self.prompt_tail.as_ref(),
                spec,
            )?;
        }
        Ok(())
    }
}

/// Samples with the default [`SamplerConfig`].
pub fn sample(model: &dyn Denoiser, request: &GenerationRequest, sched: &NoiseSchedule) -> Result<Latent> {
    sample_with(model, request, sched, &SamplerConfig::default())
}

/// Runs the sampler and returns the raw output `z'`; restoring the prompts
/// with [`crate::mask::postprocess`] is left to the caller.
pub fn sample_with(
    model: &dyn Denoiser,
    request: &GenerationRequest,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Latent> {
    request.validate()?;
    let (c, d, rate) = (request.n_channels, request.total_frames, request.frame_rate);
    let mut rng = rng_from_seed(request.seed);
    let mut z = Latent::gaussian(c, d, rate, &mut rng);

    // One prompt noise draw per run, shared by every step of the masked branch.
    let prompt_noise = request.mask.as_ref().map(|spec| {
        let head = (spec.prefix_frames > 0).then(|| Latent::gaussian(c, spec.prefix_frames, rate, &mut rng));
        let tail = (spec.suffix_frames > 0).then(|| Latent::gaussian(c, spec.suffix_frames, rate, &mut rng));
        (head, tail)
    });

    let n = sched.n_steps();
    // (step label, level): the pure-noise start is labelled `n`.
    let mut grid = Vec::with_capacity(n + 1);
    grid.push((n, NoiseLevel::pure_noise()));
    for t in (0..n).rev() {
        grid.push((t, sched.level(t)?));
    }

    let gamma = request.guidance.gamma;
    let mut prev: Option<(Latent, f64)> = None;
    for (i, &(step, level)) in grid.iter().enumerate() {
        let next = grid.get(i + 1).map(|g| g.1).unwrap_or_else(NoiseLevel::clean);
        let v_uncond = query(model, &z, level, request.condition, step)?;
        let v = match (&request.mask, &prompt_noise) {
            (Some(spec), Some((eh, et))) if gamma != 0.0 => {
                let head = noised_prompt(request.prompt_head.as_ref(), eh.as_ref(), level)?;
                let tail = noised_prompt(request.prompt_tail.as_ref(), et.as_ref(), level)?;
                let masked = apply_mask(&z, head.as_ref(), tail.as_ref(), spec)?;
                let v_masked = query(model, &masked, level, request.condition, step)?;
                let mut v = apg_combine(&v_uncond, &v_masked, gamma)?;
                // Masked frames of the state are never denoised toward the
                // prompt; they follow the unguided prediction.
                for f in spec.head_range().chain(spec.tail_range()) {
                    v.frame_mut(f).copy_from_slice(v_uncond.frame(f));
                }
                v
            }
            _ => v_uncond,
        };
        let x0 = z.lincomb(level.alpha, &v, -level.sigma)?;

        if next.sigma == 0.0 {
            z = x0;
            break;
        }
        if level.alpha == 0.0 {
            // Exact step out of pure noise: the noise estimate is z itself.
            z = z.lincomb(next.sigma, &x0, next.alpha)?;
            prev = None;
            continue;
        }
        z = match cfg.solver {
            Solver::Ddim => {
                let eps = z.lincomb(level.sigma, &v, level.alpha)?;
                x0.lincomb(next.alpha, &eps, next.sigma)?
            }
            Solver::DpmSolver2M => {
                let h = next.lambda() - level.lambda();
                let data = match &prev {
                    Some((prev_x0, prev_h)) => {
                        let r = prev_h / h;
                        let w = 0.5 / r;
                        x0.lincomb(1.0 + w, prev_x0, -w)?
                    }
                    None => x0.clone(),
                };
                let coef = -next.alpha * (-h).exp_m1();
                let out = z.lincomb(next.sigma / level.sigma, &data, coef)?;
                prev = Some((x0, h));
                out
            }
        };
        if !z.is_finite() {
            return Err(Error::SamplerDivergence { step });
        }
    }
    if !z.is_finite() {
        return Err(Error::SamplerDivergence { step: 0 });
    }
    Ok(z)
}

fn query(
    model: &dyn Denoiser,
    z: &Latent,
    level: NoiseLevel,
    condition: Option<u32>,
    step: usize,
) -> Result<Latent> {
    let v = model.predict_v(z, level, condition)?;
    z.check_same_shape(&v, "denoiser output")?;
    if !v.is_finite() {
        return Err(Error::SamplerDivergence { step });
    }
    Ok(v)
}

fn noised_prompt(prompt: Option<&Latent>, noise: Option<&Latent>, level: NoiseLevel) -> Result<Option<Latent>> {
    match (prompt, noise) {
        (Some(p), Some(e)) => Ok(Some(p.lincomb(level.alpha, e, level.sigma)?)),
        _ => Ok(None),
    }
}
