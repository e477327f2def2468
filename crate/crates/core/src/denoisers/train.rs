//! Training loop for the toy denoiser.
//!
//! Per iteration and per batch element: crop a segment, draw a noise position
//! uniformly (step index plus a uniform offset inside the step), form `z_t`
//! and the v target, then
//!
//! * with probability `1 - mask_dropout_prob` draw a mask mode uniformly from
//!   `mode_set` and one length per masked end uniformly on
//!   `[0, mask_len_max_seconds]`; the masked frames get the clean latent
//!   forward-diffused with an independent noise draw and are left out of the
//!   loss;
//! * with probability `condition_dropout_prob` drop the label.
//!
//! The loss is the MSE on v. Parameters are updated with AdamW under linear
//! warmup and cosine decay, and an EMA copy is refreshed every `ema_every`
//! steps. Each iteration draws from its own seeded stream, and each batch
//! element from a child of it, so results do not depend on thread count.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{AdamW, Ema, LrSchedule};
use super::toy::{Example, ToyDenoiser};
use crate::diffusion::{NoiseLevel, NoiseSchedule};
use crate::error::{Error, Result};
use crate::latent::Latent;
use crate::mask::MaskMode;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    /// Cosine cycles after warmup; 0.5 decays to zero over the run.
    pub cosine_cycles: f64,
    pub ema_decay: f64,
    pub ema_every: usize,
    pub mask_dropout_prob: f64,
    pub condition_dropout_prob: f64,
    pub mask_len_max_seconds: f64,
    /// Length of the training crops (the generation length).
    pub segment_seconds: f64,
    pub mode_set: Vec<MaskMode>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 400_000,
            batch_size: 256,
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            warmup_steps: 4_000,
            cosine_cycles: 0.5,
            ema_decay: 0.99,
            ema_every: 100,
            mask_dropout_prob: 0.5,
            condition_dropout_prob: 0.2,
            mask_len_max_seconds: 3.25,
            segment_seconds: 13.0,
            mode_set: MaskMode::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Fine-tuning defaults: 15k iterations, extension modes only.
    pub fn finetune_default() -> Self {
        Self {
            iterations: 15_000,
            mode_set: vec![MaskMode::ExtendForward, MaskMode::ExtendBackward],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("mask_dropout_prob", self.mask_dropout_prob),
            ("condition_dropout_prob", self.condition_dropout_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rate must be positive and weight decay >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) || self.ema_every == 0 {
            return Err(Error::Config("ema decay must be in [0, 1) and ema_every positive".into()));
        }
        if !(self.mask_len_max_seconds >= 0.0 && self.mask_len_max_seconds < self.segment_seconds) {
            return Err(Error::Config(format!(
                "mask_len_max_seconds ({}) must be below the generation length ({} s)",
                self.mask_len_max_seconds, self.segment_seconds
            )));
        }
        if self.mode_set.is_empty() && self.mask_dropout_prob < 1.0 {
            return Err(Error::Config("mode_set is empty but masking is enabled".into()));
        }
        Ok(())
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            base_lr: self.learning_rate,
            warmup_steps: self.warmup_steps,
            total_steps: self.iterations,
            cycles: self.cosine_cycles,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub latent: Latent,
    pub label: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub items: Vec<TrainingItem>,
}

impl TrainingSet {
    pub fn new(items: Vec<TrainingItem>) -> Self {
        Self { items }
    }

    pub fn push(&mut self, latent: Latent, label: Option<u32>) {
        self.items.push(TrainingItem { latent, label });
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub loss: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub model: ToyDenoiser,
    pub ema: ToyDenoiser,
    pub history: Vec<IterationStats>,
    /// Batch elements that received a mask.
    pub masks_applied: usize,
    /// Batch elements whose label was dropped.
    pub conditions_dropped: usize,
    pub examples: usize,
}

impl TrainOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.history.iter().map(|s| s.loss).collect()
    }

    /// Mean loss over iterations `range`.
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.history[range];
        slice.iter().map(|s| s.loss).sum::<f64>() / slice.len().max(1) as f64
    }
}

/// Per-element draw outcome, used for the dropout counters.
struct Drawn {
    example: Example,
    masked: bool,
    dropped: bool,
}

fn draw_example(item: &TrainingItem, cfg: &TrainConfig, n_steps: usize, rng: &mut Rng) -> Result<Drawn> {
    let z = &item.latent;
    let rate = z.frame_rate();
    let seg = ((cfg.segment_seconds * rate).round() as usize).clamp(1, z.n_frames());
    let start = if z.n_frames() > seg { rng.random_range(0..=z.n_frames() - seg) } else { 0 };
    let z0 = z.slice_frames(start..start + seg)?;

    let t = rng.random_range(0..n_steps);
    let position = (t as f64 + rng.random::<f64>()) / n_steps as f64;
    let level = NoiseLevel::at_position(position);
    let eps = Latent::gaussian(z0.n_channels(), seg, rate, rng);
    let mut input = z0.lincomb(level.alpha, &eps, level.sigma)?;
    let target = eps.lincomb(level.alpha, &z0, -level.sigma)?;

    let mut loss_frames = None;
    let masked = rng.random::<f64>() >= cfg.mask_dropout_prob;
    if masked {
        let mode = cfg.mode_set[rng.random_range(0..cfg.mode_set.len())];
        let mut draw_len = || ((rng.random::<f64>() * cfg.mask_len_max_seconds * rate).round() as usize).min(seg - 1);
        let (mut head, mut tail) = match mode {
            MaskMode::ExtendForward => (draw_len(), 0),
            MaskMode::ExtendBackward => (0, draw_len()),
            MaskMode::Morph => (draw_len(), draw_len()),
        };
        // Keep at least one generated frame.
        while head + tail >= seg {
            if head >= tail { head -= 1 } else { tail -= 1 }
        }
        let fresh = Latent::gaussian(z0.n_channels(), seg, rate, rng);
        let renoised = z0.lincomb(level.alpha, &fresh, level.sigma)?;
        let mut keep = vec![true; seg];
        for f in (0..head).chain(seg - tail..seg) {
            input.frame_mut(f).copy_from_slice(renoised.frame(f));
            keep[f] = false;
        }
        loss_frames = Some(keep);
    }

    let dropped = item.label.is_some() && rng.random::<f64>() < cfg.condition_dropout_prob;
    let condition = if dropped { None } else { item.label };
    Ok(Drawn {
        example: Example {
            input,
            level,
            condition,
            target,
            loss_frames,
        },
        masked,
        dropped,
    })
}

fn check_dataset(model: &ToyDenoiser, data: &TrainingSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let channels = model.config().latent_channels;
    let rate = data.items[0].latent.frame_rate();
    for (i, item) in data.items.iter().enumerate() {
        if item.latent.n_channels() != channels {
            return Err(Error::Shape(format!(
                "item {i} has {} latent channels, model expects {channels}",
                item.latent.n_channels()
            )));
        }
        if item.latent.n_frames() < 2 {
            return Err(Error::Shape(format!("item {i} is shorter than two frames")));
        }
        if item.latent.frame_rate() != rate {
            return Err(Error::Shape(format!("item {i} has a different frame rate")));
        }
        if let Some(label) = item.label {
            if label as usize >= model.config().n_conditions {
                return Err(Error::Config(format!("item {i} has label {label} outside the model vocabulary")));
            }
        }
    }
    Ok(())
}

/// Trains `model` in place of a copy and returns it with its EMA twin.
pub fn train(model: &ToyDenoiser, data: &TrainingSet, cfg: &TrainConfig, sched: &NoiseSchedule) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(model, data)?;
    let mut model = model.clone();
    let mut opt = AdamW::new(model.n_params(), cfg.weight_decay);
    let mut ema = Ema::new(model.params(), cfg.ema_decay, cfg.ema_every);
    let lr = cfg.lr_schedule();
    let n_steps = sched.n_steps();
    let mut history = Vec::with_capacity(cfg.iterations);
    let (mut masks_applied, mut conditions_dropped) = (0, 0);

    for it in 0..cfg.iterations {
        let iter_seed = derive_seed(cfg.seed, it as u64);
        let drawn: Vec<Drawn> = (0..cfg.batch_size)
            .into_par_iter()
            .map(|b| {
                let mut rng = rng_from_seed(derive_seed(iter_seed, b as u64));
                let pick = rng.random_range(0..data.len());
                draw_example(&data.items[pick], cfg, n_steps, &mut rng)
            })
            .collect::<Result<_>>()?;
        masks_applied += drawn.iter().filter(|d| d.masked).count();
        conditions_dropped += drawn.iter().filter(|d| d.dropped).count();
        let batch: Vec<Example> = drawn.into_iter().map(|d| d.example).collect();

        let (loss, grad) = model.loss_and_grad(&batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDivergence { iteration: it });
        }
        let rate = lr.at(it);
        opt.step(model.params_mut(), &grad, rate);
        ema.observe(it, model.params());
        history.push(IterationStats { loss, lr: rate });
    }

    let ema_model = ToyDenoiser::from_params(model.config().clone(), ema.weights().to_vec())?;
    Ok(TrainOutcome {
        model,
        ema: ema_model,
        history,
        masks_applied,
        conditions_dropped,
        examples: cfg.iterations * cfg.batch_size,
    })
}

/// Continues training on stationary data with extension masks only.
pub fn finetune(model: &ToyDenoiser, data: &TrainingSet, cfg: &TrainConfig, sched: &NoiseSchedule) -> Result<TrainOutcome> {
    if cfg.mode_set.contains(&MaskMode::Morph) {
        return Err(Error::Config("fine-tuning uses forward/backward extension only; morph is not allowed".into()));
    }
    train(model, data, cfg, sched)
}
