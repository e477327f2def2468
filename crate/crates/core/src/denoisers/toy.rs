//! Small residual MLP denoiser.
//!
//! Every latent frame is predicted from a window of `context_frames`
//! neighbouring frames (zero padded at the edges), a sinusoidal embedding of
//! the noise position, and the per-channel mean and log mean square of the
//! whole input latent. The pooled statistics are the only path by which distant
//! frames (e.g. a prompt) influence a prediction. A learned condition
//! embedding is added after the input projection; row 0 of that table is the
//! unconditional (dropped-label) embedding.
//!
//! ```text
//! h0   = W_in [window; temb; pooled] + b_in + cond[c]
//! h+1  = h + W2 silu(W1 h + b1) + b2          (repeated `layers` times)
//! v    = W_out h_L + b_out
//! ```
//!
//! Parameters live in one flat vector so optimisers, EMA and checkpoints can
//! treat the model as a single tensor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Denoiser;
use crate::diffusion::NoiseLevel;
use crate::error::{Error, Result};
use crate::latent::Latent;
use crate::rng::{gaussian, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub layers: usize,
    pub width: usize,
    pub latent_channels: usize,
    pub context_frames: usize,
    pub n_conditions: usize,
    pub time_embedding: usize,
    pub seed: u64,
}

impl ToyConfig {
    pub const DEFAULT_TIME_EMBEDDING: usize = 16;

    fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.width == 0 || self.latent_channels == 0 || self.context_frames == 0 {
            return Err(Error::Config("toy denoiser dimensions must be positive".into()));
        }
        if self.time_embedding == 0 || self.time_embedding % 2 != 0 {
            return Err(Error::Config("time embedding size must be a positive even number".into()));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.context_frames * self.latent_channels + self.time_embedding + 2 * self.latent_channels
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    w_in: usize,
    b_in: usize,
    cond: usize,
    blocks: Vec<[usize; 4]>,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &ToyConfig) -> Self {
        let (w, d, c) = (cfg.width, cfg.input_dim(), cfg.latent_channels);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let w_in = take(w * d);
        let b_in = take(w);
        let cond = take((cfg.n_conditions + 1) * w);
        let blocks = (0..cfg.layers)
            .map(|_| [take(w * w), take(w), take(w * w), take(w)])
            .collect();
        let w_out = take(c * w);
        let b_out = take(c);
        Self {
            w_in,
            b_in,
            cond,
            blocks,
            w_out,
            b_out,
            total: at,
        }
    }
}

/// One supervised example: predict `target` from `input` at `level`.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: Latent,
    pub level: NoiseLevel,
    pub condition: Option<u32>,
    pub target: Latent,
    /// Frames that contribute to the loss; `None` counts every frame.
    pub loss_frames: Option<Vec<bool>>,
}

impl Example {
    fn counts(&self, frame: usize) -> bool {
        self.loss_frames.as_ref().is_none_or(|m| m[frame])
    }

    fn counted_values(&self) -> usize {
        let frames = (0..self.target.n_frames()).filter(|&f| self.counts(f)).count();
        frames * self.target.n_channels()
    }
}

#[derive(Debug, Clone)]
pub struct ToyDenoiser {
    cfg: ToyConfig,
    layout: Layout,
    params: Vec<f64>,
}

struct Trace {
    x: Vec<f64>,
    hs: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
    out: Vec<f64>,
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// `out = W x + b` with `W` row-major `rows x x.len()`.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = b[r] + w[r * n..(r + 1) * n].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

impl ToyDenoiser {
    /// Builds a model with weights drawn deterministically from `cfg.seed`.
    pub fn new(cfg: ToyConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let mut params = vec![0.0; layout.total];
        let mut rng = rng_from_seed(cfg.seed);
        let (w, d, c) = (cfg.width, cfg.input_dim(), cfg.latent_channels);
        let mut fill = |params: &mut [f64], offset: usize, n: usize, std: f64| {
            for p in &mut params[offset..offset + n] {
                *p = std * gaussian(&mut rng);
            }
        };
        fill(&mut params, layout.w_in, w * d, (1.0 / d as f64).sqrt());
        fill(&mut params, layout.cond, (cfg.n_conditions + 1) * w, 0.02);
        for blk in &layout.blocks {
            fill(&mut params, blk[0], w * w, (1.0 / w as f64).sqrt());
            fill(&mut params, blk[2], w * w, 0.1 / (w as f64).sqrt());
        }
        fill(&mut params, layout.w_out, c * w, 0.1 / (w as f64).sqrt());
        Ok(Self { cfg, layout, params })
    }

    /// Rebuilds a model from a config and a saved parameter vector.
    pub fn from_params(cfg: ToyConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        if params.len() != layout.total {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self { cfg, layout, params })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn condition_row(&self, condition: Option<u32>) -> Result<usize> {
        match condition {
            None => Ok(0),
            Some(c) if (c as usize) < self.cfg.n_conditions => Ok(c as usize + 1),
            Some(c) => Err(Error::Config(format!(
                "condition {c} outside the model's {} labels",
                self.cfg.n_conditions
            ))),
        }
    }

    fn time_embedding(&self, position: f64) -> Vec<f64> {
        let half = self.cfg.time_embedding / 2;
        let mut e = Vec::with_capacity(2 * half);
        for i in 0..half {
            let freq = if half > 1 { 100f64.powf(1.0 - i as f64 / (half - 1) as f64) } else { 1.0 };
            let angle = position * freq;
            e.push(angle.sin());
            e.push(angle.cos());
        }
        e
    }

    /// Time embedding followed by the per-channel mean and log mean square of `z`.
    fn shared_features(&self, z: &Latent, position: f64) -> Vec<f64> {
        let c = z.n_channels();
        let mut out = self.time_embedding(position);
        let mut pooled = vec![0.0; 2 * c];
        for f in 0..z.n_frames() {
            for (ch, v) in z.frame(f).iter().enumerate() {
                pooled[ch] += v;
                pooled[c + ch] += v * v;
            }
        }
        let n = z.n_frames().max(1) as f64;
        out.extend(pooled[..c].iter().map(|v| v / n));
        out.extend(pooled[c..].iter().map(|v| (v / n + 1e-6).ln()));
        out
    }

    fn input(&self, z: &Latent, frame: usize, shared: &[f64]) -> Vec<f64> {
        let (k, c) = (self.cfg.context_frames, self.cfg.latent_channels);
        let mut x = vec![0.0; self.cfg.input_dim()];
        let start = frame as isize - ((k - 1) / 2) as isize;
        for j in 0..k {
            let f = start + j as isize;
            if f >= 0 && (f as usize) < z.n_frames() {
                x[j * c..(j + 1) * c].copy_from_slice(z.frame(f as usize));
            }
        }
        x[k * c..].copy_from_slice(shared);
        x
    }

    fn forward_frame(&self, x: Vec<f64>, cond_row: usize) -> Trace {
        let p = &self.params;
        let (w, d, c) = (self.cfg.width, self.cfg.input_dim(), self.cfg.latent_channels);
        let l = &self.layout;
        let mut h = vec![0.0; w];
        affine(&p[l.w_in..l.w_in + w * d], &p[l.b_in..l.b_in + w], &x, &mut h);
        let crow = &p[l.cond + cond_row * w..l.cond + (cond_row + 1) * w];
        h.iter_mut().zip(crow).for_each(|(a, b)| *a += b);
        let mut hs = vec![h];
        let mut pres = Vec::with_capacity(l.blocks.len());
        let mut pre = vec![0.0; w];
        let mut delta = vec![0.0; w];
        for blk in &l.blocks {
            let h = hs.last().unwrap();
            affine(&p[blk[0]..blk[0] + w * w], &p[blk[1]..blk[1] + w], h, &mut pre);
            let act: Vec<f64> = pre.iter().map(|&v| silu(v)).collect();
            affine(&p[blk[2]..blk[2] + w * w], &p[blk[3]..blk[3] + w], &act, &mut delta);
            let next: Vec<f64> = h.iter().zip(&delta).map(|(a, b)| a + b).collect();
            pres.push(pre.clone());
            hs.push(next);
        }
        let mut out = vec![0.0; c];
        affine(&p[l.w_out..l.w_out + c * w], &p[l.b_out..l.b_out + c], hs.last().unwrap(), &mut out);
        Trace { x, hs, pres, out }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d out`.
    fn backward_frame(&self, trace: &Trace, cond_row: usize, g_out: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let (w, d, c) = (self.cfg.width, self.cfg.input_dim(), self.cfg.latent_channels);
        let l = &self.layout;
        let h_last = trace.hs.last().unwrap();
        let mut g_h = vec![0.0; w];
        for r in 0..c {
            let g = g_out[r];
            grad[l.b_out + r] += g;
            let row = l.w_out + r * w;
            for j in 0..w {
                grad[row + j] += g * h_last[j];
                g_h[j] += g * p[row + j];
            }
        }
        for (bi, blk) in l.blocks.iter().enumerate().rev() {
            let pre = &trace.pres[bi];
            let h = &trace.hs[bi];
            let act: Vec<f64> = pre.iter().map(|&v| silu(v)).collect();
            let mut g_act = vec![0.0; w];
            for r in 0..w {
                let g = g_h[r];
                grad[blk[3] + r] += g;
                let row = blk[2] + r * w;
                for j in 0..w {
                    grad[row + j] += g * act[j];
                    g_act[j] += g * p[row + j];
                }
            }
            let mut g_prev = g_h.clone();
            for r in 0..w {
                let g = g_act[r] * silu_grad(pre[r]);
                grad[blk[1] + r] += g;
                let row = blk[0] + r * w;
                for j in 0..w {
                    grad[row + j] += g * h[j];
                    g_prev[j] += g * p[row + j];
                }
            }
            g_h = g_prev;
        }
        for r in 0..w {
            let g = g_h[r];
            grad[l.b_in + r] += g;
            grad[l.cond + cond_row * w + r] += g;
            let row = l.w_in + r * d;
            for j in 0..d {
                grad[row + j] += g * trace.x[j];
            }
        }
    }

    fn check_input(&self, z: &Latent) -> Result<()> {
        if z.n_channels() != self.cfg.latent_channels {
            return Err(Error::Shape(format!(
                "latent has {} channels, model expects {}",
                z.n_channels(),
                self.cfg.latent_channels
            )));
        }
        Ok(())
    }

    /// Mean squared error over every element of every example, and its
    /// gradient with respect to the flat parameter vector.
    pub fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        for e in batch {
            self.check_input(&e.input)?;
            e.input.check_same_shape(&e.target, "example target")?;
            self.condition_row(e.condition)?;
            if e.loss_frames.as_ref().is_some_and(|m| m.len() != e.target.n_frames()) {
                return Err(Error::Shape("loss mask length differs from frame count".into()));
            }
        }
        let total: usize = batch.iter().map(Example::counted_values).sum();
        if total == 0 {
            return Err(Error::Config("batch has no frames that count toward the loss".into()));
        }
        let scale = 1.0 / total as f64;
        let per_item: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|e| {
                let row = self.condition_row(e.condition).unwrap_or(0);
                let shared = self.shared_features(&e.input, e.level.position);
                let mut grad = vec![0.0; self.params.len()];
                let mut sse = 0.0;
                for f in (0..e.input.n_frames()).filter(|&f| e.counts(f)) {
                    let trace = self.forward_frame(self.input(&e.input, f, &shared), row);
                    let g_out: Vec<f64> = trace
                        .out
                        .iter()
                        .zip(e.target.frame(f))
                        .map(|(o, t)| {
                            sse += (o - t) * (o - t);
                            2.0 * (o - t) * scale
                        })
                        .collect();
                    self.backward_frame(&trace, row, &g_out, &mut grad);
                }
                (sse, grad)
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut sse = 0.0;
        for (s, g) in per_item {
            sse += s;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((sse * scale, grad))
    }

    /// Loss only.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let mut sse = 0.0;
        let mut total = 0usize;
        for e in batch {
            let v = self.predict_v(&e.input, e.level, e.condition)?;
            for f in (0..v.n_frames()).filter(|&f| e.counts(f)) {
                sse += v.frame(f).iter().zip(e.target.frame(f)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                total += v.n_channels();
            }
        }
        Ok(sse / total.max(1) as f64)
    }
}

impl Denoiser for ToyDenoiser {
    fn predict_v(&self, z_t: &Latent, level: NoiseLevel, condition: Option<u32>) -> Result<Latent> {
        self.check_input(z_t)?;
        let row = self.condition_row(condition)?;
        let shared = self.shared_features(z_t, level.position);
        let frames: Vec<Vec<f64>> = (0..z_t.n_frames())
            .into_par_iter()
            .map(|f| self.forward_frame(self.input(z_t, f, &shared), row).out)
            .collect();
        Latent::from_frames(
            z_t.n_channels(),
            z_t.n_frames(),
            z_t.frame_rate(),
            frames.concat(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn small(seed: u64) -> ToyDenoiser {
        ToyDenoiser::new(ToyConfig {
            layers: 2,
            width: 8,
            latent_channels: 3,
            context_frames: 3,
            n_conditions: 2,
            time_embedding: 4,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn untrained_output_is_finite_and_shaped() {
        let m = small(1);
        let z = Latent::gaussian(3, 11, 40.0, &mut rng_from_seed(2));
        let v = m.predict_v(&z, NoiseLevel::at_position(0.3), Some(1)).unwrap();
        assert_eq!((v.n_channels(), v.n_frames()), (3, 11));
        assert!(v.is_finite());
        assert!(m.predict_v(&z, NoiseLevel::pure_noise(), None).unwrap().is_finite());
    }

    #[test]
    fn same_seed_same_model() {
        let z = Latent::gaussian(3, 6, 40.0, &mut rng_from_seed(3));
        let lv = NoiseLevel::at_position(0.7);
        let a = small(5).predict_v(&z, lv, None).unwrap();
        let b = small(5).predict_v(&z, lv, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, small(6).predict_v(&z, lv, None).unwrap());
    }

    #[test]
    fn shape_and_label_errors() {
        let m = small(1);
        let z = Latent::zeros(4, 2, 40.0);
        assert!(matches!(m.predict_v(&z, NoiseLevel::clean(), None), Err(Error::Shape(_))));
        let z = Latent::zeros(3, 2, 40.0);
        assert!(matches!(m.predict_v(&z, NoiseLevel::clean(), Some(2)), Err(Error::Config(_))));
        assert!(ToyDenoiser::new(ToyConfig { width: 0, ..small(1).cfg }).is_err());
    }

    #[test]
    fn loss_matches_prediction_path() {
        let m = small(4);
        let mut rng = rng_from_seed(7);
        let batch: Vec<Example> = (0..3)
            .map(|i| Example {
                input: Latent::gaussian(3, 5, 40.0, &mut rng),
                level: NoiseLevel::at_position(0.2 + 0.3 * i as f64),
                condition: if i == 1 { None } else { Some(i as u32 / 2) },
                target: Latent::gaussian(3, 5, 40.0, &mut rng),
                loss_frames: (i == 2).then(|| vec![true, false, true, true, false]),
            })
            .collect();
        let (l, _) = m.loss_and_grad(&batch).unwrap();
        assert!((l - m.loss(&batch).unwrap()).abs() < 1e-12);
    }
}
