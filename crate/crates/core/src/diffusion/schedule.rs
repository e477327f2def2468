use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Latent;

/// A point on the noise path `z = alpha * x0 + sigma * noise`.
///
/// `position` runs from 0 (clean) to 1 (pure noise) and is what the
/// denoisers embed as their time input; `alpha = cos(pi/2 * position)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub alpha: f64,
    pub sigma: f64,
    pub position: f64,
}

impl NoiseLevel {
    pub fn at_position(position: f64) -> Self {
        if position <= 0.0 {
            return Self::clean();
        }
        if position >= 1.0 {
            return Self::pure_noise();
        }
        let theta = FRAC_PI_2 * position;
        Self {
            alpha: theta.cos(),
            sigma: theta.sin(),
            position,
        }
    }

    pub fn clean() -> Self {
        Self {
            alpha: 1.0,
            sigma: 0.0,
            position: 0.0,
        }
    }

    pub fn pure_noise() -> Self {
        Self {
            alpha: 0.0,
            sigma: 1.0,
            position: 1.0,
        }
    }

    /// Log signal-to-noise half ratio `ln(alpha / sigma)`.
    pub fn lambda(&self) -> f64 {
        (self.alpha / self.sigma).ln()
    }
}

/// Cosine schedule sampled at step midpoints: step `t` of `n` sits at
/// position `(t + 0.5) / n`, so step 0 is the least noisy.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
}

impl NoiseSchedule {
    pub fn n_steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn level(&self, t: usize) -> Result<NoiseLevel> {
        if t >= self.n_steps() {
            return Err(Error::StepIndex {
                index: t,
                len: self.n_steps(),
            });
        }
        Ok(NoiseLevel {
            alpha: self.alpha[t],
            sigma: self.sigma[t],
            position: (t as f64 + 0.5) / self.n_steps() as f64,
        })
    }
}

pub fn make_schedule(n_steps: usize) -> Result<NoiseSchedule> {
    if n_steps == 0 {
        return Err(Error::Config("a schedule needs at least one step".into()));
    }
    let (alpha, sigma) = (0..n_steps)
        .map(|t| {
            let theta = FRAC_PI_2 * (t as f64 + 0.5) / n_steps as f64;
            (theta.cos(), theta.sin())
        })
        .unzip();
    Ok(NoiseSchedule { alpha, sigma })
}

/// `alpha_t * z0 + sigma_t * noise`.
pub fn forward_diffuse(z0: &Latent, t: usize, noise: &Latent, sched: &NoiseSchedule) -> Result<Latent> {
    forward_diffuse_at(z0, sched.level(t)?, noise)
}

pub fn forward_diffuse_at(z0: &Latent, level: NoiseLevel, noise: &Latent) -> Result<Latent> {
    z0.lincomb(level.alpha, noise, level.sigma)
}

/// `alpha_t * noise - sigma_t * z0`.
pub fn v_target(z0: &Latent, noise: &Latent, t: usize, sched: &NoiseSchedule) -> Result<Latent> {
    v_target_at(z0, noise, sched.level(t)?)
}

pub fn v_target_at(z0: &Latent, noise: &Latent, level: NoiseLevel) -> Result<Latent> {
    noise.lincomb(level.alpha, z0, -level.sigma)
}

/// Clean estimate `alpha * z_t - sigma * v`.
pub fn recover_x0(z_t: &Latent, v: &Latent, level: NoiseLevel) -> Result<Latent> {
    z_t.lincomb(level.alpha, v, -level.sigma)
}

/// Noise estimate `sigma * z_t + alpha * v`.
pub fn recover_noise(z_t: &Latent, v: &Latent, level: NoiseLevel) -> Result<Latent> {
    z_t.lincomb(level.sigma, v, level.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn twenty_four_steps_are_variance_preserving() {
        let s = make_schedule(24).unwrap();
        assert_eq!(s.n_steps(), 24);
        for t in 0..24 {
            assert!((s.alpha()[t].powi(2) + s.sigma()[t].powi(2) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_step_sits_at_the_midpoint() {
        let s = make_schedule(1).unwrap();
        let q = std::f64::consts::FRAC_PI_4;
        assert!((s.alpha()[0] - q.cos()).abs() < 1e-15);
        assert!((s.sigma()[0] - q.sin()).abs() < 1e-15);
        assert!((s.alpha()[0] - s.sigma()[0]).abs() < 1e-15);
    }

    #[test]
    fn monotone_over_a_thousand_steps() {
        let s = make_schedule(1000).unwrap();
        assert!(s.alpha().windows(2).all(|w| w[1] < w[0]));
        assert!(s.sigma().windows(2).all(|w| w[1] > w[0]));
        assert!(s.alpha()[0] > 0.999 && s.alpha()[999] < 0.002);
    }

    #[test]
    fn zero_steps_and_bad_index() {
        assert!(matches!(make_schedule(0), Err(Error::Config(_))));
        let s = make_schedule(4).unwrap();
        assert!(matches!(s.level(4), Err(Error::StepIndex { index: 4, len: 4 })));
        let z = Latent::zeros(1, 1, 40.0);
        assert!(forward_diffuse(&z, 9, &z, &s).is_err());
        assert!(v_target(&z, &z, 9, &s).is_err());
    }

    #[test]
    fn forward_process_limits() {
        let mut rng = rng_from_seed(1);
        let z0 = Latent::gaussian(3, 5, 40.0, &mut rng);
        let eps = Latent::gaussian(3, 5, 40.0, &mut rng);
        let s = make_schedule(1000).unwrap();
        let near_clean = forward_diffuse(&z0, 0, &eps, &s).unwrap();
        let err = near_clean.data().iter().zip(z0.data()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.01);
        let zero = Latent::zeros(3, 5, 40.0);
        let pure = forward_diffuse(&zero, 500, &eps, &s).unwrap();
        assert_eq!(pure, eps.scaled(s.sigma()[500]));
    }

    #[test]
    fn v_round_trips_to_x0() {
        let mut rng = rng_from_seed(2);
        let s = make_schedule(24).unwrap();
        for t in 0..24 {
            let z0 = Latent::gaussian(4, 7, 40.0, &mut rng);
            let eps = Latent::gaussian(4, 7, 40.0, &mut rng);
            let zt = forward_diffuse(&z0, t, &eps, &s).unwrap();
            let v = v_target(&z0, &eps, t, &s).unwrap();
            let level = s.level(t).unwrap();
            let x0 = recover_x0(&zt, &v, level).unwrap();
            let e = recover_noise(&zt, &v, level).unwrap();
            for i in 0..z0.data().len() {
                assert!((x0.data()[i] - z0.data()[i]).abs() <= 1e-10);
                assert!((e.data()[i] - eps.data()[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn v_target_special_cases() {
        let mut rng = rng_from_seed(3);
        let z0 = Latent::gaussian(2, 3, 40.0, &mut rng);
        let eps = Latent::gaussian(2, 3, 40.0, &mut rng);
        assert_eq!(v_target_at(&z0, &eps, NoiseLevel::clean()).unwrap(), eps);
        let s = make_schedule(24).unwrap();
        let lv = s.level(7).unwrap();
        let v = v_target(&z0, &z0, 7, &s).unwrap();
        for (a, b) in v.data().iter().zip(z0.data()) {
            assert!((a - (lv.alpha - lv.sigma) * b).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_energy_of_forward_process() {
        // E||z_t||^2 = alpha^2 ||z0||^2 + sigma^2 * n * d
        let mut rng = rng_from_seed(4);
        let s = make_schedule(24).unwrap();
        let t = 12;
        let z0 = Latent::gaussian(4, 16, 40.0, &mut rng).scaled(2.0);
        let lv = s.level(t).unwrap();
        let expected = lv.alpha.powi(2) * z0.sq_norm() + lv.sigma.powi(2) * 64.0;
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let eps = Latent::gaussian(4, 16, 40.0, &mut rng);
                forward_diffuse(&z0, t, &eps, &s).unwrap().sq_norm()
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean - expected).abs() / expected < 0.03, "{mean} vs {expected}");
    }
}
