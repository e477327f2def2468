//! Exact posterior-mean denoiser for a Gaussian prior on each latent frame.
//!
//! With `z_t = alpha * z0 + sigma * eps` and `z0 ~ N(mu0, cov0)` per frame,
//!
//! ```text
//! E[z0 | z_t] = mu0 + alpha * cov0 * M^-1 * (z_t - alpha * mu0),   M = alpha^2 cov0 + sigma^2 I
//! E[eps | z_t] = sigma * M^-1 * (z_t - alpha * mu0)
//! v            = alpha * E[eps | z_t] - sigma * E[z0 | z_t]
//! ```
//!
//! Computing `v` from the two expectations keeps it finite at `sigma = 0`.

use nalgebra::{DMatrix, DVector};

use super::Denoiser;
use crate::diffusion::NoiseLevel;
use crate::error::{Error, Result};
use crate::latent::Latent;

#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    mu0: DVector<f64>,
    cov0: DMatrix<f64>,
    /// `Some(s^2)` when `cov0 = s^2 I`.
    isotropic: Option<f64>,
}

impl GaussianDenoiser {
    /// Per-frame prior `N(mu0, cov0)`. `cov0` must be symmetric positive definite.
    pub fn new(mu0: Vec<f64>, cov0: Vec<Vec<f64>>) -> Result<Self> {
        let n = mu0.len();
        if n == 0 {
            return Err(Error::Domain("prior dimension must be positive".into()));
        }
        if cov0.len() != n || cov0.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("covariance must be {n}x{n}")));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| cov0[i][j]);
        Self::from_matrix(DVector::from_vec(mu0), cov)
    }

    pub fn from_matrix(mu0: DVector<f64>, cov0: DMatrix<f64>) -> Result<Self> {
        let n = mu0.len();
        if cov0.nrows() != n || cov0.ncols() != n {
            return Err(Error::Shape(format!("covariance must be {n}x{n}")));
        }
        if mu0.iter().chain(cov0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("prior has non-finite entries".into()));
        }
        let scale = cov0.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (cov0[(i, j)] - cov0[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain("covariance is not symmetric".into()));
                }
            }
        }
        if cov0.clone().cholesky().is_none() {
            return Err(Error::Domain("covariance is not positive definite".into()));
        }
        let s2 = cov0[(0, 0)];
        let isotropic = (0..n)
            .all(|i| (0..n).all(|j| cov0[(i, j)] == if i == j { s2 } else { 0.0 }))
            .then_some(s2);
        Ok(Self { mu0, cov0, isotropic })
    }

    /// Isotropic prior `N(mu0, s2 * I)`.
    pub fn isotropic(mu0: Vec<f64>, s2: f64) -> Result<Self> {
        let n = mu0.len();
        Self::from_matrix(DVector::from_vec(mu0), DMatrix::identity(n, n) * s2)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov0
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic.is_some()
    }

    fn check(&self, z_t: &Latent) -> Result<()> {
        if z_t.n_channels() != self.dim() {
            return Err(Error::Shape(format!(
                "latent has {} channels, prior has dimension {}",
                z_t.n_channels(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Posterior means `(E[z0|z_t], E[eps|z_t])` through the general matrix path.
    pub fn posterior_matrix(&self, z_t: &Latent, level: NoiseLevel) -> Result<(Latent, Latent)> {
        self.check(z_t)?;
        let n = self.dim();
        let (a, s) = (level.alpha, level.sigma);
        let m = &self.cov0 * (a * a) + DMatrix::identity(n, n) * (s * s);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Domain("posterior system is singular".into()))?;
        let mut x0 = z_t.clone();
        let mut eps = z_t.clone();
        for f in 0..z_t.n_frames() {
            let u = DVector::from_column_slice(z_t.frame(f)) - &self.mu0 * a;
            let w = chol.solve(&u);
            let xf = &self.mu0 + (&self.cov0 * &w) * a;
            let ef = w * s;
            x0.frame_mut(f).copy_from_slice(xf.as_slice());
            eps.frame_mut(f).copy_from_slice(ef.as_slice());
        }
        Ok((x0, eps))
    }

    /// Posterior means through the scalar path; requires an isotropic prior.
    pub fn posterior_scalar(&self, z_t: &Latent, level: NoiseLevel) -> Result<(Latent, Latent)> {
        self.check(z_t)?;
        let s2 = self
            .isotropic
            .ok_or_else(|| Error::Domain("scalar path needs an isotropic prior".into()))?;
        let (a, s) = (level.alpha, level.sigma);
        let denom = a * a * s2 + s * s;
        let mut x0 = z_t.clone();
        let mut eps = z_t.clone();
        for f in 0..z_t.n_frames() {
            for c in 0..self.dim() {
                let u = z_t.get(c, f) - a * self.mu0[c];
                x0.set(c, f, self.mu0[c] + a * s2 / denom * u);
                eps.set(c, f, s / denom * u);
            }
        }
        Ok((x0, eps))
    }

    pub fn posterior(&self, z_t: &Latent, level: NoiseLevel) -> Result<(Latent, Latent)> {
        if self.isotropic.is_some() {
            self.posterior_scalar(z_t, level)
        } else {
            self.posterior_matrix(z_t, level)
        }
    }
}

impl Denoiser for GaussianDenoiser {
    fn predict_v(&self, z_t: &Latent, level: NoiseLevel, _condition: Option<u32>) -> Result<Latent> {
        let (x0, eps) = self.posterior(z_t, level)?;
        eps.lincomb(level.alpha, &x0, -level.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_schedule;
    use crate::rng::{gaussian, rng_from_seed};

    fn prior2() -> GaussianDenoiser {
        GaussianDenoiser::new(vec![0.5, -1.0], vec![vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap()
    }

    #[test]
    fn rejects_bad_covariances() {
        assert!(GaussianDenoiser::new(vec![0.0; 2], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianDenoiser::new(vec![0.0; 2], vec![vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
        assert!(GaussianDenoiser::new(vec![0.0; 2], vec![vec![1.0]]).is_err());
        assert!(matches!(
            GaussianDenoiser::new(vec![0.0; 2], vec![vec![0.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn noiseless_and_pure_noise_limits() {
        let d = prior2();
        let z = Latent::from_frames(2, 1, 40.0, vec![0.3, 0.7]).unwrap();
        let tiny = NoiseLevel::at_position(1e-7);
        let x0 = d.predict_x0(&z, tiny, None).unwrap();
        for c in 0..2 {
            assert!((x0.get(c, 0) - z.get(c, 0) / tiny.alpha).abs() < 1e-9);
        }
        let x0 = d.predict_x0(&z, NoiseLevel::pure_noise(), None).unwrap();
        assert_eq!(x0.frame(0), &[0.5, -1.0]);
        let v = d.predict_v(&z, NoiseLevel::clean(), None).unwrap();
        assert!(v.data().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn scalar_and_matrix_paths_agree() {
        let d = GaussianDenoiser::isotropic(vec![0.2, -0.4, 1.0], 0.7).unwrap();
        assert!(d.is_isotropic());
        let sched = make_schedule(24).unwrap();
        let mut rng = rng_from_seed(8);
        for t in 0..24 {
            let z = Latent::gaussian(3, 5, 40.0, &mut rng);
            let lv = sched.level(t).unwrap();
            let (xs, es) = d.posterior_scalar(&z, lv).unwrap();
            let (xm, em) = d.posterior_matrix(&z, lv).unwrap();
            for i in 0..15 {
                assert!((xs.data()[i] - xm.data()[i]).abs() <= 1e-12);
                assert!((es.data()[i] - em.data()[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn x0_and_v_are_consistent() {
        let d = prior2();
        let sched = make_schedule(24).unwrap();
        let mut rng = rng_from_seed(9);
        for t in [0, 5, 23] {
            let lv = sched.level(t).unwrap();
            let z = Latent::gaussian(2, 4, 40.0, &mut rng);
            let v = d.predict_v(&z, lv, None).unwrap();
            let x0 = d.predict_x0(&z, lv, None).unwrap();
            let (post, _) = d.posterior(&z, lv).unwrap();
            for i in 0..8 {
                assert!((x0.data()[i] - post.data()[i]).abs() < 1e-12);
                assert!((x0.data()[i] - (lv.alpha * z.data()[i] - lv.sigma * v.data()[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn posterior_mean_matches_importance_weighted_monte_carlo() {
        // Oracle: E[z0|z_t] ~ sum_i w_i z0_i / sum_i w_i with z0_i ~ prior and
        // w_i = N(z_t; alpha z0_i, sigma^2 I).
        let d = prior2();
        let lv = NoiseLevel::at_position(0.5);
        let mut rng = rng_from_seed(10);
        let chol = d.covariance().clone().cholesky().unwrap();
        let l = chol.l();
        let z = Latent::from_frames(2, 1, 40.0, vec![0.9, -0.2]).unwrap();
        let (mut acc, mut wsum) = ([0.0f64; 2], 0.0f64);
        for _ in 0..1_000_000 {
            let g = DVector::from_vec(vec![gaussian(&mut rng), gaussian(&mut rng)]);
            let z0 = d.mean() + &l * g;
            let r0 = z.get(0, 0) - lv.alpha * z0[0];
            let r1 = z.get(1, 0) - lv.alpha * z0[1];
            let w = (-(r0 * r0 + r1 * r1) / (2.0 * lv.sigma * lv.sigma)).exp();
            acc[0] += w * z0[0];
            acc[1] += w * z0[1];
            wsum += w;
        }
        let x0 = d.predict_x0(&z, lv, None).unwrap();
        for c in 0..2 {
            let mc = acc[c] / wsum;
            assert!((mc - x0.get(c, 0)).abs() <= 0.02 * x0.get(c, 0).abs(), "{mc} vs {}", x0.get(c, 0));
        }
    }
}
