#![allow(dead_code)]

use genextend::denoisers::GaussianDenoiser;
use genextend::rng::{gaussian_vec, rng_from_seed};
use nalgebra::{DMatrix, DVector};

/// A 4-dimensional prior with a random orientation and eigenvalues spread
/// over [0.5, 2.5].
pub fn rotated_prior(seed: u64) -> GaussianDenoiser {
    let mut rng = rng_from_seed(seed);
    let a = DMatrix::from_vec(4, 4, gaussian_vec(&mut rng, 16));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 1.6, 2.5]));
    let cov = &q * d * q.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let mu = DVector::from_vec(vec![1.5, -1.0, 0.5, 2.0]);
    GaussianDenoiser::from_matrix(mu, cov).unwrap()
}

pub fn sample_moments(samples: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += DVector::from_column_slice(s);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = DVector::from_column_slice(s) - &mean;
        cov += &c * c.transpose();
    }
    (mean, cov / (n - 1.0))
}
