use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Gaussian summary of an embedded audio set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n_samples: usize,
}

impl EmbeddingStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, n_samples: usize) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Shape(format!(
                "covariance is {}x{}, mean has {} entries",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        Ok(Self { mean, cov, n_samples })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Ratio of the largest to the smallest covariance eigenvalue. `None`
    /// when the smallest eigenvalue is not positive.
    pub fn condition_number(&self) -> Option<f64> {
        let ev = SymmetricEigen::new(self.cov.clone()).eigenvalues;
        let (lo, hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        (lo > 0.0).then(|| hi / lo)
    }
}

/// Sample mean and unbiased covariance.
pub fn fit_stats(vectors: &[Vec<f64>]) -> Result<EmbeddingStats> {
    if vectors.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 vectors, got {}", vectors.len())));
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::Shape(format!("vector of dim {} in a set of dim {d}", v.len())));
    }
    let n = vectors.len() as f64;
    let mut mean = DVector::zeros(d);
    for v in vectors {
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for v in vectors {
        let c = DVector::from_column_slice(v) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= n - 1.0;
    EmbeddingStats::new(mean, cov, vectors.len())
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let s = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * s * e.eigenvectors.transpose()
}

/// ‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^½), with the trace of the square root
/// taken from the eigenvalues of Σa^½ Σb Σa^½ (negatives clamped to 0).
pub fn frechet_distance(a: &EmbeddingStats, b: &EmbeddingStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dims differ: {} vs {}", a.dim(), b.dim())));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let ra = sym_sqrt(&a.cov);
    let m = &ra * &b.cov * &ra;
    let cross: f64 = SymmetricEigen::new((&m + m.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    Ok((diff + a.cov.trace() + b.cov.trace() - 2.0 * cross).max(0.0))
}
