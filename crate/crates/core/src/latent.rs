use std::ops::Range;

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, Rng};

/// An `n_channels x n_frames` latent matrix at a fixed frame rate.
///
/// Storage is frame-major: the `n_channels` values of frame `f` are contiguous.
/// `pad_samples` records how many zero samples the codec appended to the
/// source audio so that decoding can trim them again.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    n_channels: usize,
    n_frames: usize,
    frame_rate: f64,
    data: Vec<f64>,
    pad_samples: usize,
}

impl Latent {
    pub fn zeros(n_channels: usize, n_frames: usize, frame_rate: f64) -> Self {
        Self {
            n_channels,
            n_frames,
            frame_rate,
            data: vec![0.0; n_channels * n_frames],
            pad_samples: 0,
        }
    }

    /// Wraps frame-major data. Rejects size mismatches and non-finite values.
    pub fn from_frames(
        n_channels: usize,
        n_frames: usize,
        frame_rate: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != n_channels * n_frames {
            return Err(Error::Shape(format!(
                "latent data has {} values, expected {n_channels} x {n_frames}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("latent contains non-finite values".into()));
        }
        Ok(Self {
            n_channels,
            n_frames,
            frame_rate,
            data,
            pad_samples: 0,
        })
    }

    /// Standard normal latent drawn from `rng`, frame by frame.
    pub fn gaussian(n_channels: usize, n_frames: usize, frame_rate: f64, rng: &mut Rng) -> Self {
        Self {
            n_channels,
            n_frames,
            frame_rate,
            data: gaussian_vec(rng, n_channels * n_frames),
            pad_samples: 0,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.frame_rate
    }

    pub fn pad_samples(&self) -> usize {
        self.pad_samples
    }

    pub fn set_pad_samples(&mut self, pad: usize) {
        self.pad_samples = pad;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, channel: usize, frame: usize) -> f64 {
        self.data[frame * self.n_channels + channel]
    }

    pub fn set(&mut self, channel: usize, frame: usize, value: f64) {
        self.data[frame * self.n_channels + channel] = value;
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.n_channels..(frame + 1) * self.n_channels]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [f64] {
        &mut self.data[frame * self.n_channels..(frame + 1) * self.n_channels]
    }

    /// Copy of frames `range`.
    pub fn slice_frames(&self, range: Range<usize>) -> Result<Latent> {
        if range.start > range.end || range.end > self.n_frames {
            return Err(Error::Shape(format!(
                "frame range {range:?} out of bounds for {} frames",
                self.n_frames
            )));
        }
        Ok(Latent {
            n_channels: self.n_channels,
            n_frames: range.len(),
            frame_rate: self.frame_rate,
            data: self.data[range.start * self.n_channels..range.end * self.n_channels].to_vec(),
            pad_samples: 0,
        })
    }

    /// Overwrites frames starting at `start` with all frames of `src`.
    pub fn write_frames(&mut self, start: usize, src: &Latent) -> Result<()> {
        if src.n_channels != self.n_channels {
            return Err(Error::Shape(format!(
                "channel mismatch: {} vs {}",
                src.n_channels, self.n_channels
            )));
        }
        if start + src.n_frames > self.n_frames {
            return Err(Error::Shape(format!(
                "writing {} frames at {start} overruns {} frames",
                src.n_frames, self.n_frames
            )));
        }
        let c = self.n_channels;
        self.data[start * c..(start + src.n_frames) * c].copy_from_slice(&src.data);
        Ok(())
    }

    pub fn same_shape(&self, other: &Latent) -> bool {
        self.n_channels == other.n_channels && self.n_frames == other.n_frames
    }

    pub fn check_same_shape(&self, other: &Latent, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.n_channels, self.n_frames, other.n_channels, other.n_frames
            )))
        }
    }

    /// Elementwise `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Latent, b: f64) -> Result<Latent> {
        self.check_same_shape(other, "linear combination")?;
        let mut out = self.clone();
        for (o, y) in out.data.iter_mut().zip(&other.data) {
            *o = a * *o + b * y;
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Latent {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-frame energy, `sum_c z[c, f]^2`.
    pub fn frame_energies(&self) -> Vec<f64> {
        (0..self.n_frames)
            .map(|f| self.frame(f).iter().map(|v| v * v).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_frame_major() {
        let z = Latent::from_frames(2, 3, 40.0, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        assert_eq!(z.get(1, 0), 1.0);
        assert_eq!(z.get(0, 2), 4.0);
        assert_eq!(z.frame(1), &[2.0, 3.0]);
        assert_eq!(z.duration_s(), 3.0 / 40.0);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(Latent::from_frames(2, 3, 40.0, vec![0.0; 5]).is_err());
        assert!(Latent::from_frames(1, 1, 40.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn slice_and_write_frames() {
        let mut z = Latent::zeros(2, 4, 40.0);
        let p = Latent::from_frames(2, 2, 40.0, vec![1.0; 4]).unwrap();
        z.write_frames(1, &p).unwrap();
        assert_eq!(z.data(), &[0., 0., 1., 1., 1., 1., 0., 0.]);
        assert_eq!(z.slice_frames(1..3).unwrap().data(), p.data());
        assert!(z.write_frames(3, &p).is_err());
        assert!(z.slice_frames(2..5).is_err());
    }
}
