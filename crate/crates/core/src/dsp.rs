//! Small signal-processing helpers shared by the synthesis and evaluation code.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Pearson correlation. Returns 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (ma, mb) = (mean(&a[..n]), mean(&b[..n]));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn fft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse FFT, real part, normalised by `1/n`.
pub fn ifft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Circular convolution of two equal-length signals via the FFT.
pub fn circular_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "circular convolution needs equal lengths");
    if a.is_empty() {
        return Vec::new();
    }
    let fa = fft(a);
    let fb = fft(b);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    ifft_real(&prod)
}

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut pa = a.to_vec();
    pa.resize(n, 0.0);
    let mut pb = b.to_vec();
    pb.resize(n, 0.0);
    let mut y = circular_convolve(&pa, &pb);
    y.truncate(out_len);
    y
}

/// Welch-averaged power spectrum with a Hann window and 50% overlap.
/// Returns `nfft / 2 + 1` bins. Signals shorter than `nfft` are zero padded.
pub fn welch_power(x: &[f64], nfft: usize) -> Vec<f64> {
    let window = hann(nfft);
    let hop = (nfft / 2).max(1);
    let bins = nfft / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut start = 0usize;
    loop {
        let mut frame = vec![0.0; nfft];
        for (i, f) in frame.iter_mut().enumerate() {
            if let Some(v) = x.get(start + i) {
                *f = v * window[i];
            }
        }
        let spec = fft(&frame);
        for (a, c) in acc.iter_mut().zip(&spec[..bins]) {
            *a += c.norm_sqr();
        }
        count += 1;
        start += hop;
        if start + nfft > x.len() {
            break;
        }
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

/// `10 * log10(max(p, floor))` for each bin.
pub fn to_db(power: &[f64], floor: f64) -> Vec<f64> {
    power.iter().map(|p| 10.0 * p.max(floor).log10()).collect()
}

/// Windowed RMS over consecutive non-overlapping windows of `window` samples.
pub fn windowed_rms(x: &[f64], window: usize) -> Vec<f64> {
    x.chunks_exact(window.max(1)).map(rms).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_convolution_matches_direct_sum() {
        let a = [1.0, 2.0, 0.5, -1.0, 3.0];
        let b = [0.2, -0.4, 1.0, 0.0, 0.7];
        let n = a.len();
        let got = circular_convolve(&a, &b);
        for k in 0..n {
            let want: f64 = (0..n).map(|j| a[j] * b[(k + n - j) % n]).sum();
            assert!((got[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_convolution_matches_direct_sum() {
        let a = [1.0, -2.0, 0.5];
        let b = [0.5, 0.25, 1.0, 2.0];
        let got = linear_convolve(&a, &b);
        assert_eq!(got.len(), 6);
        for k in 0..6 {
            let want: f64 = (0..a.len())
                .filter(|&j| k >= j && k - j < b.len())
                .map(|j| a[j] * b[k - j])
                .sum();
            assert!((got[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), 0.0);
    }
}
