//! Fourier frequencies, sample autocovariance and periodogram.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodogram on the grid `omega_j = pi j / n`, `j = -n+1, ..., n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Periodogram {
    /// Number of observations the periodogram was computed from.
    pub fn n(&self) -> usize {
        self.freqs.len() / 2
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }
}

/// `(pi (-n+1)/n, ..., 0, ..., pi)`.
pub fn fourier_freqs(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (-(n as i64) + 1..=n as i64).map(|j| PI * j as f64 / nf).collect()
}

/// `(1/n) sum_{k} y_{k+|h|} y_k` without mean correction.
pub fn sample_acvf(y: &[f64], h: i64) -> Result<f64> {
    let n = y.len();
    let lag = h.unsigned_abs() as usize;
    if n == 0 {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    if lag >= n {
        return Err(Error::InvalidParameter(format!(
            "lag {h} out of range for n = {n}"
        )));
    }
    let s: f64 = y[lag..].iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(s / n as f64)
}

/// Sample autocovariances at lags `0..=max_lag`.
pub fn sample_acvf_all(y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    (0..=max_lag).map(|h| sample_acvf(y, h as i64)).collect()
}

/// `I_n(omega) = |sum_k y_k e^{i k omega}|^2 / (2 pi n)` at all Fourier
/// frequencies via a zero-padded transform of length `2n`.
pub fn periodogram(y: &[f64]) -> Periodogram {
    let n = y.len();
    if n == 0 {
        return Periodogram {
            freqs: Vec::new(),
            values: Vec::new(),
        };
    }
    let len = 2 * n;
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let scale = 1.0 / (2.0 * PI * n as f64);
    let values = (-(n as i64) + 1..=n as i64)
        .map(|j| buf[j.rem_euclid(len as i64) as usize].norm_sqr() * scale)
        .collect();
    Periodogram {
        freqs: fourier_freqs(n),
        values,
    }
}

/// Direct evaluation of `I_n(omega)` from the defining sum.
pub fn periodogram_direct(y: &[f64], omega: f64) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let s: Complex64 = y
        .iter()
        .enumerate()
        .map(|(k, &v)| Complex64::from_polar(v, (k + 1) as f64 * omega))
        .sum();
    s.norm_sqr() / (2.0 * PI * n as f64)
}

/// `(2 pi)^{-1} sum_{|h|<n} gamma_n(h) e^{-i h omega}`.
pub fn periodogram_acvf_form(y: &[f64], omega: f64) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let g = sample_acvf_all(y, n - 1).expect("lags in range");
    let tail: f64 = g[1..]
        .iter()
        .enumerate()
        .map(|(i, gh)| 2.0 * gh * ((i + 1) as f64 * omega).cos())
        .sum();
    (g[0] + tail) / (2.0 * PI)
}
