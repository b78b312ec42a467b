use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::correlation::Correlation;
use crate::error::{Error, Result};

/// Taper applied to the correlation before the transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            // half of a Hann window, peaked at lag 0, since the correlation is one-sided
            Window::Hann => (0..n).map(|k| 0.5 * (1.0 + (PI * k as f64 / n as f64).cos())).collect(),
        }
    }
}

/// One-sided power spectrum of a correlation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    /// Hz, `j/(L·T)` for `j = 0 … L/2`.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    /// Fourier resolution `1/(N·T)`, Hz.
    pub resolution: f64,
    /// Spacing of the frequency grid, `resolution/oversample` up to padding.
    pub bin_spacing: f64,
    pub sampling_interval: f64,
    /// N
    pub lags: usize,
    pub window: Window,
}

impl Spectrum {
    /// `1/(2T)`
    pub fn nyquist(&self) -> f64 {
        0.5 / self.sampling_interval
    }

    /// Index of the bin nearest `f`.
    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.bin_spacing).round().max(0.0) as usize).min(self.power.len() - 1)
    }
}

/// `|DFT|²` of the windowed correlation, zero-padded to the power of two at
/// or above `oversample·N`.
///
/// Scaling is such that `Σ power = Σ (w·C)²`.
pub fn power_spectrum(corr: &Correlation, window: Window, oversample: usize) -> Result<Spectrum> {
    let n = corr.values.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty correlation".into()));
    }
    if oversample == 0 {
        return Err(Error::InvalidArgument("oversample must be ≥ 1".into()));
    }
    let len = (n * oversample).next_power_of_two().max(2);
    let w = window.weights(n);
    let mut buf: Vec<Complex64> = corr.values.iter().zip(&w).map(|(c, w)| Complex64::new(c * w, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let scale = 1.0 / len as f64;
    let power = (0..=half)
        .map(|j| {
            let p = buf[j].norm_sqr() * scale;
            if j == 0 || j == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let t = corr.sampling_interval;
    Ok(Spectrum {
        frequencies: (0..=half).map(|j| j as f64 / (len as f64 * t)).collect(),
        power,
        resolution: 1.0 / (n as f64 * t),
        bin_spacing: 1.0 / (len as f64 * t),
        sampling_interval: t,
        lags: n,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Normalization;

    fn cosine(f: f64, t: f64, n: usize) -> Correlation {
        Correlation {
            values: (0..n).map(|k| (2.0 * PI * f * k as f64 * t).cos()).collect(),
            sampling_interval: t,
            normalization: Normalization::Unbiased,
        }
    }

    #[test]
    fn axis_spans_to_nyquist() {
        let s = power_spectrum(&cosine(10.0, 1e-3, 1000), Window::Rectangular, 4).unwrap();
        assert_eq!(s.frequencies[0], 0.0);
        assert!((s.frequencies.last().unwrap() - 500.0).abs() < 1e-9);
        assert!((s.resolution - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_peaks_at_its_frequency() {
        let s = power_spectrum(&cosine(123.0, 1e-3, 1000), Window::Hann, 8).unwrap();
        let imax = (0..s.power.len()).max_by(|&a, &b| s.power[a].total_cmp(&s.power[b])).unwrap();
        assert!((s.frequencies[imax] - 123.0).abs() <= s.resolution);
    }

    #[test]
    fn parseval() {
        let c = cosine(37.3, 1e-3, 777);
        for (w, os) in [(Window::Rectangular, 1), (Window::Hann, 8)] {
            let s = power_spectrum(&c, w, os).unwrap();
            let lhs: f64 = s.power.iter().sum();
            let rhs: f64 = c.values.iter().zip(w.weights(777)).map(|(v, w)| (v * w).powi(2)).sum();
            assert!((lhs / rhs - 1.0).abs() < 1e-6);
        }
    }
}
