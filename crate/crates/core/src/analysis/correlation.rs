use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::MeasurementRecord;

/// How lag sums are scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide lag `n` by its pair count `M − n`.
    #[default]
    Unbiased,
    /// Plain sum over pairs.
    RawSum,
}

/// Which per-shot series to analyze.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    #[default]
    Counts,
    TrueSz,
}

impl Channel {
    pub fn extract(&self, record: &MeasurementRecord) -> Vec<f64> {
        match self {
            Channel::Counts => record.counts_f64(),
            Channel::TrueSz => record.true_sz.clone(),
        }
    }
}

/// Autocorrelation `C(n)` of a mean-subtracted series for lags `0 … N−1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correlation {
    pub values: Vec<f64>,
    pub sampling_interval: f64,
    pub normalization: Normalization,
}

impl Correlation {
    /// N
    pub fn max_lag(&self) -> usize {
        self.values.len()
    }

    /// First `n` lags.
    pub fn truncated(&self, n: usize) -> Correlation {
        Correlation {
            values: self.values[..n.min(self.values.len())].to_vec(),
            sampling_interval: self.sampling_interval,
            normalization: self.normalization,
        }
    }
}

fn check(series: &[f64], sampling_interval: f64, max_lag: usize) -> Result<()> {
    if max_lag == 0 || max_lag >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "need 0 < N < M, got N = {max_lag}, M = {}",
            series.len()
        )));
    }
    if !(sampling_interval > 0.0) || !sampling_interval.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {sampling_interval}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    Ok(())
}

fn centered(series: &[f64]) -> Vec<f64> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|v| v - mean).collect()
}

fn normalize(mut sums: Vec<f64>, m: usize, normalization: Normalization) -> Vec<f64> {
    if normalization == Normalization::Unbiased {
        for (n, v) in sums.iter_mut().enumerate() {
            *v /= (m - n) as f64;
        }
    }
    sums
}

/// `C(n) = Σ_{n′} s_{n′} s_{n′+n}` over available pairs, via a zero-padded FFT.
pub fn autocorrelate(
    series: &[f64],
    sampling_interval: f64,
    max_lag: usize,
    normalization: Normalization,
) -> Result<Correlation> {
    check(series, sampling_interval, max_lag)?;
    let m = series.len();
    let len = (m + max_lag).next_power_of_two();
    let mut buf: Vec<Complex64> = centered(series).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    let sums = buf[..max_lag].iter().map(|z| z.re * scale).collect();
    Ok(Correlation { values: normalize(sums, m, normalization), sampling_interval, normalization })
}

/// Direct `O(M·N)` double loop; the reference for [`autocorrelate`].
pub fn autocorrelate_brute_force(
    series: &[f64],
    sampling_interval: f64,
    max_lag: usize,
    normalization: Normalization,
) -> Result<Correlation> {
    check(series, sampling_interval, max_lag)?;
    let s = centered(series);
    let m = s.len();
    let sums = (0..max_lag).map(|n| (0..m - n).map(|i| s[i] * s[i + n]).sum()).collect();
    Ok(Correlation { values: normalize(sums, m, normalization), sampling_interval, normalization })
}

pub fn autocorrelate_record(
    record: &MeasurementRecord,
    channel: Channel,
    max_lag: usize,
    normalization: Normalization,
) -> Result<Correlation> {
    autocorrelate(&channel.extract(record), record.sampling_interval, max_lag, normalization)
}
