use serde::Serialize;

use super::correlation::{autocorrelate, Normalization};
use super::spectrum::{power_spectrum, Spectrum, Window};
use crate::error::{Error, Result};

/// A peak is accepted only if it exceeds this multiple of the median power.
pub const NOISE_FLOOR_FACTOR: f64 = 20.0;

/// Fitted spectral line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakFit {
    /// Hz
    pub center: f64,
    /// Hz
    pub fwhm: f64,
    pub amplitude: f64,
    /// RMS deviation of a 5-point parabola around the maximum.
    pub fit_residual: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Bin range covering `[lo, hi]` Hz.
fn bins(spec: &Spectrum, lo: f64, hi: f64) -> Result<(usize, usize)> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty search range [{lo}, {hi}]")));
    }
    let a = (lo / spec.bin_spacing).ceil().max(0.0) as usize;
    let b = ((hi / spec.bin_spacing).floor() as usize).min(spec.power.len() - 1);
    if a > b {
        return Err(Error::InvalidArgument(format!("search range [{lo}, {hi}] holds no bins")));
    }
    Ok((a, b))
}

/// Fit the strongest line inside `[lo, hi]` Hz.
///
/// The center comes from a three-point parabola through the log-power of the
/// maximum and its neighbors; the width from the half-maximum crossings,
/// linearly interpolated between bins.
pub fn fit_peak(spec: &Spectrum, lo: f64, hi: f64) -> Result<PeakFit> {
    fit_peak_with_floor(spec, lo, hi, NOISE_FLOOR_FACTOR * median(&spec.power))
}

fn fit_peak_with_floor(spec: &Spectrum, lo: f64, hi: f64, floor: f64) -> Result<PeakFit> {
    let (a, b) = bins(spec, lo, hi)?;
    let p = &spec.power;
    let i = (a..=b).max_by(|&x, &y| p[x].total_cmp(&p[y])).expect("non-empty range");
    if !(p[i] > floor) {
        return Err(Error::PeakNotFound(format!(
            "maximum {:.3e} in [{lo}, {hi}] Hz does not clear the noise floor {floor:.3e}",
            p[i]
        )));
    }
    let local_max = (i == 0 || p[i - 1] <= p[i]) && (i + 1 == p.len() || p[i + 1] <= p[i]);
    if !local_max || i == 0 || i + 1 == p.len() {
        return Err(Error::PeakNotFound(format!("no interior maximum in [{lo}, {hi}] Hz")));
    }

    let (l, c, r) = (p[i - 1], p[i], p[i + 1]);
    let (offset, amplitude) = if l > 0.0 && r > 0.0 {
        let (ll, lc, lr) = (l.ln(), c.ln(), r.ln());
        let denom = ll - 2.0 * lc + lr;
        if denom < 0.0 {
            let d = 0.5 * (ll - lr) / denom;
            (d, (lc - 0.25 * (ll - lr) * d).exp())
        } else {
            (0.0, c)
        }
    } else {
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            let d = 0.5 * (l - r) / denom;
            (d, c - 0.25 * (l - r) * d)
        } else {
            (0.0, c)
        }
    };
    let center = (i as f64 + offset) * spec.bin_spacing;

    let half = 0.5 * amplitude;
    let mut left = None;
    for j in (0..i).rev() {
        if p[j] <= half {
            let frac = (half - p[j]) / (p[j + 1] - p[j]);
            left = Some(j as f64 + frac);
            break;
        }
    }
    let mut right = None;
    for j in i + 1..p.len() {
        if p[j] <= half {
            let frac = (p[j - 1] - half) / (p[j - 1] - p[j]);
            right = Some((j - 1) as f64 + frac);
            break;
        }
    }
    let (Some(left), Some(right)) = (left, right) else {
        return Err(Error::PeakNotFound("half-maximum crossing outside the spectrum".into()));
    };

    Ok(PeakFit {
        center,
        fwhm: (right - left) * spec.bin_spacing,
        amplitude,
        fit_residual: parabola_residual(p, i),
    })
}

/// RMS residual of a least-squares parabola through the five bins around `i`.
fn parabola_residual(p: &[f64], i: usize) -> f64 {
    let lo = i.saturating_sub(2);
    let hi = (i + 2).min(p.len() - 1);
    let pts: Vec<(f64, f64)> = (lo..=hi).map(|j| (j as f64 - i as f64, p[j])).collect();
    if pts.len() < 4 {
        return 0.0;
    }
    let Some(coef) = super::fit::polyfit2(&pts) else {
        return 0.0;
    };
    let ss: f64 = pts.iter().map(|&(x, y)| (y - (coef[0] + coef[1] * x + coef[2] * x * x)).powi(2)).sum();
    (ss / pts.len() as f64).sqrt()
}

/// Up to `max_peaks` lines in `[lo, hi]` Hz, strongest first, at least
/// `min_separation` Hz apart.
pub fn find_peaks(spec: &Spectrum, lo: f64, hi: f64, min_separation: f64, max_peaks: usize) -> Result<Vec<PeakFit>> {
    let (a, b) = bins(spec, lo, hi)?;
    let p = &spec.power;
    let floor = NOISE_FLOOR_FACTOR * median(p);
    let mut candidates: Vec<usize> = (a.max(1)..=b.min(p.len() - 2))
        .filter(|&j| p[j] > floor && p[j] >= p[j - 1] && p[j] >= p[j + 1])
        .collect();
    candidates.sort_by(|&x, &y| p[y].total_cmp(&p[x]));
    let mut out: Vec<PeakFit> = Vec::new();
    for j in candidates {
        if out.len() == max_peaks {
            break;
        }
        let f = spec.frequencies[j];
        if out.iter().any(|q| (q.center - f).abs() < min_separation) {
            continue;
        }
        let half = 0.5 * min_separation;
        if let Ok(fit) = fit_peak_with_floor(spec, (f - half).max(lo), (f + half).min(hi), floor) {
            out.push(fit);
        }
    }
    Ok(out)
}

/// One row of a linewidth study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinewidthPoint {
    pub lags: usize,
    /// N·T, s
    pub correlation_time: f64,
    pub fit: PeakFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinewidthScaling {
    pub points: Vec<LinewidthPoint>,
    /// d ln(FWHM) / d ln(N·T)
    pub slope: f64,
}

/// Options shared by spectrum-based studies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumOptions {
    pub window: Window,
    pub oversample: usize,
    pub normalization: Normalization,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { window: Window::Rectangular, oversample: 8, normalization: Normalization::Unbiased }
    }
}

/// Fit the line in `[lo, hi]` Hz for each correlation length and the
/// log–log slope of FWHM against `N·T`.
///
/// The correlation is computed once at the longest length; shorter lengths
/// use its prefix, which is identical to recomputing.
pub fn linewidth_scaling(
    series: &[f64],
    sampling_interval: f64,
    lengths: &[usize],
    lo: f64,
    hi: f64,
    options: &SpectrumOptions,
) -> Result<LinewidthScaling> {
    let longest = *lengths.iter().max().ok_or_else(|| Error::InvalidArgument("no lengths given".into()))?;
    let corr = autocorrelate(series, sampling_interval, longest, options.normalization)?;
    let points = lengths
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidArgument("correlation length must be ≥ 1".into()));
            }
            let spec = power_spectrum(&corr.truncated(n), options.window, options.oversample)?;
            let fit = fit_peak(&spec, lo, hi)?;
            Ok(LinewidthPoint { lags: n, correlation_time: n as f64 * sampling_interval, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.correlation_time).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.fit.fwhm).collect();
    let slope = if points.len() >= 2 { super::fit::log_log_slope(&xs, &ys)? } else { f64::NAN };
    Ok(LinewidthScaling { points, slope })
}
