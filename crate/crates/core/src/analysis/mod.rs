//! Autocorrelation of a shot record, its power spectrum, and line fitting.

mod correlation;
mod fit;
mod peaks;
mod spectrum;

pub use correlation::{autocorrelate, autocorrelate_brute_force, autocorrelate_record, Channel, Correlation, Normalization};
pub use fit::{fit_exponential_decay, fit_sinusoid, fit_sinusoid_fixed, log_log_slope, ExponentialFit, SinusoidFit};
pub use peaks::{
    find_peaks, fit_peak, linewidth_scaling, LinewidthPoint, LinewidthScaling, PeakFit, SpectrumOptions,
    NOISE_FLOOR_FACTOR,
};
pub use spectrum::{power_spectrum, Spectrum, Window};
