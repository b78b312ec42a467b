//! Scan drivers: ODMR spectra, Rabi traces and signal-phase sweeps.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{Experiment, RfTerm, SenseDrive};
use super::readout::shot_rng;
use crate::analysis::{fit_sinusoid, fit_sinusoid_fixed, SinusoidFit};
use crate::dressed::{floquet_effective_hamiltonian, FloquetDressing};
use crate::dynamics::{closed_form_propagator, lab_frame_trajectory, LabDrive, LabTone, SpinState};
use crate::error::{ensure_finite, Error, Result};
use crate::sequences::RfDriveSpec;

/// Transferred population `P(|−1⟩)` after a probe pulse, per probe frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdmrSpectrum {
    /// Hz
    pub frequencies: Vec<f64>,
    pub transfer: Vec<f64>,
}

impl OdmrSpectrum {
    /// Indices of local maxima of the transfer above `threshold`.
    pub fn resonances(&self, threshold: f64) -> Vec<usize> {
        let p = &self.transfer;
        (0..p.len())
            .filter(|&i| {
                p[i] > threshold && (i == 0 || p[i] >= p[i - 1]) && (i + 1 == p.len() || p[i] >= p[i + 1])
            })
            .collect()
    }

    /// Transfer at the grid point nearest `f` Hz.
    pub fn transfer_near(&self, f: f64) -> f64 {
        let i = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map_or(0, |(i, _)| i);
        self.transfer[i]
    }
}

/// Pulsed ODMR under RF dressing.
///
/// Each point starts in `|0⟩` and applies a probe of Rabi frequency
/// `probe_rabi` (rad/s) for `probe_duration`, together with the RF drive,
/// which starts at phase `rf.phase`. The dynamics are integrated in the frame
/// of the probe.
pub fn odmr_scan(
    probe_hz: &[f64],
    rf: &RfDriveSpec,
    probe_duration: f64,
    probe_rabi: f64,
    spin_frequency_hz: f64,
    max_phase_step: f64,
) -> Result<OdmrSpectrum> {
    if probe_hz.is_empty() {
        return Err(Error::InvalidArgument("empty probe grid".into()));
    }
    if probe_hz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("probe grid must be strictly ascending".into()));
    }
    ensure_finite("probe duration", probe_duration)?;
    ensure_finite("probe Rabi frequency", probe_rabi)?;
    ensure_finite("spin frequency", spin_frequency_hz)?;
    if probe_duration < 0.0 {
        return Err(Error::InvalidArgument(format!("probe duration must be ≥ 0, got {probe_duration}")));
    }
    if !(max_phase_step > 0.0) {
        return Err(Error::InvalidArgument("max phase step must be positive".into()));
    }
    let rf_term = RfTerm { amplitude: rf.amplitude_rf, omega: rf.omega_rf, phase: rf.phase };
    let comps = [crate::signals::DriveComponent { amplitude: probe_rabi, offset: 0.0, phase: 0.0 }];
    let transfer = probe_hz
        .par_iter()
        .map(|&f| {
            let drive = SenseDrive {
                components: &comps,
                spin_detuning: TAU * (spin_frequency_hz - f),
                rf: Some(rf_term),
            };
            let u = drive.propagator(0.0, probe_duration, max_phase_step);
            SpinState::ground().evolve(&u).lower_population()
        })
        .collect();
    Ok(OdmrSpectrum { frequencies: probe_hz.to_vec(), transfer })
}

/// How a Rabi trace is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RabiMethod {
    /// Lab-frame integration with the spin at `spin_frequency_hz` and fixed
    /// step `dt` (s).
    LabFrame { spin_frequency_hz: f64, dt: f64 },
    /// Closed-form evolution under the effective sideband Hamiltonian.
    Effective,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RabiTrace {
    pub k: i32,
    /// s
    pub durations: Vec<f64>,
    /// `P(|−1⟩)`
    pub population: Vec<f64>,
    /// Absent when the trace is flat.
    pub fit: Option<SinusoidFit>,
}

impl RabiTrace {
    /// Fitted Rabi frequency in Hz, 0 for a flat trace.
    pub fn rabi_hz(&self) -> f64 {
        self.fit.map_or(0.0, |f| f.angular_frequency / TAU)
    }
}

/// Peak-to-peak below this counts as no oscillation.
const FLAT_TRACE: f64 = 1e-6;

/// Rabi oscillation on sideband `k`: the probe sits at `ω_s + k·ω_rf` with
/// Rabi frequency `omega1` (rad/s).
pub fn rabi_scan(
    durations: &[f64],
    k: i32,
    d: &FloquetDressing,
    omega1: f64,
    method: RabiMethod,
) -> Result<RabiTrace> {
    if durations.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("durations must be finite and ≥ 0".into()));
    }
    ensure_finite("Ω1", omega1)?;
    let population = match method {
        RabiMethod::Effective => {
            let h = floquet_effective_hamiltonian(d, k, omega1, 0.0, 0.0)?.hamiltonian;
            durations
                .iter()
                .map(|&t| Ok(SpinState::ground().evolve(&closed_form_propagator(&h, t)?).lower_population()))
                .collect::<Result<Vec<_>>>()?
        }
        RabiMethod::LabFrame { spin_frequency_hz, dt } => {
            let omega_s = TAU * spin_frequency_hz;
            let drive = LabDrive::new(omega_s)
                .with_longitudinal(LabTone::new(d.amplitude_rf, d.omega_rf, d.phase_rf))
                .with_transverse(LabTone::new(omega1, omega_s + k as f64 * d.omega_rf, 0.0));
            let mut order: Vec<usize> = (0..durations.len()).collect();
            order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
            let sorted: Vec<f64> = order.iter().map(|&i| durations[i]).collect();
            let states = lab_frame_trajectory(&drive, SpinState::ground(), dt, &sorted)?;
            let mut population = vec![0.0; durations.len()];
            for (&i, s) in order.iter().zip(&states) {
                population[i] = s.lower_population();
            }
            population
        }
    };
    let (lo, hi) = population.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    let fit = if durations.len() >= 4 && hi - lo > FLAT_TRACE {
        let w = omega1.abs();
        Some(fit_sinusoid(durations, &population, 0.02 * w, 1.5 * w)?)
    } else {
        None
    };
    Ok(RabiTrace { k, durations: durations.to_vec(), population, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSweep {
    /// rad
    pub phases: Vec<f64>,
    pub true_sz: Vec<f64>,
    /// Mean counts over the shots at each phase.
    pub mean_counts: Vec<f64>,
    pub shots_per_point: u64,
    /// 2π-periodic fit of `true_sz`.
    pub fit_true_sz: SinusoidFit,
    /// 2π-periodic fit of `mean_counts`; absent when no shots were taken.
    pub fit_counts: Option<SinusoidFit>,
}

/// Sensor response against the initial phase of tone `tone` of `template`.
///
/// Every point evaluates shot `shot_index`, so the RF and reference phases
/// are the same at each point and only the signal phase changes. The noise-free
/// `⟨S_z⟩` is computed once per point and `shots_per_point` readouts are
/// drawn from it.
pub fn phase_sweep(
    phases: &[f64],
    template: &Experiment,
    tone: usize,
    shot_index: u64,
    shots_per_point: u64,
) -> Result<PhaseSweep> {
    if tone >= template.tones.len() {
        return Err(Error::InvalidArgument(format!(
            "tone index {tone} out of range for {} tones",
            template.tones.len()
        )));
    }
    if phases.len() < 4 || phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("phase grid needs at least 4 finite points".into()));
    }
    let readout = template.readout;
    let rows = phases
        .par_iter()
        .enumerate()
        .map(|(i, &phase)| {
            let mut exp = template.clone();
            exp.tones[tone].initial_phase = phase;
            let sz = exp.shot_sz(shot_index)?;
            let base = i as u64 * shots_per_point;
            let total: u64 = (0..shots_per_point)
                .map(|j| readout.sample(sz, &mut shot_rng(readout.rng_seed, base + j)) as u64)
                .sum();
            let mean = if shots_per_point == 0 { f64::NAN } else { total as f64 / shots_per_point as f64 };
            Ok((sz, mean))
        })
        .collect::<Result<Vec<_>>>()?;
    let (true_sz, mean_counts): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let fit_true_sz = fit_sinusoid_fixed(phases, &true_sz, 1.0)?;
    let fit_counts = if shots_per_point > 0 { Some(fit_sinusoid_fixed(phases, &mean_counts, 1.0)?) } else { None };
    Ok(PhaseSweep { phases: phases.to_vec(), true_sz, mean_counts, shots_per_point, fit_true_sz, fit_counts })
}
