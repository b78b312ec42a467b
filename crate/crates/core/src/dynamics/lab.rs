//! Direct integration of the lab-frame Hamiltonian, used as an oracle free of
//! the rotating-wave approximation.

use std::f64::consts::TAU;

use super::propagator::{closed_form, RotatingFrameHamiltonian};
use super::SpinState;
use crate::error::{ensure_finite, Error, Result};

/// Steps must resolve the fastest frequency with at least this many points per period.
pub const MIN_STEPS_PER_PERIOD: f64 = 20.0;

/// Points per period at which midpoint errors stay near 1e-3 in population
/// over thousands of periods.
pub const ACCURATE_STEPS_PER_PERIOD: f64 = 160.0;

/// One oscillating lab-frame term `amplitude · cos(frequency·t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabTone {
    /// rad/s
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub phase: f64,
}

impl LabTone {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self { amplitude, frequency, phase }
    }

    fn at(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).cos()
    }
}

/// Lab-frame Hamiltonian
///
/// ```text
/// H(t) = ω_s/2 σz + Σ_rf (A_rf/2) cos(ω_rf t + φ_rf) σz + Σ_mw A cos(ω t + φ) σx
/// ```
///
/// Transverse tones of amplitude `A` drive Rabi oscillations at `A` near
/// resonance; longitudinal tones modulate the splitting by `A_rf`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabDrive {
    pub spin_frequency: f64,
    pub transverse: Vec<LabTone>,
    pub longitudinal: Vec<LabTone>,
}

impl LabDrive {
    pub fn new(spin_frequency: f64) -> Self {
        Self { spin_frequency, ..Default::default() }
    }

    pub fn with_transverse(mut self, tone: LabTone) -> Self {
        self.transverse.push(tone);
        self
    }

    pub fn with_longitudinal(mut self, tone: LabTone) -> Self {
        self.longitudinal.push(tone);
        self
    }

    /// Fastest angular frequency present, including the peak instantaneous splitting.
    pub fn fastest_frequency(&self) -> f64 {
        let splitting = self.spin_frequency.abs()
            + self.longitudinal.iter().map(|t| t.amplitude.abs()).sum::<f64>();
        self.transverse
            .iter()
            .chain(&self.longitudinal)
            .map(|t| t.frequency.abs())
            .fold(splitting, f64::max)
    }

    /// Largest step the integrator accepts.
    pub fn max_step(&self) -> f64 {
        let fastest = self.fastest_frequency();
        if fastest == 0.0 {
            f64::INFINITY
        } else {
            TAU / fastest / MIN_STEPS_PER_PERIOD
        }
    }

    /// Step for results accurate over long integrations.
    pub fn accurate_step(&self) -> f64 {
        self.max_step() * MIN_STEPS_PER_PERIOD / ACCURATE_STEPS_PER_PERIOD
    }

    fn hamiltonian(&self, t: f64) -> RotatingFrameHamiltonian {
        let splitting =
            self.spin_frequency + self.longitudinal.iter().map(|tone| tone.at(t)).sum::<f64>();
        let transverse: f64 = self.transverse.iter().map(|tone| tone.at(t)).sum();
        // A cos(…) σx is Ωx/2 σx with Ωx = 2A
        RotatingFrameHamiltonian::new(splitting, 2.0 * transverse, 0.0)
    }

    fn validate(&self, dt: f64) -> Result<()> {
        ensure_finite("spin frequency", self.spin_frequency)?;
        for tone in self.transverse.iter().chain(&self.longitudinal) {
            ensure_finite("tone amplitude", tone.amplitude)?;
            ensure_finite("tone frequency", tone.frequency)?;
            ensure_finite("tone phase", tone.phase)?;
        }
        ensure_finite("dt", dt)?;
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let limit = self.max_step();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt, limit });
        }
        Ok(())
    }
}

/// Integrate from `t = 0` to `duration` with fixed midpoint steps of `dt`
/// (the last step is shortened to land on `duration`).
pub fn lab_frame_integrate(
    drive: &LabDrive,
    initial: SpinState,
    dt: f64,
    duration: f64,
) -> Result<SpinState> {
    let states = lab_frame_trajectory(drive, initial, dt, &[duration])?;
    Ok(states[0])
}

/// Integrate once and return the state at every time in `sample_times`
/// (ascending, ≥ 0).
pub fn lab_frame_trajectory(
    drive: &LabDrive,
    initial: SpinState,
    dt: f64,
    sample_times: &[f64],
) -> Result<Vec<SpinState>> {
    drive.validate(dt)?;
    if sample_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("sample times must be finite and ≥ 0".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be ascending".into()));
    }

    let mut state = initial;
    let mut now = 0.0;
    let mut grid_index: u64 = 0;
    let mut out = Vec::with_capacity(sample_times.len());
    let step = |state: &mut SpinState, from: f64, to: f64| {
        let span = to - from;
        let u = closed_form(&drive.hamiltonian(from + 0.5 * span), span);
        *state = state.evolve(&u);
    };
    for &target in sample_times {
        // Whole steps on the global dt grid, then a partial step up to the sample time.
        loop {
            let grid = (grid_index + 1) as f64 * dt;
            if grid <= target {
                step(&mut state, now, grid);
                now = grid;
                grid_index += 1;
            } else {
                if target > now {
                    step(&mut state, now, target);
                    now = target;
                }
                break;
            }
        }
        out.push(state);
    }
    Ok(out)
}
