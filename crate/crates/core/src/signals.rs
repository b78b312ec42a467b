//! Signal tones, the coherent reference and shot-to-shot phase bookkeeping.
//!
//! Frequencies are kept in Hz. Phases after many shots are computed in
//! cycles with double-double arithmetic so that `n·f·T` never loses the
//! fractional part, even at GHz carriers and `n ~ 10⁷`.

use std::f64::consts::TAU;

use crate::dynamics::RotatingFrameHamiltonian;
use crate::error::{ensure_finite, Error, Result};

/// Electron gyromagnetic ratio, rad/(s·T).
pub const ELECTRON_GYROMAGNETIC_RATIO: f64 = 1.760_859_63e11;

/// Wrap an angle into `[0, 2π)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// One coherent microwave tone `Ω0 cos(ωt + φ0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneSpec {
    /// Rabi frequency Ω0, rad/s.
    pub rabi_amplitude: f64,
    /// Carrier frequency, Hz.
    pub frequency_hz: f64,
    /// φ0 in `[0, 2π)`.
    pub initial_phase: f64,
}

impl ToneSpec {
    pub fn new(rabi_amplitude: f64, frequency_hz: f64, initial_phase: f64) -> Result<Self> {
        ensure_finite("tone amplitude", rabi_amplitude)?;
        ensure_finite("tone frequency", frequency_hz)?;
        ensure_finite("tone phase", initial_phase)?;
        if rabi_amplitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tone amplitude must be ≥ 0, got {rabi_amplitude}"
            )));
        }
        Ok(Self { rabi_amplitude, frequency_hz, initial_phase: normalize_phase(initial_phase) })
    }

    /// Angular frequency, rad/s.
    pub fn omega(&self) -> f64 {
        TAU * self.frequency_hz
    }
}

/// Converts between field amplitude and Rabi frequency, `Ω0 = γ·B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConversion {
    pub gyromagnetic_ratio: f64,
}

impl Default for FieldConversion {
    fn default() -> Self {
        Self { gyromagnetic_ratio: ELECTRON_GYROMAGNETIC_RATIO }
    }
}

impl FieldConversion {
    pub fn new(gyromagnetic_ratio: f64) -> Result<Self> {
        if !(gyromagnetic_ratio > 0.0) || !gyromagnetic_ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gyromagnetic ratio must be positive, got {gyromagnetic_ratio}"
            )));
        }
        Ok(Self { gyromagnetic_ratio })
    }

    /// Rabi frequency (rad/s) for a field amplitude in tesla.
    pub fn rabi_from_field(&self, tesla: f64) -> f64 {
        self.gyromagnetic_ratio * tesla
    }

    pub fn field_from_rabi(&self, rabi: f64) -> f64 {
        rabi / self.gyromagnetic_ratio
    }
}

/// Phase-coherent reference that prepares the superposition each shot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub frequency_hz: f64,
    pub phase: f64,
    /// Zero selects an ideal instantaneous π/2 pulse.
    pub pi_half_duration: f64,
}

impl ReferenceSpec {
    pub fn new(frequency_hz: f64, phase: f64, pi_half_duration: f64) -> Result<Self> {
        ensure_finite("reference frequency", frequency_hz)?;
        ensure_finite("reference phase", phase)?;
        ensure_finite("π/2 duration", pi_half_duration)?;
        if pi_half_duration < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "π/2 duration must be ≥ 0, got {pi_half_duration}"
            )));
        }
        Ok(Self { frequency_hz, phase: normalize_phase(phase), pi_half_duration })
    }

    pub fn ideal(frequency_hz: f64, phase: f64) -> Result<Self> {
        Self::new(frequency_hz, phase, 0.0)
    }

    pub fn omega(&self) -> f64 {
        TAU * self.frequency_hz
    }

    /// `δω = ω_ref − ω`, rad/s.
    pub fn delta_omega(&self, tone: &ToneSpec) -> f64 {
        TAU * (self.frequency_hz - tone.frequency_hz)
    }

    /// `δφ = φ_ref − φ0`.
    pub fn delta_phi(&self, tone: &ToneSpec) -> f64 {
        self.phase - tone.initial_phase
    }
}

// Error-free transformations.

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Fractional part of the double-double `hi + lo`, in `[0, 1)`.
fn dd_frac(hi: f64, lo: f64) -> (f64, f64) {
    let h = hi - hi.floor();
    let (mut s, mut e) = two_sum(h, lo);
    if s >= 1.0 {
        (s, e) = two_sum(s - 1.0, e);
    } else if s < 0.0 {
        (s, e) = two_sum(s + 1.0, e);
    }
    if s >= 1.0 {
        s = 0.0;
        e = 0.0;
    }
    (s, e)
}

/// Phase of an oscillator at the start of every shot, `φ0 + 2π·f·n·T mod 2π`.
///
/// The per-shot increment `frac(f·T)` is held as an exact double-double, so
/// the only rounding is a few ulps of a number in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseClock {
    start: (f64, f64),
    step: (f64, f64),
}

impl PhaseClock {
    /// Shot indices up to this are converted to f64 exactly.
    pub const MAX_SHOT: u64 = 1 << 53;

    pub fn new(frequency_hz: f64, initial_phase: f64, sampling_interval: f64) -> Result<Self> {
        ensure_finite("frequency", frequency_hz)?;
        ensure_finite("phase", initial_phase)?;
        ensure_finite("sampling interval", sampling_interval)?;
        if sampling_interval <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sampling interval must be positive, got {sampling_interval}"
            )));
        }
        let (p, e) = two_prod(frequency_hz, sampling_interval);
        Ok(Self {
            start: (normalize_phase(initial_phase) / TAU, 0.0),
            step: dd_frac(p, e),
        })
    }

    pub fn for_tone(tone: &ToneSpec, sampling_interval: f64) -> Result<Self> {
        Self::new(tone.frequency_hz, tone.initial_phase, sampling_interval)
    }

    /// Fractional cycles advanced per shot.
    pub fn step_cycles(&self) -> f64 {
        self.step.0 + self.step.1
    }

    /// Phase at shot `n`, in `[0, 2π)`.
    pub fn at(&self, n: u64) -> f64 {
        assert!(n <= Self::MAX_SHOT, "shot index {n} beyond exact range");
        let nf = n as f64;
        let (p, e) = two_prod(nf, self.step.0);
        let (p, e) = dd_frac(p, e + nf * self.step.1);
        let (s, t) = two_sum(p, self.start.0);
        let (s, t) = dd_frac(s, t + e + self.start.1);
        normalize_phase(TAU * (s + t))
    }

    /// Phases of shots `0, 1, 2, …`, accumulated modularly.
    pub fn iter(&self) -> PhaseIter {
        PhaseIter { acc: self.start, step: self.step }
    }
}

/// Iterator returned by [`PhaseClock::iter`].
#[derive(Clone, Debug)]
pub struct PhaseIter {
    acc: (f64, f64),
    step: (f64, f64),
}

impl Iterator for PhaseIter {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = normalize_phase(TAU * (self.acc.0 + self.acc.1));
        let (s, e) = two_sum(self.acc.0, self.step.0);
        self.acc = dd_frac(s, e + self.acc.1 + self.step.1);
        Some(out)
    }
}

/// `φ0 + n·ω·T mod 2π` for a tone.
pub fn phase_at_shot(tone: &ToneSpec, n: u64, sampling_interval: f64) -> Result<f64> {
    Ok(PhaseClock::for_tone(tone, sampling_interval)?.at(n))
}

/// Rotating-frame Hamiltonian of a single tone in its own frame:
/// `Δω = ω_s − ω`, drive `Ω0 (cos φ, sin φ)` with `φ = shot_phase`.
pub fn rotating_components(
    tone: &ToneSpec,
    spin_frequency_hz: f64,
    shot_phase: f64,
) -> RotatingFrameHamiltonian {
    RotatingFrameHamiltonian::from_polar(
        TAU * (spin_frequency_hz - tone.frequency_hz),
        tone.rabi_amplitude,
        shot_phase,
    )
}

/// One tone seen from a rotating frame: its drive axis turns at `offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveComponent {
    /// rad/s
    pub amplitude: f64,
    /// Tone minus frame frequency, rad/s.
    pub offset: f64,
    /// Axis angle at the start of the shot.
    pub phase: f64,
}

impl DriveComponent {
    pub fn axis_at(&self, t: f64) -> f64 {
        self.phase + self.offset * t
    }
}

/// Additive drive of several tones in a common frame, for one shot.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingDrive {
    pub frame_hz: f64,
    pub components: Vec<DriveComponent>,
}

impl SensingDrive {
    /// Hamiltonian at time `t` after the start of the shot, for a spin whose
    /// transition sits `spin_detuning` (rad/s) above the frame.
    pub fn hamiltonian(&self, spin_detuning: f64, t: f64) -> RotatingFrameHamiltonian {
        let (mut x, mut y) = (0.0, 0.0);
        for c in &self.components {
            let (s, co) = c.axis_at(t).sin_cos();
            x += c.amplitude * co;
            y += c.amplitude * s;
        }
        RotatingFrameHamiltonian::new(spin_detuning, x, y)
    }

    /// Largest rate at which any drive axis turns in this frame.
    pub fn max_offset(&self) -> f64 {
        self.components.iter().map(|c| c.offset.abs()).fold(0.0, f64::max)
    }

    /// Largest relative rotation between two tones, the beat within a shot.
    pub fn max_beat(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.components.iter().enumerate() {
            for b in &self.components[i + 1..] {
                worst = worst.max((a.offset - b.offset).abs());
            }
        }
        worst
    }
}

/// Express all tones at shot `n` in the frame rotating at `frame_hz`.
///
/// Each tone's axis phase is `φ0 + 2π(f − f_frame)·n·T`, tracked with
/// [`PhaseClock`]; the difference frequency is exact when the two carriers
/// are within a factor of two.
pub fn superpose(
    tones: &[ToneSpec],
    frame_hz: f64,
    n: u64,
    sampling_interval: f64,
) -> Result<SensingDrive> {
    if tones.is_empty() {
        return Err(Error::InvalidArgument("at least one tone is required".into()));
    }
    let components = tones
        .iter()
        .map(|tone| {
            let diff = tone.frequency_hz - frame_hz;
            let clock = PhaseClock::new(diff, tone.initial_phase, sampling_interval)?;
            Ok(DriveComponent { amplitude: tone.rabi_amplitude, offset: TAU * diff, phase: clock.at(n) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensingDrive { frame_hz, components })
}
