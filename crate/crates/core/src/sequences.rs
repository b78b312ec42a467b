//! Per-shot pulse programs.
//!
//! A shot is `LaserInit → ReferencePulse → Sense → Readout`, followed by dead
//! time. The sum of all of these is the sampling interval `T` that clocks the
//! signal phase from shot to shot.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::signals::{normalize_phase, PhaseClock, ReferenceSpec};

/// Phase of the CPMG π pulses relative to the preparation pulse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PulsePhaseConvention {
    /// Along the prepared superposition, 90° from the preparation axis.
    #[default]
    Cpmg,
    /// Along the preparation axis (Carr–Purcell).
    Cp,
}

/// π-pulse train: pulses at `(k + ½)·τ` for `k = 0 … n−1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpmgSpec {
    pub tau: f64,
    pub n_pulses: u32,
    pub convention: PulsePhaseConvention,
}

impl CpmgSpec {
    pub fn new(tau: f64, n_pulses: u32, convention: PulsePhaseConvention) -> Result<Self> {
        ensure_finite("τ", tau)?;
        if tau <= 0.0 {
            return Err(Error::InvalidArgument(format!("τ must be positive, got {tau}")));
        }
        if n_pulses == 0 {
            return Err(Error::InvalidArgument("CPMG needs at least one π pulse".into()));
        }
        Ok(Self { tau, n_pulses, convention })
    }

    /// Angular frequency of the pulsed-Mollow sideband, `π/τ`.
    pub fn sideband_omega(&self) -> f64 {
        PI / self.tau
    }

    pub fn sideband_hz(&self) -> f64 {
        0.5 / self.tau
    }

    pub fn total_time(&self) -> f64 {
        self.n_pulses as f64 * self.tau
    }

    /// Pulse centers relative to the start of sensing.
    pub fn pulse_times(&self) -> Vec<f64> {
        (0..self.n_pulses).map(|k| (k as f64 + 0.5) * self.tau).collect()
    }

    /// Axis of the π pulses given the preparation pulse phase.
    pub fn pulse_phase(&self, preparation_phase: f64) -> f64 {
        match self.convention {
            PulsePhaseConvention::Cpmg => preparation_phase + FRAC_PI_2,
            PulsePhaseConvention::Cp => preparation_phase,
        }
    }
}

/// Longitudinal RF drive `(Ω_rf/2) cos(ω_rf t + φ_n) σz` during sensing.
///
/// The RF is coherent in lab time; on top of that the programmed phase
/// advances by `per_shot_phase_step` every shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RfDriveSpec {
    /// rad/s
    pub omega_rf: f64,
    /// rad/s
    pub amplitude_rf: f64,
    pub phase: f64,
    pub per_shot_phase_step: f64,
}

impl RfDriveSpec {
    pub fn new(omega_rf: f64, amplitude_rf: f64, phase: f64, per_shot_phase_step: f64) -> Result<Self> {
        for (what, v) in [
            ("ω_rf", omega_rf),
            ("Ω_rf", amplitude_rf),
            ("RF phase", phase),
            ("RF phase step", per_shot_phase_step),
        ] {
            ensure_finite(what, v)?;
        }
        if omega_rf <= 0.0 || amplitude_rf < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need ω_rf > 0 and Ω_rf ≥ 0, got {omega_rf}, {amplitude_rf}"
            )));
        }
        Ok(Self { omega_rf, amplitude_rf, phase, per_shot_phase_step })
    }

    /// Bessel argument `x = Ω_rf/ω_rf`.
    pub fn modulation_index(&self) -> f64 {
        self.amplitude_rf / self.omega_rf
    }

    /// `Ω_rf ≥ ω_rf`.
    pub fn is_strong(&self) -> bool {
        self.amplitude_rf >= self.omega_rf
    }

    /// RF phase at the start of shot `n`: free-running carrier plus the
    /// programmed step.
    pub fn phase_at_shot(&self, n: u64, sampling_interval: f64) -> Result<f64> {
        let carrier = PhaseClock::new(self.omega_rf / TAU, self.phase, sampling_interval)?.at(n);
        let steps = self.per_shot_phase_step.rem_euclid(TAU) * (n % step_period(self.per_shot_phase_step)) as f64;
        Ok(normalize_phase(carrier + steps))
    }
}

/// Number of shots after which a step is known to wrap exactly, or a large
/// modulus when it does not divide `2π` evenly.
fn step_period(step: f64) -> u64 {
    let s = step.rem_euclid(TAU);
    if s == 0.0 {
        return 1;
    }
    for q in 1..=720u64 {
        let k = s * q as f64 / TAU;
        if (k - k.round()).abs() < 1e-12 {
            return q;
        }
    }
    u64::MAX
}

/// The sensing window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SenseSpec {
    pub duration: f64,
    /// Signal tones drive the spin only when set.
    pub signals_active: bool,
    pub cpmg: Option<CpmgSpec>,
    pub rf: Option<RfDriveSpec>,
}

/// One step of a shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// Optical pumping into `|0⟩`.
    LaserInit { duration: f64 },
    /// Rotation by `angle` about the in-plane axis at `phase` (reference
    /// frame). From `|0⟩` a π/2 pulse leaves the Bloch vector at azimuth
    /// `phase − π/2`. Zero duration is an ideal instantaneous pulse.
    ReferencePulse { angle: f64, phase: f64, duration: f64 },
    Sense(SenseSpec),
    Readout { duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::LaserInit { duration } | Segment::Readout { duration } => *duration,
            Segment::ReferencePulse { duration, .. } => *duration,
            Segment::Sense(s) => s.duration,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Segment::LaserInit { .. } => "laser_init",
            Segment::ReferencePulse { .. } => "reference_pulse",
            Segment::Sense(_) => "sense",
            Segment::Readout { .. } => "readout",
        }
    }
}

/// Fixed overhead of a shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotTiming {
    pub laser_init: f64,
    pub readout: f64,
    pub dead_time: f64,
}

impl Default for ShotTiming {
    fn default() -> Self {
        Self { laser_init: 1e-6, readout: 0.5e-6, dead_time: 0.0 }
    }
}

/// Validated segment list plus dead time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PulseSequence {
    segments: Vec<Segment>,
    dead_time: f64,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>, dead_time: f64) -> Result<Self> {
        let seq = Self { segments, dead_time };
        seq.validate()?;
        Ok(seq)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dead_time(&self) -> f64 {
        self.dead_time
    }

    /// Checks the shot structure: starts with `LaserInit`, ends with `Readout`,
    /// exactly one `Sense`, and all durations finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("invalid sequence: {msg}")));
        if !matches!(self.segments.first(), Some(Segment::LaserInit { .. })) {
            return bad("must start with laser_init");
        }
        if !matches!(self.segments.last(), Some(Segment::Readout { .. })) {
            return bad("must end with readout");
        }
        let senses = self.segments.iter().filter(|s| matches!(s, Segment::Sense(_))).count();
        if senses != 1 {
            return bad(&format!("needs exactly one sense segment, found {senses}"));
        }
        for seg in &self.segments {
            let d = seg.duration();
            if !d.is_finite() || d < 0.0 {
                return bad(&format!("{} duration {d} is not a finite non-negative time", seg.label()));
            }
            if let Segment::Sense(SenseSpec { duration, cpmg: Some(c), .. }) = seg {
                if (c.total_time() - duration).abs() > 1e-12 * duration.max(1e-9) {
                    return bad("CPMG sense duration must equal n_pulses·τ");
                }
            }
            if let Segment::ReferencePulse { angle, phase, .. } = seg {
                if !angle.is_finite() || !phase.is_finite() {
                    return bad("reference pulse angle and phase must be finite");
                }
            }
        }
        if !self.dead_time.is_finite() || self.dead_time < 0.0 {
            return bad("dead time must be a finite non-negative time");
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// `T`: segment durations plus dead time.
    pub fn sampling_interval(&self) -> f64 {
        self.total_duration() + self.dead_time
    }

    /// Set the dead time.
    pub fn with_dead_time(mut self, dead_time: f64) -> Result<Self> {
        self.dead_time = dead_time;
        self.validate()?;
        Ok(self)
    }

    /// Pad with dead time so that the shot period is exactly `t`.
    pub fn with_sampling_interval(self, t: f64) -> Result<Self> {
        let busy = self.total_duration();
        if !(t >= busy) {
            return Err(Error::InvalidArgument(format!(
                "sampling interval {t} s is shorter than the {busy} s of segments"
            )));
        }
        self.with_dead_time(t - busy)
    }

    /// The sense segment and its start time within the shot.
    pub fn sense(&self) -> (f64, &SenseSpec) {
        let mut t = 0.0;
        for seg in &self.segments {
            if let Segment::Sense(s) = seg {
                return (t, s);
            }
            t += seg.duration();
        }
        unreachable!("validated sequences contain a sense segment")
    }

    /// Phase of the first reference pulse, if any.
    pub fn preparation_phase(&self) -> Option<f64> {
        self.segments.iter().find_map(|s| match s {
            Segment::ReferencePulse { phase, .. } => Some(*phase),
            _ => None,
        })
    }

    /// Human-readable timeline.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let mut t = 0.0;
        let _ = writeln!(out, "{:>12}  {:>12}  segment", "start_us", "length_us");
        for seg in &self.segments {
            let d = seg.duration();
            let detail = match seg {
                Segment::ReferencePulse { angle, phase, .. } => format!(
                    "  angle {:.1}°, phase {:.1}°",
                    angle.to_degrees(),
                    phase.to_degrees()
                ),
                Segment::Sense(s) => {
                    let mut d = format!("  signals {}", if s.signals_active { "on" } else { "off" });
                    if let Some(c) = s.cpmg {
                        let _ = write!(
                            d,
                            ", {} π pulses every {:.4} us ({:?}), sideband {:.3} kHz",
                            c.n_pulses,
                            c.tau * 1e6,
                            c.convention,
                            c.sideband_hz() * 1e-3
                        );
                    }
                    if let Some(rf) = s.rf {
                        let _ = write!(
                            d,
                            ", rf {:.4} MHz, x = {:.4}, step {:.1}°",
                            rf.omega_rf / TAU * 1e-6,
                            rf.modulation_index(),
                            rf.per_shot_phase_step.to_degrees()
                        );
                    }
                    d
                }
                _ => String::new(),
            };
            let _ = writeln!(out, "{:>12.6}  {:>12.6}  {}{}", t * 1e6, d * 1e6, seg.label(), detail);
            t += d;
        }
        let _ = writeln!(out, "{:>12.6}  {:>12.6}  dead_time", t * 1e6, self.dead_time * 1e6);
        let _ = writeln!(out, "sampling interval T = {:.6} us", self.sampling_interval() * 1e6);
        out
    }
}

fn reference_pulse(reference: &ReferenceSpec) -> Segment {
    Segment::ReferencePulse {
        angle: FRAC_PI_2,
        phase: reference.phase,
        duration: reference.pi_half_duration,
    }
}

fn assemble(reference: &ReferenceSpec, sense: SenseSpec, timing: &ShotTiming) -> Result<PulseSequence> {
    PulseSequence::new(
        vec![
            Segment::LaserInit { duration: timing.laser_init },
            reference_pulse(reference),
            Segment::Sense(sense),
            Segment::Readout { duration: timing.readout },
        ],
        timing.dead_time,
    )
}

/// `[LaserInit, π/2 at φ_ref, Sense, Readout]`.
pub fn build_plain_heterodyne(
    sense_duration: f64,
    reference: &ReferenceSpec,
    timing: &ShotTiming,
) -> Result<PulseSequence> {
    ensure_finite("sense duration", sense_duration)?;
    if sense_duration < 0.0 {
        return Err(Error::InvalidArgument(format!("sense duration must be ≥ 0, got {sense_duration}")));
    }
    let sense = SenseSpec { duration: sense_duration, signals_active: true, cpmg: None, rf: None };
    assemble(reference, sense, timing)
}

/// Plain heterodyne with a CPMG train during sensing; sensing lasts `n·τ`.
pub fn build_cpmg_heterodyne(
    cpmg: &CpmgSpec,
    reference: &ReferenceSpec,
    timing: &ShotTiming,
) -> Result<PulseSequence> {
    let checked = CpmgSpec::new(cpmg.tau, cpmg.n_pulses, cpmg.convention)?;
    let sense = SenseSpec {
        duration: checked.total_time(),
        signals_active: true,
        cpmg: Some(checked),
        rf: None,
    };
    assemble(reference, sense, timing)
}

/// Plain heterodyne with a longitudinal RF drive during sensing.
pub fn build_floquet_heterodyne(
    rf: &RfDriveSpec,
    sense_duration: f64,
    reference: &ReferenceSpec,
    timing: &ShotTiming,
) -> Result<PulseSequence> {
    ensure_finite("sense duration", sense_duration)?;
    if sense_duration <= 0.0 {
        return Err(Error::InvalidArgument(format!("sense duration must be > 0, got {sense_duration}")));
    }
    let rf = RfDriveSpec::new(rf.omega_rf, rf.amplitude_rf, rf.phase, rf.per_shot_phase_step)?;
    let sense = SenseSpec { duration: sense_duration, signals_active: true, cpmg: None, rf: Some(rf) };
    assemble(reference, sense, timing)
}
