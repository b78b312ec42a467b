use std::f64::consts::TAU;

use rayon::prelude::*;

use super::readout::{shot_rng, ReadoutModel};
use super::record::MeasurementRecord;
use crate::dynamics::{
    apply_decay, closed_form, BlochVector, DecayParams, Dephasing, Propagator, RotatingFrameHamiltonian, SpinState,
};
use crate::error::{ensure_finite, Error, Result};
use crate::sequences::{PulseSequence, Segment, SenseSpec};
use crate::signals::{DriveComponent, PhaseClock, ReferenceSpec, ToneSpec};

/// Largest rotation of any drive axis per integration step, rad.
pub const DEFAULT_MAX_PHASE_STEP: f64 = 0.02;

/// Longitudinal term `(Ω_rf/2) cos(ω_rf t + φ) σz`; `t` on the same clock as
/// the drive components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Everything acting on the spin during sensing, in a frame where the spin
/// sits `spin_detuning` above the frame frequency.
#[derive(Clone, Copy, Debug)]
pub struct SenseDrive<'a> {
    pub components: &'a [DriveComponent],
    pub spin_detuning: f64,
    pub rf: Option<RfTerm>,
}

impl SenseDrive<'_> {
    /// Propagator from `a` to `b`.
    ///
    /// The frame first co-rotates with the mean tone offset, which makes a
    /// single tone exact in one step. Remaining relative rotation between
    /// tones, and any RF modulation (handled in its interaction picture), is
    /// integrated with midpoint steps so that no drive axis turns by more than
    /// `max_phase_step` per step.
    pub fn propagator(&self, a: f64, b: f64, max_phase_step: f64) -> Propagator {
        let span = b - a;
        if span <= 0.0 {
            return Propagator::identity();
        }
        let comps = self.components;
        let d0 = if comps.is_empty() {
            0.0
        } else {
            comps.iter().map(|c| c.offset).sum::<f64>() / comps.len() as f64
        };
        let beat = comps.iter().map(|c| (c.offset - d0).abs()).fold(0.0, f64::max);
        let residual = self.spin_detuning - d0;
        let axes = |t: f64, shift: f64| {
            let (mut x, mut y) = (0.0, 0.0);
            for c in comps {
                let (s, co) = (c.phase + (c.offset - d0) * t - shift).sin_cos();
                x += c.amplitude * co;
                y += c.amplitude * s;
            }
            (x, y)
        };
        let steps_for = |rate: f64| {
            if comps.is_empty() {
                1
            } else {
                ((rate * span / max_phase_step).ceil() as usize).max(1)
            }
        };

        let inner = match self.rf.filter(|rf| rf.amplitude != 0.0) {
            None => {
                let steps = steps_for(beat);
                let dt = span / steps as f64;
                let mut u = Propagator::identity();
                for k in 0..steps {
                    let (x, y) = axes(a + (k as f64 + 0.5) * dt, 0.0);
                    u = closed_form(&RotatingFrameHamiltonian::new(residual, x, y), dt) * u;
                }
                u
            }
            Some(rf) => {
                let x_rf = rf.amplitude / rf.omega;
                let s0 = (rf.omega * a + rf.phase).sin();
                let phi = |t: f64| residual * (t - a) + x_rf * ((rf.omega * t + rf.phase).sin() - s0);
                let steps = steps_for(beat + residual.abs() + rf.amplitude.abs());
                let dt = span / steps as f64;
                let mut u = Propagator::identity();
                if !comps.is_empty() {
                    for k in 0..steps {
                        let t = a + (k as f64 + 0.5) * dt;
                        let (x, y) = axes(t, phi(t));
                        u = closed_form(&RotatingFrameHamiltonian::new(0.0, x, y), dt) * u;
                    }
                }
                Propagator::z_rotation(phi(b)) * u
            }
        };
        Propagator::z_rotation(d0 * b) * inner * Propagator::z_rotation(d0 * a).dagger()
    }
}

/// Pure state without decay, Bloch vector with it.
#[derive(Clone, Copy, Debug)]
enum Carrier {
    Pure(SpinState),
    Mixed(BlochVector),
}

impl Carrier {
    fn ground(mixed: bool) -> Self {
        if mixed {
            Carrier::Mixed(BlochVector::GROUND)
        } else {
            Carrier::Pure(SpinState::ground())
        }
    }

    fn apply(&mut self, u: &Propagator) {
        match self {
            Carrier::Pure(s) => *s = s.evolve(u),
            Carrier::Mixed(b) => *b = b.rotate(u),
        }
    }

    fn decay(&mut self, decay: &DecayParams, t: f64, dephasing: Dephasing) {
        if let Carrier::Mixed(b) = self {
            *b = apply_decay(*b, decay, t, dephasing);
        }
    }

    fn sz(&self) -> f64 {
        match self {
            Carrier::Pure(s) => s.expect_sz(),
            Carrier::Mixed(b) => b.expect_sz(),
        }
    }
}

/// A shot series: spin, reference frame, signal tones, pulse program,
/// decay and readout.
///
/// Dynamics run in the frame rotating at the reference frequency, where the
/// reference pulses have constant phase and each tone's axis turns at its
/// offset from the reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub spin_frequency_hz: f64,
    pub reference: ReferenceSpec,
    pub tones: Vec<ToneSpec>,
    pub sequence: PulseSequence,
    pub decay: DecayParams,
    pub readout: ReadoutModel,
    pub max_phase_step: f64,
}

/// Per-series constants shared by all shots.
struct Prepared<'a> {
    exp: &'a Experiment,
    sampling_interval: f64,
    spin_detuning: f64,
    clocks: Vec<(f64, f64, PhaseClock)>,
}

impl Experiment {
    pub fn new(
        spin_frequency_hz: f64,
        reference: ReferenceSpec,
        tones: Vec<ToneSpec>,
        sequence: PulseSequence,
        decay: DecayParams,
        readout: ReadoutModel,
    ) -> Result<Self> {
        let e = Self {
            spin_frequency_hz,
            reference,
            tones,
            sequence,
            decay,
            readout,
            max_phase_step: DEFAULT_MAX_PHASE_STEP,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("spin frequency", self.spin_frequency_hz)?;
        if !(self.max_phase_step > 0.0) || !self.max_phase_step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "max phase step must be positive, got {}",
                self.max_phase_step
            )));
        }
        self.sequence.validate()?;
        if !(self.sequence.sampling_interval() > 0.0) {
            return Err(Error::InvalidArgument("sampling interval must be positive".into()));
        }
        self.decay.validate()?;
        self.readout.validate()
    }

    /// T
    pub fn sampling_interval(&self) -> f64 {
        self.sequence.sampling_interval()
    }

    fn prepare(&self) -> Result<Prepared<'_>> {
        self.validate()?;
        let t = self.sampling_interval();
        let clocks = self
            .tones
            .iter()
            .map(|tone| {
                let diff = tone.frequency_hz - self.reference.frequency_hz;
                Ok((tone.rabi_amplitude, TAU * diff, PhaseClock::new(diff, tone.initial_phase, t)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            exp: self,
            sampling_interval: t,
            spin_detuning: TAU * (self.spin_frequency_hz - self.reference.frequency_hz),
            clocks,
        })
    }

    /// Noise-free `⟨S_z⟩` of shot `n` at the first readout.
    pub fn shot_sz(&self, n: u64) -> Result<f64> {
        Ok(self.prepare()?.shot_sz(n))
    }

    /// `(count, true ⟨S_z⟩)` of shot `n`.
    pub fn run_shot(&self, n: u64) -> Result<(u32, f64)> {
        let p = self.prepare()?;
        Ok(p.sampled_shot(n))
    }

    /// Shots `0 … m−1`. Shots are independent given their index, so they run
    /// in parallel on the current rayon pool and the result does not depend
    /// on the number of threads.
    pub fn run_series(&self, m: u64) -> Result<MeasurementRecord> {
        if m == 0 {
            return Err(Error::InvalidArgument("shot count must be at least 1".into()));
        }
        let p = self.prepare()?;
        let shots: Vec<(u32, f64)> = (0..m as usize).into_par_iter().with_min_len(256).map(|n| p.sampled_shot(n as u64)).collect();
        let (counts, true_sz) = shots.into_iter().unzip();
        MeasurementRecord::new(counts, true_sz, p.sampling_interval, self.readout.rng_seed)
    }

    /// Noise-free `⟨S_z⟩` for shots `0 … m−1`.
    pub fn true_sz_series(&self, m: u64) -> Result<Vec<f64>> {
        let p = self.prepare()?;
        Ok((0..m as usize).into_par_iter().with_min_len(256).map(|n| p.shot_sz(n as u64)).collect())
    }
}

impl Prepared<'_> {
    fn sampled_shot(&self, n: u64) -> (u32, f64) {
        let sz = self.shot_sz(n);
        let mut rng = shot_rng(self.exp.readout.rng_seed, n);
        (self.exp.readout.sample(sz, &mut rng), sz)
    }

    fn components(&self, n: u64) -> Vec<DriveComponent> {
        self.clocks
            .iter()
            .map(|&(amplitude, offset, clock)| DriveComponent { amplitude, offset, phase: clock.at(n) })
            .collect()
    }

    fn shot_sz(&self, n: u64) -> f64 {
        let exp = self.exp;
        let mixed = exp.decay.enabled;
        let mut state = Carrier::ground(mixed);
        let mut t = 0.0;
        let mut readout = None;
        for seg in exp.sequence.segments() {
            match *seg {
                Segment::LaserInit { .. } => state = Carrier::ground(mixed),
                Segment::ReferencePulse { angle, phase, duration } => {
                    let u = if duration == 0.0 {
                        Propagator::rotation(angle, phase)
                    } else {
                        let h = RotatingFrameHamiltonian::from_polar(self.spin_detuning, angle / duration, phase);
                        closed_form(&h, duration)
                    };
                    state.apply(&u);
                }
                Segment::Sense(ref sense) => self.sense(&mut state, sense, t, n),
                Segment::Readout { .. } => {
                    readout.get_or_insert(state.sz());
                }
            }
            t += seg.duration();
        }
        readout.unwrap_or_else(|| state.sz())
    }

    fn sense(&self, state: &mut Carrier, sense: &SenseSpec, start: f64, n: u64) {
        let exp = self.exp;
        let components = if sense.signals_active { self.components(n) } else { Vec::new() };
        let rf = sense.rf.map(|rf| RfTerm {
            amplitude: rf.amplitude_rf,
            omega: rf.omega_rf,
            phase: rf.phase_at_shot(n, self.sampling_interval).expect("validated RF spec"),
        });
        let drive = SenseDrive { components: &components, spin_detuning: self.spin_detuning, rf };
        let end = start + sense.duration;
        match sense.cpmg {
            None => {
                state.apply(&drive.propagator(start, end, exp.max_phase_step));
                state.decay(&exp.decay, sense.duration, Dephasing::FreeInduction);
            }
            Some(cpmg) => {
                let prep = exp.sequence.preparation_phase().unwrap_or(exp.reference.phase);
                let pi = Propagator::rotation(std::f64::consts::PI, cpmg.pulse_phase(prep));
                let mut from = start;
                for pulse in cpmg.pulse_times() {
                    let at = start + pulse;
                    state.apply(&drive.propagator(from, at, exp.max_phase_step));
                    state.decay(&exp.decay, at - from, Dephasing::Decoupled);
                    state.apply(&pi);
                    from = at;
                }
                state.apply(&drive.propagator(from, end, exp.max_phase_step));
                state.decay(&exp.decay, end - from, Dephasing::Decoupled);
            }
        }
    }
}
