use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{BlochVector, Propagator, RotatingFrameHamiltonian, SpinState};
use crate::error::{ensure_finite, Result};

/// Default lower bound on `2Δω/Δ″` for the second rotating-wave step.
pub const DEFAULT_VALIDITY_RATIO: f64 = 10.0;

/// Resonant drive `G σx cos(ω0 t)` plus a probe `γ σx cos(ω1 t + φ)` with
/// `Δω = ω1 − ω0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollowDressing {
    /// G, rad/s
    pub drive_amplitude: f64,
    /// Δω, rad/s
    pub detuning: f64,
    /// γ, rad/s
    pub probe_amplitude: f64,
    pub probe_phase: f64,
}

impl MollowDressing {
    pub fn new(drive_amplitude: f64, detuning: f64, probe_amplitude: f64, probe_phase: f64) -> Result<Self> {
        ensure_finite("G", drive_amplitude)?;
        ensure_finite("Δω", detuning)?;
        ensure_finite("γ", probe_amplitude)?;
        ensure_finite("φ", probe_phase)?;
        Ok(Self { drive_amplitude, detuning, probe_amplitude, probe_phase })
    }

    /// `Δ″ = (G − Δω)/2`, the σx coefficient in the dressed frame.
    pub fn dressed_splitting(&self) -> f64 {
        0.5 * (self.drive_amplitude - self.detuning)
    }

    /// `2Δω/|Δ″|`; infinite on the dressed resonance.
    pub fn validity_ratio(&self) -> f64 {
        let dpp = self.dressed_splitting().abs();
        if dpp == 0.0 {
            f64::INFINITY
        } else {
            2.0 * self.detuning.abs() / dpp
        }
    }

    pub fn is_valid(&self, min_ratio: f64) -> bool {
        self.validity_ratio() > min_ratio
    }
}

/// Basis changes between the lab frame, the frame rotating at `ω0` about z,
/// and the dressed frame rotating at `Δω` about x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollowFrames {
    pub omega0: f64,
    pub detuning: f64,
}

impl MollowFrames {
    /// Lab state at time `t` → first rotating frame (rotate about z by −ω0·t).
    pub fn lab_to_first(&self, state: &SpinState, t: f64) -> SpinState {
        state.evolve(&Propagator::z_rotation(-self.omega0 * t))
    }

    /// First rotating frame → dressed frame (rotate about x by −Δω·t).
    pub fn first_to_second(&self, state: &SpinState, t: f64) -> SpinState {
        state.evolve(&Propagator::x_rotation(-self.detuning * t))
    }

    pub fn lab_to_second(&self, state: &SpinState, t: f64) -> SpinState {
        self.first_to_second(&self.lab_to_first(state, t), t)
    }

    /// Inverse of [`lab_to_second`](Self::lab_to_second).
    pub fn second_to_lab(&self, state: &SpinState, t: f64) -> SpinState {
        let first = state.evolve(&Propagator::x_rotation(self.detuning * t));
        first.evolve(&Propagator::z_rotation(self.omega0 * t))
    }

    /// Bloch vector in dressed axes `(x′, y′, z′) = (y, z, x)`, from a
    /// second-frame Bloch vector.
    pub fn dressed_axes(bloch: &BlochVector) -> BlochVector {
        BlochVector::new(bloch.y, bloch.z, bloch.x)
    }

    /// Inverse of [`dressed_axes`](Self::dressed_axes).
    pub fn from_dressed_axes(dressed: &BlochVector) -> BlochVector {
        BlochVector::new(dressed.z, dressed.x, dressed.y)
    }

    /// Spin state whose second-frame Bloch vector is `b` (unit length).
    pub fn state_from_bloch(b: &BlochVector) -> SpinState {
        let theta = b.z.clamp(-1.0, 1.0).acos();
        let phi = b.y.atan2(b.x);
        SpinState::new(
            Complex64::new((0.5 * theta).cos(), 0.0),
            Complex64::from_polar((0.5 * theta).sin(), phi),
        )
        .expect("unit Bloch vector gives a normalized state")
    }
}

/// Dressed-frame description of a Mollow-driven spin.
#[derive(Clone, Debug, PartialEq)]
pub struct MollowEffective {
    /// `H″ = c_x σx + c_y σy + c_z σz` in second-frame axes.
    pub coefficients: [f64; 3],
    /// The same Hamiltonian with `x` as quantization axis: detuning `2c_x`
    /// along z′, drive `(2c_y, 2c_z)` along `(x′, y′)`.
    pub hamiltonian: RotatingFrameHamiltonian,
    pub frames: MollowFrames,
    pub validity_ratio: f64,
    pub warning: Option<String>,
}

/// `H″ = Δ″ σx + (γ/4)(sin φ σy − cos φ σz)` with `Δ″ = (G − Δω)/2`.
///
/// `omega0` only enters the frame bookkeeping.
pub fn mollow_effective_hamiltonian(m: &MollowDressing, omega0: f64) -> MollowEffective {
    mollow_effective_hamiltonian_with(m, omega0, DEFAULT_VALIDITY_RATIO)
}

pub fn mollow_effective_hamiltonian_with(m: &MollowDressing, omega0: f64, min_ratio: f64) -> MollowEffective {
    let q = 0.25 * m.probe_amplitude;
    let (s, c) = m.probe_phase.sin_cos();
    let coefficients = [m.dressed_splitting(), q * s, -q * c];
    let ratio = m.validity_ratio();
    let warning = (!(ratio > min_ratio)).then(|| {
        format!("2Δω/Δ″ = {ratio:.3} is not above {min_ratio}; the dressed-frame approximation is poor")
    });
    MollowEffective {
        coefficients,
        hamiltonian: RotatingFrameHamiltonian::new(
            2.0 * coefficients[0],
            2.0 * coefficients[1],
            2.0 * coefficients[2],
        ),
        frames: MollowFrames { omega0, detuning: m.detuning },
        validity_ratio: ratio,
        warning,
    }
}

impl MollowEffective {
    /// Second-frame Bloch vector after evolving `b` for `t` under `H″`.
    pub fn evolve_bloch(&self, b: &BlochVector, t: f64) -> BlochVector {
        let dressed = MollowFrames::dressed_axes(b);
        let u = crate::dynamics::closed_form(&self.hamiltonian, t);
        MollowFrames::from_dressed_axes(&dressed.rotate(&u))
    }

    /// The same evolution in second-frame axes as a propagator.
    pub fn second_frame_propagator(&self, t: f64) -> Propagator {
        let [cx, cy, cz] = self.coefficients;
        crate::dynamics::closed_form(&RotatingFrameHamiltonian::new(2.0 * cz, 2.0 * cx, 2.0 * cy), t)
    }
}
