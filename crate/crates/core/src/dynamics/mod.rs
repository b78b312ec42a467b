//! Time evolution of the two-level sensor.
//!
//! Internally everything uses the `σ/2` convention: a rotating-frame
//! Hamiltonian is `Δ/2 σz + Ωx/2 σx + Ωy/2 σy`, so Rabi frequencies are the
//! rotation rates of the Bloch vector. Amplitudes quoted through `Ŝx = σx/√2`
//! enter via [`RotatingFrameHamiltonian::from_spin1_amplitude`].

mod decay;
mod lab;
mod propagator;
mod response;
mod state;

pub use decay::{apply_decay, DecayParams, Dephasing};
pub use lab::{lab_frame_integrate, lab_frame_trajectory, LabDrive, LabTone, ACCURATE_STEPS_PER_PERIOD, MIN_STEPS_PER_PERIOD};
pub use propagator::{closed_form_propagator, integrate_midpoint, Propagator, RotatingFrameHamiltonian};
pub use response::{phase_response, ResponseForm};
pub use state::{evolve, BlochVector, SpinState};

pub(crate) use propagator::closed_form;
