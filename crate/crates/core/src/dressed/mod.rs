//! Dressed-state descriptions of a driven spin.
//!
//! A longitudinal RF field splits each transition into Floquet sidebands at
//! `ω_s + k·ω_rf` with Rabi rates `J_k(Ω_rf/ω_rf)·Ω1`. A strong resonant
//! drive plus a weak probe gives the Mollow picture, where the dressed
//! quantization axis is the drive axis `x`.

pub mod bessel;
mod floquet;
mod mollow;

pub use bessel::{bessel_j, bessel_j_derivative, BesselTable, MAX_ARGUMENT, MAX_ORDER, SIDEBAND_TRUNCATION};
pub use floquet::{
    floquet_effective_hamiltonian, floquet_levels, sideband_strength_sensitivity, sidebands,
    FloquetDressing, FloquetEffective, FloquetLevel, Sideband, RWA_WARNING_RATIO,
};
pub use mollow::{
    mollow_effective_hamiltonian, mollow_effective_hamiltonian_with, MollowDressing, MollowEffective,
    MollowFrames, DEFAULT_VALIDITY_RATIO,
};
