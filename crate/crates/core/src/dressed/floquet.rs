use std::ops::RangeInclusive;

use serde::Serialize;

use super::bessel::{bessel_j, bessel_j_derivative, BesselTable, SIDEBAND_TRUNCATION};
use crate::dynamics::RotatingFrameHamiltonian;
use crate::error::{ensure_finite, Error, Result};

/// Probe-to-RF ratio above which the sideband picture is flagged.
pub const RWA_WARNING_RATIO: f64 = 0.1;

/// Spin dressed by a longitudinal RF field `(Ω_rf/2) cos(ω_rf t + φ_rf) σz`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FloquetDressing {
    /// rad/s
    pub omega_rf: f64,
    /// rad/s
    pub amplitude_rf: f64,
    /// RF phase at the start of the interaction.
    pub phase_rf: f64,
}

impl FloquetDressing {
    pub fn new(omega_rf: f64, amplitude_rf: f64) -> Result<Self> {
        Self::with_phase(omega_rf, amplitude_rf, 0.0)
    }

    pub fn with_phase(omega_rf: f64, amplitude_rf: f64, phase_rf: f64) -> Result<Self> {
        ensure_finite("ω_rf", omega_rf)?;
        ensure_finite("Ω_rf", amplitude_rf)?;
        ensure_finite("RF phase", phase_rf)?;
        if omega_rf <= 0.0 || amplitude_rf < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need ω_rf > 0 and Ω_rf ≥ 0, got {omega_rf}, {amplitude_rf}"
            )));
        }
        Ok(Self { omega_rf, amplitude_rf, phase_rf })
    }

    pub fn from_modulation_index(omega_rf: f64, x: f64) -> Result<Self> {
        Self::new(omega_rf, x * omega_rf)
    }

    /// `x = Ω_rf/ω_rf`.
    pub fn modulation_index(&self) -> f64 {
        self.amplitude_rf / self.omega_rf
    }

    /// Relative Rabi rate of sideband `k`, `J_k(x)`.
    pub fn sideband_strength(&self, k: i32) -> Result<f64> {
        if k.abs() > SIDEBAND_TRUNCATION {
            return Ok(0.0);
        }
        bessel_j(k, self.modulation_index())
    }

    /// `J_k(x)` for `|k| ≤ 40`.
    pub fn strengths(&self) -> Result<BesselTable> {
        BesselTable::new(self.modulation_index(), SIDEBAND_TRUNCATION)
    }
}

/// Quasi-energy level `E_{level,m}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FloquetLevel {
    /// 0 for the lower, 1 for the upper spin state.
    pub level: u8,
    pub m: i32,
    /// rad/s
    pub energy: f64,
}

/// `E_{0,m} = m·ω_rf` and `E_{1,m} = ω_s + m·ω_rf` for `m` in range.
pub fn floquet_levels(d: &FloquetDressing, omega_s: f64, m_range: RangeInclusive<i32>) -> Vec<FloquetLevel> {
    let mut out = Vec::new();
    for level in 0..=1u8 {
        for m in m_range.clone() {
            let base = if level == 1 { omega_s } else { 0.0 };
            out.push(FloquetLevel { level, m, energy: base + m as f64 * d.omega_rf });
        }
    }
    out
}

/// One allowed transition of the dressed spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sideband {
    pub k: i32,
    /// `ω_s + k·ω_rf`, rad/s
    pub frequency: f64,
    /// `J_k(x)`
    pub strength: f64,
}

/// Transitions `ω_s + k·ω_rf` with their Bessel weights.
pub fn sidebands(d: &FloquetDressing, omega_s: f64, k_range: RangeInclusive<i32>) -> Result<Vec<Sideband>> {
    let table = d.strengths()?;
    Ok(k_range
        .map(|k| Sideband { k, frequency: omega_s + k as f64 * d.omega_rf, strength: table.get(k) })
        .collect())
}

/// Two-level Hamiltonian of one sideband, in the frame of the probe.
#[derive(Clone, Debug, PartialEq)]
pub struct FloquetEffective {
    pub hamiltonian: RotatingFrameHamiltonian,
    /// `Ω1/ω_rf`.
    pub rwa_ratio: f64,
    pub warning: Option<String>,
}

/// Effective Hamiltonian for sideband `k` under a probe of Rabi frequency
/// `omega1` and phase `phi0`, with `Δ′ = ω_mw − (ω_s + k·ω_rf)`.
///
/// The drive is `J_k(x)·Ω1` along `φ0 − k·φ_rf + x·sin φ_rf`; the detuning
/// term is `(ω_s + k·ω_rf − ω_mw)/2 σz`, i.e. `−Δ′`.
pub fn floquet_effective_hamiltonian(
    d: &FloquetDressing,
    k: i32,
    omega1: f64,
    detuning: f64,
    phi0: f64,
) -> Result<FloquetEffective> {
    ensure_finite("Ω1", omega1)?;
    ensure_finite("Δ′", detuning)?;
    ensure_finite("φ0", phi0)?;
    let x = d.modulation_index();
    let strength = d.sideband_strength(k)?;
    let phase = phi0 - k as f64 * d.phase_rf + x * d.phase_rf.sin();
    let rwa_ratio = omega1.abs() / d.omega_rf;
    let warning = (rwa_ratio > RWA_WARNING_RATIO).then(|| {
        format!("Ω1/ω_rf = {rwa_ratio:.3} exceeds {RWA_WARNING_RATIO}; sidebands overlap")
    });
    Ok(FloquetEffective {
        hamiltonian: RotatingFrameHamiltonian::from_polar(-detuning, strength * omega1, phase),
        rwa_ratio,
        warning,
    })
}

/// `∂J_k(Ω_rf/ω_rf)/∂Ω_rf = J_k′(x)/ω_rf`, in 1/(rad/s).
pub fn sideband_strength_sensitivity(d: &FloquetDressing, k: i32) -> Result<f64> {
    Ok(bessel_j_derivative(k, d.modulation_index())? / d.omega_rf)
}
