use super::BlochVector;
use crate::error::{Error, Result};

/// Phenomenological lifetimes (seconds). Off unless `enabled`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayParams {
    pub t1: f64,
    pub t2_star: f64,
    pub t2: f64,
    pub t1_rho: f64,
    pub enabled: bool,
}

impl Default for DecayParams {
    /// Single-NV values at 250 mT: `1/T1 = 500 Hz`, `T2* = 50 µs`, `T2 = 300 µs`.
    fn default() -> Self {
        Self { t1: 2e-3, t2_star: 50e-6, t2: 300e-6, t1_rho: 2e-3, enabled: false }
    }
}

/// Which transverse lifetime governs a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dephasing {
    /// Free evolution: `T2*`.
    FreeInduction,
    /// Single refocusing pulse: `T2`.
    Echo,
    /// Under continuous or pulsed decoupling: `T1ρ`.
    Decoupled,
}

impl DecayParams {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn enabled(t1: f64, t2_star: f64, t2: f64, t1_rho: f64) -> Result<Self> {
        let p = Self { t1, t2_star, t2, t1_rho, enabled: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        let ordered = self.t2_star > 0.0 && self.t2_star <= self.t2 && self.t2 <= 2.0 * self.t1;
        if !ordered || !(self.t1_rho > 0.0) || !self.t1.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "decay needs 0 < T2* ≤ T2 ≤ 2·T1 and T1ρ > 0 (T1={}, T2*={}, T2={}, T1ρ={})",
                self.t1, self.t2_star, self.t2, self.t1_rho
            )));
        }
        Ok(())
    }

    pub fn transverse_time(&self, dephasing: Dephasing) -> f64 {
        match dephasing {
            Dephasing::FreeInduction => self.t2_star,
            Dephasing::Echo => self.t2,
            Dephasing::Decoupled => self.t1_rho,
        }
    }
}

/// Damp transverse components with the selected lifetime and relax `z` to the
/// unpolarized thermal value with `T1`.
pub fn apply_decay(bloch: BlochVector, decay: &DecayParams, t: f64, dephasing: Dephasing) -> BlochVector {
    if !decay.enabled || t == 0.0 {
        return bloch;
    }
    let transverse = (-t / decay.transverse_time(dephasing)).exp();
    let longitudinal = (-t / decay.t1).exp();
    BlochVector::new(bloch.x * transverse, bloch.y * transverse, bloch.z * longitudinal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DecayParams {
        DecayParams::enabled(2e-3, 50e-6, 300e-6, 1e-3).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let b = BlochVector::new(0.3, -0.4, 0.5);
        assert_eq!(apply_decay(b, &params(), 0.0, Dephasing::FreeInduction), b);
    }

    #[test]
    fn one_t2_star_is_one_efold() {
        let p = params();
        let b = apply_decay(BlochVector::new(1.0, 0.0, 0.0), &p, p.t2_star, Dephasing::FreeInduction);
        assert!((b.transverse() - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn decoupled_uses_t1_rho() {
        let p = params();
        let b = apply_decay(BlochVector::new(0.0, 1.0, 0.0), &p, p.t1_rho, Dephasing::Decoupled);
        assert!((b.y - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn invalid_ordering_rejected() {
        assert!(DecayParams::enabled(1e-3, 400e-6, 300e-6, 1e-3).is_err());
        assert!(DecayParams::enabled(1e-4, 50e-6, 300e-6, 1e-3).is_err());
    }

    #[test]
    fn disabled_is_noop() {
        let b = BlochVector::new(1.0, 0.0, 0.0);
        assert_eq!(apply_decay(b, &DecayParams::disabled(), 1.0, Dephasing::FreeInduction), b);
    }
}
