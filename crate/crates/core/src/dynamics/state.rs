use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use super::Propagator;
use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

/// Pure state of the two-level sensor, amplitudes on `|0⟩` and `|−1⟩`.
///
/// `|0⟩` is the bright, upper level: `σz|0⟩ = +|0⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState {
    c0: Complex64,
    c1: Complex64,
}

impl SpinState {
    pub fn new(c0: Complex64, c1: Complex64) -> Result<Self> {
        let norm = c0.norm_sqr() + c1.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "state amplitudes must be normalized, |c0|²+|c1|² = {norm}"
            )));
        }
        Ok(Self { c0, c1 })
    }

    /// The optically pumped state `|0⟩`.
    pub fn ground() -> Self {
        Self { c0: Complex64::new(1.0, 0.0), c1: Complex64::new(0.0, 0.0) }
    }

    pub fn lower() -> Self {
        Self { c0: Complex64::new(0.0, 0.0), c1: Complex64::new(1.0, 0.0) }
    }

    /// `(|0⟩ + e^{iφ}|−1⟩)/√2`, the state a reference π/2 pulse prepares.
    pub fn superposition(phi_ref: f64) -> Self {
        Self {
            c0: Complex64::new(FRAC_1_SQRT_2, 0.0),
            c1: Complex64::from_polar(FRAC_1_SQRT_2, phi_ref),
        }
    }

    pub fn c0(&self) -> Complex64 {
        self.c0
    }

    pub fn c1(&self) -> Complex64 {
        self.c1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// Population of `|−1⟩`.
    pub fn lower_population(&self) -> f64 {
        self.c1.norm_sqr()
    }

    /// `⟨S_z⟩ = ⟨σz⟩/2`, so `|0⟩ → +1/2` and `|−1⟩ → −1/2`.
    ///
    /// This is `(σz − 1)/2` shifted up by 1/2, which centers the
    /// heterodyne response on zero.
    pub fn expect_sz(&self) -> f64 {
        0.5 * (self.c0.norm_sqr() - self.c1.norm_sqr())
    }

    pub fn bloch(&self) -> BlochVector {
        let coherence = self.c0.conj() * self.c1;
        BlochVector {
            x: 2.0 * coherence.re,
            y: 2.0 * coherence.im,
            z: self.c0.norm_sqr() - self.c1.norm_sqr(),
        }
    }

    pub fn evolve(&self, u: &Propagator) -> Self {
        let m = u.matrix();
        Self {
            c0: m[0][0] * self.c0 + m[0][1] * self.c1,
            c1: m[1][0] * self.c0 + m[1][1] * self.c1,
        }
    }

    /// Overlap `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        (self.c0.conj() * other.c0 + self.c1.conj() * other.c1).norm_sqr()
    }
}

/// Apply a propagator to a state.
pub fn evolve(state: &SpinState, u: &Propagator) -> SpinState {
    state.evolve(u)
}

/// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`; length ≤ 1, shorter once decay acts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const GROUND: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn transverse(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn expect_sz(&self) -> f64 {
        0.5 * self.z
    }

    /// Rotate by the SO(3) image of `u`.
    pub fn rotate(&self, u: &Propagator) -> Self {
        let r = u.rotation_matrix();
        Self {
            x: r[0][0] * self.x + r[0][1] * self.y + r[0][2] * self.z,
            y: r[1][0] * self.x + r[1][1] * self.y + r[1][2] * self.z,
            z: r[2][0] * self.x + r[2][1] * self.y + r[2][2] * self.z,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}
