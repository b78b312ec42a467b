use num_complex::Complex64;
use std::f64::consts::SQRT_2;
use std::ops::Mul;

use crate::error::{ensure_finite, Error, Result};

/// Below this rotation angle `sin(Ω′t/2)/Ω′` is evaluated from its series.
const SMALL_ANGLE: f64 = 1e-6;

/// Rotating-frame Hamiltonian `H = Δ/2 σz + Ωx/2 σx + Ωy/2 σy` (units rad/s).
///
/// `drive_x`/`drive_y` are Rabi frequencies: a resonant drive of strength Ω
/// completes a π rotation after `t = π/Ω`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotatingFrameHamiltonian {
    pub detuning: f64,
    pub drive_x: f64,
    pub drive_y: f64,
}

impl RotatingFrameHamiltonian {
    pub fn new(detuning: f64, drive_x: f64, drive_y: f64) -> Self {
        Self { detuning, drive_x, drive_y }
    }

    /// Drive of Rabi frequency `omega` along the in-plane axis at angle `phase`.
    pub fn from_polar(detuning: f64, omega: f64, phase: f64) -> Self {
        Self { detuning, drive_x: omega * phase.cos(), drive_y: omega * phase.sin() }
    }

    /// Build from the `Ω/(2√2)` prefactor form, where the drive couples through
    /// `Ŝx = σx/√2`. The internal Rabi frequency is `Ω/√2`.
    pub fn from_spin1_amplitude(detuning: f64, omega: f64, phase: f64) -> Self {
        Self::from_polar(detuning, omega / SQRT_2, phase)
    }

    pub fn generalized_rabi(&self) -> f64 {
        (self.detuning * self.detuning + self.drive_x * self.drive_x + self.drive_y * self.drive_y)
            .sqrt()
    }

    pub fn drive_amplitude(&self) -> f64 {
        self.drive_x.hypot(self.drive_y)
    }

    pub fn drive_phase(&self) -> f64 {
        self.drive_y.atan2(self.drive_x)
    }

    fn validate(&self) -> Result<()> {
        ensure_finite("detuning", self.detuning)?;
        ensure_finite("drive_x", self.drive_x)?;
        ensure_finite("drive_y", self.drive_y)
    }
}

/// 2×2 unitary, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator {
    u: [[Complex64; 2]; 2],
}

impl Propagator {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { u: [[one, zero], [zero, one]] }
    }

    pub fn from_matrix(u: [[Complex64; 2]; 2]) -> Self {
        Self { u }
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.u
    }

    /// Ideal rotation by `angle` about the in-plane axis at `phase`.
    pub fn rotation(angle: f64, phase: f64) -> Self {
        let h = RotatingFrameHamiltonian::from_polar(0.0, 1.0, phase);
        closed_form(&h, angle)
    }

    /// Rotation by `angle` about z, `exp(−i angle σz/2)`.
    pub fn z_rotation(angle: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            u: [
                [Complex64::from_polar(1.0, -0.5 * angle), zero],
                [zero, Complex64::from_polar(1.0, 0.5 * angle)],
            ],
        }
    }

    /// Rotation by `angle` about x, `exp(−i angle σx/2)`.
    pub fn x_rotation(angle: f64) -> Self {
        Self::rotation(angle, 0.0)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Propagator) -> Propagator {
        *next * *self
    }

    pub fn dagger(&self) -> Self {
        let u = &self.u;
        Self { u: [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]] }
    }

    pub fn det(&self) -> Complex64 {
        self.u[0][0] * self.u[1][1] - self.u[0][1] * self.u[1][0]
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger() * *self;
        let id = Self::identity();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.u[i][j] - id.u[i][j]).norm());
            }
        }
        worst
    }

    pub fn frobenius_distance(&self, other: &Propagator) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += (self.u[i][j] - other.u[i][j]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// SO(3) rotation acting on Bloch vectors: `R_ij = ½ tr(σi U σj U†)`.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        let paulis = [
            [[zero, one], [one, zero]],
            [[zero, -i], [i, zero]],
            [[one, zero], [zero, -one]],
        ];
        let ud = self.dagger().u;
        let mut r = [[0.0; 3]; 3];
        for (j, sigma) in paulis.iter().enumerate() {
            let m = mat_mul(&mat_mul(&self.u, sigma), &ud);
            // m = x σx + y σy + z σz
            r[0][j] = 0.5 * (m[0][1] + m[1][0]).re;
            r[1][j] = 0.5 * (m[1][0] - m[0][1]).im;
            r[2][j] = 0.5 * (m[0][0] - m[1][1]).re;
        }
        r
    }
}

impl Mul for Propagator {
    type Output = Propagator;

    fn mul(self, rhs: Propagator) -> Propagator {
        Propagator { u: mat_mul(&self.u, &rhs.u) }
    }
}

fn mat_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// `exp(−iHt)` for a static rotating-frame Hamiltonian:
/// `cos(Ω′t/2)·1 − i sin(Ω′t/2)/Ω′ · (Ωx σx + Ωy σy + Δ σz)`.
pub fn closed_form_propagator(h: &RotatingFrameHamiltonian, t: f64) -> Result<Propagator> {
    h.validate()?;
    ensure_finite("t", t)?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("evolution time must be ≥ 0, got {t}")));
    }
    Ok(closed_form(h, t))
}

/// Unchecked closed form; callers guarantee finite inputs.
pub(crate) fn closed_form(h: &RotatingFrameHamiltonian, t: f64) -> Propagator {
    let rabi = h.generalized_rabi();
    let half = 0.5 * rabi * t;
    let (c, s) = if half.abs() < SMALL_ANGLE {
        // sin(Ω′t/2)/Ω′ → t/2 (1 − (Ω′t/2)²/6)
        (1.0 - 0.5 * half * half, 0.5 * t * (1.0 - half * half / 6.0))
    } else {
        (half.cos(), half.sin() / rabi)
    };
    let (dx, dy, dz) = (h.drive_x * s, h.drive_y * s, h.detuning * s);
    Propagator {
        u: [
            [Complex64::new(c, -dz), Complex64::new(-dy, -dx)],
            [Complex64::new(dy, -dx), Complex64::new(c, dz)],
        ],
    }
}

/// Integrate `H(t)` over `[t0, t1]` with midpoint-sampled piecewise-constant
/// steps, each no longer than `max_step`.
pub fn integrate_midpoint<F>(hamiltonian: F, t0: f64, t1: f64, max_step: f64) -> Propagator
where
    F: Fn(f64) -> RotatingFrameHamiltonian,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Propagator::identity();
    }
    let steps = (span / max_step).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let mut u = Propagator::identity();
    for k in 0..steps {
        let mid = t0 + (k as f64 + 0.5) * dt;
        u = closed_form(&hamiltonian(mid), dt) * u;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_hamiltonian_is_identity() {
        let u = closed_form_propagator(&RotatingFrameHamiltonian::default(), 3.7).unwrap();
        assert!(u.frobenius_distance(&Propagator::identity()) < 1e-15);
    }

    #[test]
    fn pi_pulse_flips() {
        let omega = 2.0 * PI * 1e6;
        let h = RotatingFrameHamiltonian::new(0.0, omega, 0.0);
        let u = closed_form_propagator(&h, PI / omega).unwrap();
        let out = crate::dynamics::SpinState::ground().evolve(&u);
        assert!((out.lower_population() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let h = RotatingFrameHamiltonian::new(f64::NAN, 0.0, 0.0);
        assert!(closed_form_propagator(&h, 1.0).is_err());
        assert!(closed_form_propagator(&RotatingFrameHamiltonian::default(), -1.0).is_err());
    }

    #[test]
    fn rotation_matrix_of_z_rotation() {
        let r = Propagator::z_rotation(PI / 2.0).rotation_matrix();
        // x → y under a positive z rotation
        assert!((r[1][0] - 1.0).abs() < 1e-14);
        assert!((r[0][1] + 1.0).abs() < 1e-14);
        assert!((r[2][2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn series_branch_is_continuous() {
        let h = RotatingFrameHamiltonian::new(1.0, 2.0, -0.5);
        let t = 0.999e-6 * 2.0 / h.generalized_rabi();
        let a = closed_form(&h, t);
        let half = 0.5 * h.generalized_rabi() * t;
        let s = half.sin() / h.generalized_rabi();
        let direct = Propagator::from_matrix([
            [Complex64::new(half.cos(), -h.detuning * s), Complex64::new(-h.drive_y * s, -h.drive_x * s)],
            [Complex64::new(h.drive_y * s, -h.drive_x * s), Complex64::new(half.cos(), h.detuning * s)],
        ]);
        assert!(a.frobenius_distance(&direct) < 1e-15);
    }

    #[test]
    fn eq3_mapping_divides_by_sqrt2() {
        let h = RotatingFrameHamiltonian::from_spin1_amplitude(0.0, 2.0, 0.0);
        assert!((h.drive_x - SQRT_2).abs() < 1e-15);
    }
}
