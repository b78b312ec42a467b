//! Implementations checked against independent reference computations.

use std::f64::consts::{PI, TAU};

use hetsense::analysis::{autocorrelate, autocorrelate_brute_force, Normalization};
use hetsense::dressed::bessel::{bessel_j, BesselTable, SIDEBAND_TRUNCATION};
use hetsense::dynamics::{
    closed_form_propagator, phase_response, Propagator, ResponseForm, RotatingFrameHamiltonian, SpinState,
};
use hetsense::signals::PhaseClock;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[Complex64::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `exp(A)` by scaling and squaring with a 30-term Taylor series.
fn expm(a: &M2) -> M2 {
    let norm: f64 = a.iter().flatten().map(|z| z.norm()).sum();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scale = 0.5f64.powi(squarings as i32);
    let a: M2 = a.map(|row| row.map(|z| z * scale));
    let mut result: M2 = [[Complex64::one(), Complex64::zero()], [Complex64::zero(), Complex64::one()]];
    let mut term = result;
    for k in 1..30 {
        term = mul(&term, &a).map(|row| row.map(|z| z / k as f64));
        for i in 0..2 {
            for j in 0..2 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

/// `exp(−i H t)` with `H = Δ/2 σz + Ωx/2 σx + Ωy/2 σy` written out as a matrix.
fn oracle_propagator(h: &RotatingFrameHamiltonian, t: f64) -> M2 {
    let i = Complex64::i();
    let hm: M2 = [
        [Complex64::new(0.5 * h.detuning, 0.0), Complex64::new(0.5 * h.drive_x, -0.5 * h.drive_y)],
        [Complex64::new(0.5 * h.drive_x, 0.5 * h.drive_y), Complex64::new(-0.5 * h.detuning, 0.0)],
    ];
    expm(&hm.map(|row| row.map(|z| -i * z * t)))
}

fn frobenius(a: &M2, b: &M2) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn closed_form_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let h = RotatingFrameHamiltonian::new(
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
        );
        let t = rng.random_range(0.0..3.0);
        let u = closed_form_propagator(&h, t).unwrap();
        worst = worst.max(frobenius(u.matrix(), &oracle_propagator(&h, t)));
    }
    assert!(worst < 1e-9, "worst Frobenius error {worst:e}");
}

#[test]
fn response_formula_matches_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let omega = rng.random_range(0.0..2.0);
        let detuning = rng.random_range(-2.0..2.0);
        let phi0 = rng.random_range(0.0..TAU);
        let phi_ref = rng.random_range(0.0..TAU);
        let t = rng.random_range(0.0..5.0);
        let h = RotatingFrameHamiltonian::from_polar(detuning, omega, phi0);
        let u = Propagator::from_matrix(oracle_propagator(&h, t));
        let simulated = SpinState::superposition(phi_ref).evolve(&u).expect_sz();
        let formula = phase_response(omega, detuning, phi0, phi_ref, t, ResponseForm::Exact);
        worst = worst.max((simulated - formula).abs());
    }
    assert!(worst < 1e-9, "worst deviation {worst:e}");
}

/// Power series `Σ (−1)^m (x/2)^{2m+k} / (m!(m+k)!)`, 60 terms.
fn bessel_series(k: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = (1..=k).fold(1.0, |acc, j| acc * half / j as f64);
    let mut sum = term;
    for m in 1..60u32 {
        term *= -half * half / (m as f64 * (m + k) as f64);
        sum += term;
    }
    sum
}

/// `(1/π)∫₀^π cos(kτ − x sin τ) dτ`, trapezoid on the periodic integrand.
fn bessel_integral(k: i32, x: f64) -> f64 {
    let n = 4096;
    let h = TAU / n as f64;
    (0..n).map(|j| (k as f64 * j as f64 * h - x * (j as f64 * h).sin()).cos()).sum::<f64>() * h / TAU
}

#[test]
fn bessel_matches_power_series() {
    for k in 0..=20u32 {
        for j in 0..=80 {
            let x = j as f64 * 0.1;
            let got = bessel_j(k as i32, x).unwrap();
            let want = bessel_series(k, x);
            assert!((got - want).abs() < 1e-10, "J_{k}({x}): {got} vs {want}");
        }
    }
}

#[test]
fn bessel_matches_integral_at_large_argument() {
    for k in [0, 1, 2, 7, 19, 33, 50] {
        for x in [9.5, 17.3, 25.0, 38.9, 50.0] {
            let got = bessel_j(k, x).unwrap();
            let want = bessel_integral(k, x);
            assert!((got - want).abs() < 1e-10, "J_{k}({x}): {got} vs {want}");
        }
    }
}

#[test]
fn bessel_completeness() {
    for j in 0..=100 {
        let x = j as f64 * 0.1;
        let t = BesselTable::new(x, SIDEBAND_TRUNCATION).unwrap();
        let total: f64 = (-SIDEBAND_TRUNCATION..=SIDEBAND_TRUNCATION).map(|k| t.get(k).powi(2)).sum();
        assert!((total - 1.0).abs() < 1e-10, "x = {x}: {total}");
    }
}

#[test]
fn jacobi_anger_reconstruction() {
    for x in [0.0, 0.7, 1.72, 2.405, 3.3, 5.0] {
        let t = BesselTable::new(x, SIDEBAND_TRUNCATION).unwrap();
        for j in 0..64 {
            let theta = TAU * j as f64 / 64.0;
            let sum: Complex64 = (-SIDEBAND_TRUNCATION..=SIDEBAND_TRUNCATION)
                .map(|k| Complex64::from_polar(t.get(k), k as f64 * theta))
                .sum();
            let direct = Complex64::from_polar(1.0, x * theta.sin());
            assert!((sum - direct).norm() < 1e-8, "x = {x}, θ = {theta}");
        }
    }
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

fn frac(r: &BigRational) -> BigRational {
    r - r.floor()
}

#[test]
fn phase_clock_matches_exact_rational_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let two_pi_inv = 1.0 / TAU;
    for _ in 0..20 {
        let f = rng.random_range(-3e9..3e9);
        let t = rng.random_range(0.1e-6..10e-6);
        let phi0 = rng.random_range(0.0..TAU);
        let clock = PhaseClock::new(f, phi0, t).unwrap();
        for n in [0u64, 1, 999_999, 10_000_000] {
            let cycles = frac(&(rational(f) * rational(t) * BigRational::from_integer(BigInt::from(n))));
            let exact = phi0 + TAU * cycles.to_f64().unwrap();
            let got = clock.at(n);
            let err = ((got - exact) * two_pi_inv + 0.5).rem_euclid(1.0) - 0.5;
            assert!((err * TAU).abs() < 1e-6, "f = {f}, n = {n}: {got} vs {exact}");
        }
    }
}

#[test]
fn fft_correlation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for &(m, n) in &[(10_000usize, 2_000usize), (777, 776), (64, 1)] {
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(0..4) as f64 + (PI * rng.random::<f64>()).sin()).collect();
        for norm in [Normalization::Unbiased, Normalization::RawSum] {
            let a = autocorrelate(&s, 1e-6, n, norm).unwrap();
            let b = autocorrelate_brute_force(&s, 1e-6, n, norm).unwrap();
            let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-9, "M = {m}, N = {n}, {norm:?}: {worst:e}");
        }
    }
}
