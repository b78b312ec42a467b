use std::f64::consts::{PI, TAU};

use super::engine::SenseDrive;
use crate::dynamics::{BlochVector, Propagator};
use crate::sequences::CpmgSpec;
use crate::signals::DriveComponent;

/// Rectification law for a sideband-resonant signal: `2·Ω·T/π`.
pub fn cpmg_pickup_law(signal_rabi: f64, sensing_time: f64) -> f64 {
    2.0 * signal_rabi * sensing_time / PI
}

/// Phase picked up by the prepared superposition during a CPMG block.
///
/// The spin starts on resonance with the reference at Bloch azimuth `−π/2`
/// (a π/2 pulse at phase 0). The signal turns at `π/τ + signal_offset`
/// (rad/s) relative to the reference and has axis `signal_phase` when
/// sensing starts. The returned angle is measured in the toggling frame
/// (each π pulse undone), from the preparation axis toward `+z`, and
/// unwrapped along the trajectory, so it can exceed `π`.
pub fn cpmg_phase_pickup(
    cpmg: &CpmgSpec,
    signal_rabi: f64,
    signal_phase: f64,
    signal_offset: f64,
    steps_per_interval: usize,
) -> f64 {
    let comps = [DriveComponent {
        amplitude: signal_rabi,
        offset: cpmg.sideband_omega() + signal_offset,
        phase: signal_phase,
    }];
    let drive = SenseDrive { components: &comps, spin_detuning: 0.0, rf: None };
    let pi = Propagator::rotation(PI, cpmg.pulse_phase(0.0));
    let prep = BlochVector::new(0.0, -1.0, 0.0);
    let angle_of = |b: &BlochVector| b.z.atan2(b.x * prep.x + b.y * prep.y);

    let steps = steps_per_interval.max(1);
    let mut edges = vec![0.0];
    edges.extend(cpmg.pulse_times());
    edges.push(cpmg.total_time());

    let mut bloch = prep;
    let mut flips = 0usize;
    let mut last = 0.0;
    let mut total = 0.0;
    for (i, w) in edges.windows(2).enumerate() {
        let dt = (w[1] - w[0]) / steps as f64;
        for s in 0..steps {
            let a = w[0] + s as f64 * dt;
            bloch = bloch.rotate(&drive.propagator(a, a + dt, f64::INFINITY));
            let toggled = if flips % 2 == 1 { bloch.rotate(&pi) } else { bloch };
            let now = angle_of(&toggled);
            total += (now - last + PI).rem_euclid(TAU) - PI;
            last = now;
        }
        if i + 1 < edges.len() - 1 {
            bloch = bloch.rotate(&pi);
            flips += 1;
        }
    }
    total
}

/// Largest `|pickup|` over `phases` evenly spaced signal phases, with the
/// phase that achieved it.
pub fn max_cpmg_phase_pickup(
    cpmg: &CpmgSpec,
    signal_rabi: f64,
    signal_offset: f64,
    phases: usize,
    steps_per_interval: usize,
) -> (f64, f64) {
    (0..phases.max(1))
        .map(|j| {
            let phase = TAU * j as f64 / phases.max(1) as f64;
            (cpmg_phase_pickup(cpmg, signal_rabi, phase, signal_offset, steps_per_interval).abs(), phase)
        })
        .fold((f64::NEG_INFINITY, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
}
