//! End-to-end acceptance run over the bundled configs.
//!
//! Prints one PASS/FAIL line per criterion. Exits nonzero only when a
//! criterion outside `KNOWN_FAILING` fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hetsense::analysis::{autocorrelate, autocorrelate_brute_force, Normalization};
use hetsense::dressed::{bessel_j, BesselTable, SIDEBAND_TRUNCATION};
use hetsense::dynamics::{
    closed_form_propagator, phase_response, Propagator, ResponseForm, RotatingFrameHamiltonian, SpinState,
};
use hetsense::experiment::{cpmg_pickup_law, max_cpmg_phase_pickup, MeasurementRecord};
use hetsense::sequences::{CpmgSpec, PulsePhaseConvention};
use hetsense::signals::PhaseClock;
use hetsense_cli::commands::{analyze_record, run_scan, simulate_record, write_scan, AnalyzeReport, ScanReport};
use hetsense_cli::config::Convention;
use hetsense_cli::RunConfig;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// CPMG pickup at the bundled signal strength misses the rectification law
/// by about 10%; see the decisions ledger.
const KNOWN_FAILING: &[u32] = &[4];

const THREADS: usize = 3;

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(format!("{name}.toml"))).expect("bundled config loads")
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Records and scan reports of the bundled configs, kept for the determinism rerun.
#[derive(Default)]
struct Runs {
    records: BTreeMap<String, MeasurementRecord>,
    scans: BTreeMap<String, ScanReport>,
}

impl Runs {
    fn series(&mut self, name: &str) -> Result<(&MeasurementRecord, f64), String> {
        let cfg = load(name);
        let start = Instant::now();
        let rec = simulate_record(&cfg, None).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        self.records.insert(name.to_string(), rec);
        Ok((&self.records[name], secs))
    }

    fn scan(&mut self, name: &str, cfg: &RunConfig) -> Result<&ScanReport, String> {
        let r = run_scan(cfg, None).map_err(|e| e.to_string())?;
        self.scans.insert(name.to_string(), r);
        Ok(&self.scans[name])
    }
}

fn analyze(name: &str, rec: &MeasurementRecord) -> Result<AnalyzeReport, String> {
    let cfg = load(name);
    analyze_record(rec, &cfg.analysis, None, false).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 1

fn two_tones(runs: &mut Runs) -> Outcome {
    let cfg = load("two_tones");
    let offsets: Vec<f64> = cfg.tones.iter().map(|t| t.offset_hz.unwrap()).collect();
    let (rec, secs) = runs.series("two_tones")?;
    let a = analyze("two_tones", rec)?;
    if a.peaks.len() != 2 {
        return Err(format!("found {} peaks", a.peaks.len()));
    }
    let limit = 1.5 * a.resolution;
    let sep = a.peaks[1].center - a.peaks[0].center;
    let want = offsets[1] - offsets[0];
    let widths_ok = a.peaks.iter().all(|p| p.fwhm <= limit);
    check(
        (sep - want).abs() <= a.resolution && widths_ok && secs < 60.0,
        format!(
            "separation {sep:.2} Hz (want {want} ± {:.2}), FWHM {:.3}/{:.3} Hz (limit {limit:.3}), simulated in {secs:.1} s",
            a.resolution, a.peaks[0].fwhm, a.peaks[1].fwhm
        ),
    )
}

// ---------------------------------------------------------------- 2

fn fourier_limit(runs: &mut Runs) -> Outcome {
    let cfg = load("linewidth_scaling");
    let t1 = cfg.sensor.decay.as_ref().ok_or("decay is not enabled")?.t1_ms * 1e-3;
    let (rec, _) = runs.series("linewidth_scaling")?;
    let t = rec.sampling_interval;
    let a = analyze("linewidth_scaling", rec)?;
    let lw = a.linewidth.ok_or("no linewidth table")?;
    let first = lw.points.first().unwrap();
    let last = lw.points.last().unwrap();
    let span_ok = (first.correlation_time - 0.01).abs() < 1e-4 && (last.correlation_time - 3.0).abs() < 1e-4;
    let slope_ok = (lw.slope + 1.0).abs() <= 0.05;
    let fwhm_ok = (last.fit.fwhm / 0.30 - 1.0).abs() <= 0.2;
    check(
        span_ok && slope_ok && fwhm_ok && (1.0 / t1 - 500.0).abs() < 1e-9,
        format!(
            "slope {:.3} over N·T {:.3}..{:.3} s, FWHM at 3 s {:.3} Hz, 1/T1 = {:.0} Hz, T = {:.3} us",
            lw.slope,
            first.correlation_time,
            last.correlation_time,
            last.fit.fwhm,
            1.0 / t1,
            t * 1e6
        ),
    )
}

// ---------------------------------------------------------------- 3

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

/// Scaling and squaring with a truncated Taylor series.
fn expm(a: &M2) -> M2 {
    let norm: f64 = a.iter().flatten().map(|z| z.norm()).sum();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let a: M2 = a.map(|row| row.map(|z| z * 0.5f64.powi(squarings as i32)));
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

fn oracle_propagator(h: &RotatingFrameHamiltonian, t: f64) -> M2 {
    let hm: M2 = [
        [Complex64::new(0.5 * h.detuning, 0.0), Complex64::new(0.5 * h.drive_x, -0.5 * h.drive_y)],
        [Complex64::new(0.5 * h.drive_x, 0.5 * h.drive_y), Complex64::new(-0.5 * h.detuning, 0.0)],
    ];
    expm(&hm.map(|row| row.map(|z| -Complex64::i() * z * t)))
}

fn frobenius(a: &M2, b: &M2) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn phase_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut exact_err, mut small_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let rabi = 10f64.powf(rng.random_range(3.0..7.0));
        let angle = rng.random_range(1e-4..0.1);
        // detuning small next to the drive, as for a weak near-resonant signal
        let detuning = rng.random_range(-0.1..0.1) * rabi;
        let omega = (rabi * rabi - detuning * detuning).sqrt();
        let t = angle / rabi;
        let phi0 = rng.random_range(0.0..TAU);
        let phi_ref = rng.random_range(0.0..TAU);
        let h = RotatingFrameHamiltonian::from_polar(detuning, omega, phi0);
        let simulated = SpinState::superposition(phi_ref).evolve(&Propagator::from_matrix(oracle_propagator(&h, t))).expect_sz();
        let exact = phase_response(omega, detuning, phi0, phi_ref, t, ResponseForm::Exact);
        let small = phase_response(omega, detuning, phi0, phi_ref, t, ResponseForm::SmallAngle);
        exact_err = exact_err.max((exact - simulated).abs());
        small_err = small_err.max((small - exact).abs() / (0.5 * omega * t));
    }
    check(
        exact_err < 1e-9 && small_err < 0.05,
        format!("exact vs propagation {exact_err:.1e}, small-angle error {:.2}% of Ωt/2", 100.0 * small_err),
    )
}

// ---------------------------------------------------------------- 4

fn cpmg(runs: &mut Runs) -> Outcome {
    let cfg = load("cpmg_sideband");
    let c = cfg.sequence.cpmg.as_ref().ok_or("no cpmg block")?;
    let convention = match c.convention {
        Convention::Cpmg => PulsePhaseConvention::Cpmg,
        Convention::Cp => PulsePhaseConvention::Cp,
    };
    let spec = CpmgSpec::new(c.tau_us * 1e-6, c.pulses, convention).map_err(|e| e.to_string())?;
    let tone = &cfg.tones[0];
    let reference = load("two_tones").tones[0].rabi_khz;
    let strength_ok = (tone.rabi_khz * 15.0 - reference).abs() < 1e-9;

    let (rec, _) = runs.series("cpmg_sideband")?;
    let t = rec.sampling_interval;
    let a = analyze("cpmg_sideband", rec)?;
    let peak = a.peaks[0];
    // the π/τ sideband aliases to zero because T is a multiple of 2τ
    let expected = tone.offset_hz.unwrap() - spec.sideband_hz();
    let line_ok = (peak.center - expected).abs() <= a.resolution && peak.fwhm <= 1.5 * a.resolution;

    let rabi = TAU * tone.rabi_khz * 1e3;
    let (best, _) = max_cpmg_phase_pickup(&spec, rabi, 0.0, 48, 200);
    let law = cpmg_pickup_law(rabi, spec.total_time());
    let pickup_ok = (best / law - 1.0).abs() <= 0.05;
    check(
        strength_ok && line_ok && pickup_ok,
        format!(
            "line {:.2} Hz (want {expected:.2}), FWHM {:.4}/(N·T), T = {:.1} us; max pickup {best:.2} rad vs 2ΩT/π = {law:.2} rad ({:+.1}%)",
            peak.center,
            peak.fwhm / a.resolution,
            t * 1e6,
            100.0 * (best / law - 1.0)
        ),
    )
}

// ---------------------------------------------------------------- 5

fn odmr(runs: &mut Runs) -> Outcome {
    let cfg = load("floquet_odmr");
    let o = cfg.scan.odmr.clone().ok_or("no odmr block")?;
    let ScanReport::Odmr { spin_frequency_hz, traces } = runs.scan("floquet_odmr", &cfg)? else {
        return Err("not an ODMR report".into());
    };
    let mut worst_steps: f64 = 0.0;
    for tr in traces {
        let f_rf = tr.rf_frequency_hz;
        let step = f_rf / o.steps_per_rf as f64;
        let s = &tr.spectrum;
        for k in -3i32..=3 {
            let target = spin_frequency_hz + k as f64 * f_rf;
            let best = (0..s.frequencies.len())
                .filter(|&i| (s.frequencies[i] - target).abs() <= 0.5 * f_rf)
                .max_by(|&i, &j| s.transfer[i].total_cmp(&s.transfer[j]))
                .ok_or(format!("no grid points near order {k}"))?;
            worst_steps = worst_steps.max((s.frequencies[best] - target).abs() / step);
        }
    }

    let depth_at = |x: f64| -> Result<f64, String> {
        let mut c = cfg.clone();
        let od = c.scan.odmr.as_mut().unwrap();
        od.rf_frequencies_mhz = vec![1.45];
        od.modulation_index = x;
        match run_scan(&c, None).map_err(|e| e.to_string())? {
            ScanReport::Odmr { spin_frequency_hz, traces } => Ok(traces[0].spectrum.transfer_near(spin_frequency_hz)),
            _ => Err("not an ODMR report".into()),
        }
    };
    let bare = depth_at(0.0)?;
    let dark = depth_at(2.405)?;
    check(
        worst_steps <= 1.0 && dark < 0.05 * bare,
        format!(
            "sidebands |Δm| ≤ 3 within {worst_steps:.2} steps at {} RF frequencies; carrier depth {dark:.2e} at x = 2.405 vs {bare:.3} at x = 0",
            traces.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn rabi(runs: &mut Runs) -> Outcome {
    let cfg = load("floquet_rabi");
    let ScanReport::Rabi { probe_rabi_hz, strengths, traces } = runs.scan("floquet_rabi", &cfg)? else {
        return Err("not a Rabi report".into());
    };
    let measured = [45e3, 66e3, 35e3];
    let mut ok = true;
    let mut parts = Vec::new();
    for (tr, j) in traces.iter().zip(strengths) {
        let fitted = tr.rabi_hz();
        let theory = j.abs() * probe_rabi_hz;
        let vs_theory = fitted / theory - 1.0;
        let vs_measured = measured.get(tr.k as usize).map(|m| fitted / m - 1.0);
        ok &= vs_theory.abs() <= 0.03 && vs_measured.is_some_and(|d| d.abs() <= 0.10);
        parts.push(format!(
            "k={} {:.2} kHz ({:+.1}% vs J_k·Ω1, {:+.1}% vs measured)",
            tr.k,
            fitted * 1e-3,
            100.0 * vs_theory,
            100.0 * vs_measured.unwrap_or(f64::NAN)
        ));
    }
    check(ok && traces.len() == 3, parts.join(", "))
}

// ---------------------------------------------------------------- 7

fn floquet_stepping(runs: &mut Runs) -> Outcome {
    let cfg = load("floquet_phase_step");
    let step = cfg.sequence.rf.as_ref().ok_or("no rf block")?.phase_step_deg;
    let (rec, _) = runs.series("floquet_phase_step")?;
    let fs = 1.0 / rec.sampling_interval;
    let a = analyze("floquet_phase_step", rec)?;
    let p = a.peaks[0];
    let want = fs * step / 360.0;
    check(
        (step - 45.0).abs() < 1e-12 && (p.center - want).abs() <= a.resolution && p.fwhm <= 1.5 * a.resolution,
        format!(
            "peak {:.2} Hz vs fs/8 = {want:.2} Hz (bin {:.2} Hz), FWHM {:.3}/(N·T)",
            p.center,
            a.resolution,
            p.fwhm / a.resolution
        ),
    )
}

// ---------------------------------------------------------------- 8

fn phase_sensitivity(runs: &mut Runs) -> Outcome {
    let cfg = load("phase_sweep");
    let p = cfg.scan.phase_sweep.as_ref().ok_or("no phase sweep")?;
    let (shots, mean) = (p.shots_per_point, cfg.readout.mean_photons);
    let ScanReport::PhaseSweep(sweep) = runs.scan("phase_sweep", &cfg)? else {
        return Err("not a phase sweep".into());
    };
    let clean = sweep.fit_true_sz.r_squared;
    let noisy = sweep.fit_counts.ok_or("no counts")?.r_squared;
    check(
        clean > 0.99 && noisy > 0.9 && shots == 10_000 && (mean - 0.1).abs() < 1e-12,
        format!("R² {clean:.5} noise-free, {noisy:.4} counts at n̄ = {mean}, {shots} shots per point"),
    )
}

// ---------------------------------------------------------------- 9

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

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();

    let mut prop: f64 = 0.0;
    for _ in 0..1000 {
        let h = RotatingFrameHamiltonian::new(
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
        );
        let t = rng.random_range(0.0..3.0);
        let u = closed_form_propagator(&h, t).map_err(|e| e.to_string())?;
        prop = prop.max(frobenius(u.matrix(), &oracle_propagator(&h, t)));
    }
    if prop >= 1e-9 {
        failures.push(format!("propagator {prop:.1e}"));
    }

    let s: Vec<f64> = (0..10_000).map(|_| rng.random_range(0..3) as f64 + rng.random::<f64>()).collect();
    let fast = autocorrelate(&s, 1e-6, 2000, Normalization::Unbiased).map_err(|e| e.to_string())?;
    let slow = autocorrelate_brute_force(&s, 1e-6, 2000, Normalization::Unbiased).map_err(|e| e.to_string())?;
    let corr = fast.values.iter().zip(&slow.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if corr >= 1e-9 {
        failures.push(format!("correlation {corr:.1e}"));
    }

    let mut bessel: f64 = 0.0;
    for k in 0..=20u32 {
        for j in 0..=80 {
            let x = j as f64 * 0.1;
            bessel = bessel.max((bessel_j(k as i32, x).map_err(|e| e.to_string())? - bessel_series(k, x)).abs());
        }
    }
    if bessel >= 1e-10 {
        failures.push(format!("Bessel {bessel:.1e}"));
    }

    let (mut anger, mut complete): (f64, f64) = (0.0, 0.0);
    for j in 0..=50 {
        let x = j as f64 * 0.1;
        let table = BesselTable::new(x, SIDEBAND_TRUNCATION).map_err(|e| e.to_string())?;
        let orders = -SIDEBAND_TRUNCATION..=SIDEBAND_TRUNCATION;
        complete = complete.max((orders.clone().map(|k| table.get(k).powi(2)).sum::<f64>() - 1.0).abs());
        for i in 0..32 {
            let theta = TAU * i as f64 / 32.0;
            let sum: Complex64 = orders.clone().map(|k| Complex64::from_polar(table.get(k), k as f64 * theta)).sum();
            anger = anger.max((sum - Complex64::from_polar(1.0, x * theta.sin())).norm());
        }
    }
    if anger >= 1e-8 {
        failures.push(format!("Jacobi-Anger {anger:.1e}"));
    }
    if complete >= 1e-10 {
        failures.push(format!("completeness {complete:.1e}"));
    }

    let mut phase: f64 = 0.0;
    let n = 10_000_000u64;
    for _ in 0..20 {
        let f = rng.random_range(-3e9..3e9);
        let t = rng.random_range(0.1e-6..10e-6);
        let phi0 = rng.random_range(0.0..TAU);
        let clock = PhaseClock::new(f, phi0, t).map_err(|e| e.to_string())?;
        let r = BigRational::from_float(f).unwrap()
            * BigRational::from_float(t).unwrap()
            * BigRational::from_integer(BigInt::from(n));
        let cycles = (&r - r.floor()).to_f64().unwrap();
        let d = (clock.at(n) - phi0) / TAU - cycles;
        phase = phase.max(TAU * (d - d.round()).abs());
    }
    if phase >= 1e-6 {
        failures.push(format!("phase bookkeeping {phase:.1e} rad"));
    }

    let detail = format!(
        "propagator {prop:.1e}, correlation {corr:.1e}, Bessel {bessel:.1e}, Jacobi-Anger {anger:.1e}, completeness {complete:.1e}, phase {phase:.1e} rad"
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; over tolerance: {}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------- 10

fn scan_files(report: &ScanReport) -> Result<Vec<(String, Vec<u8>)>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = write_scan(report, dir.path(), false).map_err(|e| e.to_string())?;
    files.sort();
    files
        .iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).map_err(|e| e.to_string())?)))
        .collect()
}

fn determinism(runs: &Runs) -> Outcome {
    let single = pool(1);
    let mut names = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    entries.sort();
    for path in entries {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let cfg = RunConfig::load(&path).map_err(|e| e.to_string())?;
        if cfg.protocol.is_series() {
            let first = runs.records.get(&name).ok_or(format!("{name} was not run"))?;
            let again = single.install(|| simulate_record(&cfg, None)).map_err(|e| e.to_string())?;
            if first.to_bytes() != again.to_bytes() {
                return Err(format!("{name}: record differs between {THREADS} and 1 threads"));
            }
        } else {
            let first = runs.scans.get(&name).ok_or(format!("{name} was not run"))?;
            let again = single.install(|| run_scan(&cfg, None)).map_err(|e| e.to_string())?;
            if scan_files(first)? != scan_files(&again)? {
                return Err(format!("{name}: scan output differs between {THREADS} and 1 threads"));
            }
        }
        names.push(name);
    }
    Ok(format!("{} configs byte-identical at {THREADS} and 1 threads: {}", names.len(), names.join(", ")))
}

fn main() {
    let mut runs = Runs::default();
    let wide = pool(THREADS);
    let mut failed_unexpectedly = Vec::new();
    let criteria: Vec<(u32, &str, Box<dyn FnMut(&mut Runs) -> Outcome + Send>)> = vec![
        (1, "two-tone splitting", Box::new(two_tones)),
        (2, "Fourier-limit scaling", Box::new(fourier_limit)),
        (3, "phase-response law", Box::new(|_: &mut Runs| phase_law())),
        (4, "CPMG heterodyne", Box::new(cpmg)),
        (5, "Floquet ODMR", Box::new(odmr)),
        (6, "Floquet Rabi rates", Box::new(rabi)),
        (7, "Floquet phase stepping", Box::new(floquet_stepping)),
        (8, "Floquet phase sensitivity", Box::new(phase_sensitivity)),
        (9, "oracle equivalences", Box::new(|_: &mut Runs| oracles())),
        (10, "determinism", Box::new(|r: &mut Runs| determinism(r))),
    ];
    for (n, title, mut f) in criteria {
        let start = Instant::now();
        let outcome = wide
            .install(|| catch_unwind(AssertUnwindSafe(|| f(&mut runs))))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILING.contains(&n);
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS {title}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                let tag = if known { " (known)" } else { "" };
                println!("criterion {n:>2} FAIL{tag} {title}: {detail} [{secs:.1} s]");
                if !known {
                    failed_unexpectedly.push(n);
                }
            }
        }
    }
    if !failed_unexpectedly.is_empty() {
        println!("unexpected failures: {failed_unexpectedly:?}");
        std::process::exit(1);
    }
}
