//! Subcommand bodies. Each returns a report; printing and file output are
//! separate so the reports can be checked directly.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hetsense::analysis::{
    autocorrelate, autocorrelate_brute_force, find_peaks, fit_peak, linewidth_scaling, power_spectrum, Correlation,
    LinewidthScaling, PeakFit, Spectrum,
};
use hetsense::dressed::{sidebands, FloquetDressing, Sideband};
use hetsense::experiment::{
    odmr_scan, phase_sweep, rabi_scan, MeasurementRecord, OdmrSpectrum, PhaseSweep, RabiMethod, RabiTrace,
    DEFAULT_MAX_PHASE_STEP,
};
use hetsense::sequences::RfDriveSpec;
use serde::Serialize;

use crate::config::{AnalysisConfig, Protocol, RabiMethodConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Style};

/// Largest `M·N` accepted by the brute-force check.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000_000;
/// Absolute agreement required between FFT and brute-force correlations,
/// relative to the zero-lag value when that exceeds 1.
pub const BRUTE_FORCE_TOLERANCE: f64 = 1e-9;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `# key = value` lines, then the column header.
fn csv_header<W: Write>(w: &mut W, kind: &str, meta: &[(&str, String)], columns: &str) -> std::io::Result<()> {
    writeln!(w, "# hetsense {kind}")?;
    for (k, v) in meta {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{columns}")
}

fn write_csv<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn analysis_error(e: hetsense::Error) -> CliError {
    match e {
        hetsense::Error::PeakNotFound(m) => CliError::Analysis(format!("no peak found: {m}")),
        other => CliError::Analysis(other.to_string()),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub shots: u64,
    pub sampling_interval: f64,
    pub mean_counts: f64,
    pub runtime: Duration,
    pub record_path: PathBuf,
}

impl SimulateReport {
    pub fn text(&self) -> String {
        format!(
            "M = {}\nT = {:.6} us\nmean counts = {:.6}\nruntime = {:.3} s\nrecord: {}\n",
            self.shots,
            self.sampling_interval * 1e6,
            self.mean_counts,
            self.runtime.as_secs_f64(),
            self.record_path.display()
        )
    }
}

/// Runs the shot series of `cfg`.
pub fn simulate_record(cfg: &RunConfig, seed: Option<u64>) -> CliResult<MeasurementRecord> {
    if !cfg.protocol.is_series() {
        return Err(CliError::Usage(format!(
            "protocol {} is a scan; use the scan subcommand",
            cfg.protocol.name()
        )));
    }
    let exp = cfg.experiment(seed)?;
    exp.run_series(cfg.shots.expect("validated")).map_err(|e| CliError::from_core("<root>", e))
}

pub fn simulate(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path, svg: bool) -> CliResult<SimulateReport> {
    let start = Instant::now();
    let record = simulate_record(cfg, seed)?;
    let runtime = start.elapsed();
    ensure_dir(out_dir)?;
    let record_path = out_dir.join(&cfg.output.record);
    let mut w = create(&record_path)?;
    record
        .write_binary(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| CliError::from_core(&record_path.display().to_string(), e))?;
    if cfg.output.csv {
        let path = record_path.with_extension("csv");
        let mut w = create(&path)?;
        record
            .write_csv(&mut w)
            .and_then(|_| w.flush().map_err(Into::into))
            .map_err(|e| CliError::from_core(&path.display().to_string(), e))?;
    }
    if svg {
        let t = record.sampling_interval;
        let points = record.true_sz.iter().take(2000).enumerate().map(|(n, &s)| (n as f64 * t * 1e3, s)).collect();
        let plot = Plot::new("noise-free response, first shots", "time (ms)", "⟨S_z⟩").with("⟨S_z⟩", points, Style::Line);
        write_text(&record_path.with_extension("svg"), &plot.render())?;
    }
    Ok(SimulateReport {
        shots: record.shot_count() as u64,
        sampling_interval: record.sampling_interval,
        mean_counts: record.mean_counts(),
        runtime,
        record_path,
    })
}

// ---------------------------------------------------------------- analyze

pub fn read_record(path: &Path) -> CliResult<MeasurementRecord> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let result = if is_csv { MeasurementRecord::read_csv(reader) } else { MeasurementRecord::read_binary(reader) };
    result.map_err(|e| CliError::Record { path: path.to_path_buf(), message: e.to_string() })
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub shots: usize,
    pub sampling_interval: f64,
    pub seed: u64,
    pub lags: usize,
    /// 1/(N·T), Hz
    pub resolution: f64,
    pub bin_spacing: f64,
    pub search_low_hz: f64,
    pub search_high_hz: f64,
    pub peaks: Vec<PeakFit>,
    pub linewidth: Option<LinewidthScaling>,
    /// Largest FFT versus brute-force difference, when checked.
    pub oracle_max_difference: Option<f64>,
    #[serde(skip)]
    pub correlation: Correlation,
    #[serde(skip)]
    pub spectrum: Spectrum,
}

impl AnalyzeReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "M = {}, T = {:.6} us, N = {} (N·T = {:.6} s), resolution {:.6} Hz",
            self.shots,
            self.sampling_interval * 1e6,
            self.lags,
            self.lags as f64 * self.sampling_interval,
            self.resolution
        );
        for (i, p) in self.peaks.iter().enumerate() {
            let _ = writeln!(
                s,
                "peak {}: center {:.4} Hz, FWHM {:.4} Hz ({:.3}/(N·T))",
                i + 1,
                p.center,
                p.fwhm,
                p.fwhm / self.resolution
            );
        }
        if self.peaks.len() == 2 {
            let _ = writeln!(s, "separation {:.4} Hz", (self.peaks[1].center - self.peaks[0].center).abs());
        }
        if let Some(lw) = &self.linewidth {
            let _ = writeln!(s, "linewidth slope {:.4} over {} lengths", lw.slope, lw.points.len());
        }
        if let Some(d) = self.oracle_max_difference {
            let _ = writeln!(s, "FFT vs brute force: max |ΔC| = {d:.3e}");
        }
        s
    }
}

/// Correlation, spectrum, peak fits and optionally a linewidth table.
pub fn analyze_record(
    record: &MeasurementRecord,
    analysis: &AnalysisConfig,
    lengths: Option<&[usize]>,
    brute_force: bool,
) -> CliResult<AnalyzeReport> {
    let series = analysis.channel().extract(record);
    let m = series.len();
    let t = record.sampling_interval;
    if m < 2 {
        return Err(CliError::Analysis(format!("record has {m} shots, need at least 2")));
    }
    let n = analysis.max_lag.unwrap_or(m / 2).max(1);
    if n > m {
        return Err(CliError::schema("analysis.max_lag", format!("{n} exceeds the record length {m}")));
    }
    let opts = analysis.spectrum_options();
    let correlation = autocorrelate(&series, t, n, opts.normalization).map_err(analysis_error)?;
    let oracle_max_difference = if brute_force {
        if m as u64 * n as u64 > BRUTE_FORCE_LIMIT {
            return Err(CliError::Usage(format!(
                "brute-force check needs M·N ≤ {BRUTE_FORCE_LIMIT}, got {m}·{n}"
            )));
        }
        let slow = autocorrelate_brute_force(&series, t, n, opts.normalization).map_err(analysis_error)?;
        let worst =
            correlation.values.iter().zip(&slow.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = correlation.values[0].abs().max(1.0);
        if !(worst <= BRUTE_FORCE_TOLERANCE * scale) {
            return Err(CliError::Analysis(format!(
                "FFT and brute-force correlations differ by {worst:e} (allowed {:e})",
                BRUTE_FORCE_TOLERANCE * scale
            )));
        }
        Some(worst)
    } else {
        None
    };
    let spectrum = power_spectrum(&correlation, opts.window, opts.oversample).map_err(analysis_error)?;
    let lo = analysis.search_low_hz.unwrap_or(spectrum.resolution);
    let hi = analysis.search_high_hz.unwrap_or(spectrum.nyquist());
    let peaks = if analysis.peaks == 1 {
        vec![fit_peak(&spectrum, lo, hi).map_err(analysis_error)?]
    } else {
        let sep = analysis.min_separation_hz.unwrap_or(4.0 * spectrum.resolution);
        let mut found = find_peaks(&spectrum, lo, hi, sep, analysis.peaks).map_err(analysis_error)?;
        if found.is_empty() {
            return Err(CliError::Analysis(format!("no peak found in [{lo}, {hi}] Hz")));
        }
        found.sort_by(|a, b| a.center.total_cmp(&b.center));
        found
    };
    let lengths = lengths.unwrap_or(&analysis.lengths);
    let linewidth = if lengths.is_empty() {
        None
    } else {
        if let Some(&too_long) = lengths.iter().find(|&&l| l == 0 || l > m) {
            return Err(CliError::Usage(format!("correlation length {too_long} outside 1..={m}")));
        }
        Some(linewidth_scaling(&series, t, lengths, lo, hi, &opts).map_err(analysis_error)?)
    };
    Ok(AnalyzeReport {
        shots: m,
        sampling_interval: t,
        seed: record.seed,
        lags: n,
        resolution: spectrum.resolution,
        bin_spacing: spectrum.bin_spacing,
        search_low_hz: lo,
        search_high_hz: hi,
        peaks,
        linewidth,
        oracle_max_difference,
        correlation,
        spectrum,
    })
}

/// correlation.csv, spectrum.csv, peaks.csv, summary.json, and
/// linewidth.csv when a length sweep was run.
pub fn write_analysis(report: &AnalyzeReport, out_dir: &Path, svg: bool) -> CliResult<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let t = report.sampling_interval;
    let base_meta = vec![
        ("shots", report.shots.to_string()),
        ("sampling_interval_s", format!("{t:e}")),
        ("seed", report.seed.to_string()),
        ("lags", report.lags.to_string()),
    ];
    let mut written = Vec::new();

    let path = out_dir.join("correlation.csv");
    write_csv(&path, |w| {
        let mut meta = base_meta.clone();
        meta.push(("normalization", format!("{:?}", report.correlation.normalization).to_lowercase()));
        csv_header(w, "correlation", &meta, "lag,time_s,value")?;
        for (k, v) in report.correlation.values.iter().enumerate() {
            writeln!(w, "{k},{:e},{v:e}", k as f64 * t)?;
        }
        Ok(())
    })?;
    written.push(path);

    let spec = &report.spectrum;
    let (a, b) = (spec.bin_of(report.search_low_hz), spec.bin_of(report.search_high_hz));
    let path = out_dir.join("spectrum.csv");
    write_csv(&path, |w| {
        let mut meta = base_meta.clone();
        meta.push(("window", format!("{:?}", spec.window).to_lowercase()));
        meta.push(("resolution_hz", format!("{:e}", spec.resolution)));
        meta.push(("bin_spacing_hz", format!("{:e}", spec.bin_spacing)));
        meta.push(("range_hz", format!("{} {}", report.search_low_hz, report.search_high_hz)));
        csv_header(w, "spectrum", &meta, "frequency_hz,power")?;
        for j in a..=b {
            writeln!(w, "{:.9e},{:e}", spec.frequencies[j], spec.power[j])?;
        }
        Ok(())
    })?;
    written.push(path);

    let path = out_dir.join("peaks.csv");
    write_csv(&path, |w| {
        let mut meta = base_meta.clone();
        meta.push(("resolution_hz", format!("{:e}", report.resolution)));
        csv_header(w, "peaks", &meta, "peak,center_hz,fwhm_hz,fwhm_over_resolution,amplitude,fit_residual")?;
        for (i, p) in report.peaks.iter().enumerate() {
            writeln!(
                w,
                "{},{:.9e},{:e},{:.6},{:e},{:e}",
                i + 1,
                p.center,
                p.fwhm,
                p.fwhm / report.resolution,
                p.amplitude,
                p.fit_residual
            )?;
        }
        Ok(())
    })?;
    written.push(path);

    if let Some(lw) = &report.linewidth {
        let path = out_dir.join("linewidth.csv");
        write_csv(&path, |w| {
            let mut meta = base_meta.clone();
            meta.push(("slope", format!("{:.6}", lw.slope)));
            csv_header(w, "linewidth", &meta, "lags,correlation_time_s,center_hz,fwhm_hz,amplitude")?;
            for p in &lw.points {
                writeln!(
                    w,
                    "{},{:e},{:.9e},{:e},{:e}",
                    p.lags, p.correlation_time, p.fit.center, p.fit.fwhm, p.fit.amplitude
                )?;
            }
            Ok(())
        })?;
        written.push(path);
    }

    let path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_text(&path, &(json + "\n"))?;
    written.push(path);

    if svg {
        let points = (a..=b).map(|j| (spec.frequencies[j], spec.power[j])).collect();
        let mut plot = Plot::new("spectrum of the autocorrelation", "frequency (Hz)", "power").with(
            "spectrum",
            points,
            Style::Line,
        );
        plot.markers = report.peaks.iter().map(|p| p.center).collect();
        let path = out_dir.join("spectrum.svg");
        write_text(&path, &plot.render())?;
        written.push(path);
        if let Some(lw) = &report.linewidth {
            let fitted = lw.points.iter().map(|p| (p.correlation_time, p.fit.fwhm)).collect();
            let limit = lw.points.iter().map(|p| (p.correlation_time, 1.0 / p.correlation_time)).collect();
            let mut plot = Plot::new(&format!("linewidth, slope {:.3}", lw.slope), "N·T (s)", "FWHM (Hz)")
                .with("fitted FWHM", fitted, Style::Markers)
                .with("1/(N·T)", limit, Style::Line);
            plot.log_x = true;
            plot.log_y = true;
            let path = out_dir.join("linewidth.svg");
            write_text(&path, &plot.render())?;
            written.push(path);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------- scan

#[derive(Clone, Debug)]
pub struct OdmrTrace {
    pub rf_frequency_hz: f64,
    pub modulation_index: f64,
    pub spectrum: OdmrSpectrum,
}

#[derive(Clone, Debug)]
pub enum ScanReport {
    Odmr { spin_frequency_hz: f64, traces: Vec<OdmrTrace> },
    Rabi { probe_rabi_hz: f64, strengths: Vec<f64>, traces: Vec<RabiTrace> },
    PhaseSweep(PhaseSweep),
}

/// Sideband orders listed in the ODMR summary.
const ODMR_SUMMARY_ORDERS: i32 = 3;

impl ScanReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        match self {
            ScanReport::Odmr { spin_frequency_hz, traces } => {
                for tr in traces {
                    let f_rf = tr.rf_frequency_hz;
                    let lines: Vec<String> = (-ODMR_SUMMARY_ORDERS..=ODMR_SUMMARY_ORDERS)
                        .map(|k| {
                            let p = tr.spectrum.transfer_near(spin_frequency_hz + k as f64 * f_rf);
                            format!("{k:+}: {p:.4}")
                        })
                        .collect();
                    let _ = writeln!(
                        s,
                        "rf {:.4} MHz, x = {:.3}: transfer by order {}",
                        f_rf * 1e-6,
                        tr.modulation_index,
                        lines.join(", ")
                    );
                }
            }
            ScanReport::Rabi { probe_rabi_hz, strengths, traces } => {
                for (tr, j) in traces.iter().zip(strengths) {
                    let _ = writeln!(
                        s,
                        "k = {}: fitted {:.3} kHz, |J_k(x)|·Ω1 = {:.3} kHz",
                        tr.k,
                        tr.rabi_hz() * 1e-3,
                        j.abs() * probe_rabi_hz * 1e-3
                    );
                }
            }
            ScanReport::PhaseSweep(p) => {
                let f = p.fit_true_sz;
                let _ = writeln!(s, "noise-free: amplitude {:.4}, R² = {:.5}", f.amplitude, f.r_squared);
                if let Some(c) = p.fit_counts {
                    let _ = writeln!(
                        s,
                        "counts ({} shots per point): amplitude {:.5}, R² = {:.5}",
                        p.shots_per_point, c.amplitude, c.r_squared
                    );
                }
            }
        }
        s
    }
}

pub fn run_scan(cfg: &RunConfig, seed: Option<u64>) -> CliResult<ScanReport> {
    match cfg.protocol {
        Protocol::Odmr => {
            let o = cfg.scan.odmr.as_ref().expect("validated");
            let spin = cfg.spin_frequency_hz();
            let traces = o
                .rf_frequencies_mhz
                .iter()
                .map(|&mhz| {
                    let f_rf = mhz * 1e6;
                    let omega = TAU * f_rf;
                    let rf = RfDriveSpec::new(omega, o.modulation_index * omega, o.rf_phase_deg.to_radians(), 0.0)
                        .map_err(|e| CliError::from_core("scan.odmr", e))?;
                    let spectrum = odmr_scan(
                        &o.grid(spin, f_rf),
                        &rf,
                        o.probe_duration(),
                        TAU * o.probe_rabi_khz * 1e3,
                        spin,
                        DEFAULT_MAX_PHASE_STEP,
                    )
                    .map_err(|e| CliError::from_core("scan.odmr", e))?;
                    Ok(OdmrTrace { rf_frequency_hz: f_rf, modulation_index: o.modulation_index, spectrum })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ScanReport::Odmr { spin_frequency_hz: spin, traces })
        }
        Protocol::Rabi => {
            let r = cfg.scan.rabi.as_ref().expect("validated");
            let omega_rf = TAU * r.rf_frequency_mhz * 1e6;
            let d = FloquetDressing::with_phase(omega_rf, r.modulation_index * omega_rf, r.rf_phase_deg.to_radians())
                .map_err(|e| CliError::from_core("scan.rabi", e))?;
            let method = match r.method {
                RabiMethodConfig::Lab => {
                    RabiMethod::LabFrame { spin_frequency_hz: r.lab_spin_frequency_mhz * 1e6, dt: r.lab_dt_ns * 1e-9 }
                }
                RabiMethodConfig::Effective => RabiMethod::Effective,
            };
            let omega1 = TAU * r.probe_rabi_khz * 1e3;
            let durations = r.durations();
            let traces = r
                .sidebands
                .iter()
                .map(|&k| rabi_scan(&durations, k, &d, omega1, method).map_err(|e| CliError::from_core("scan.rabi", e)))
                .collect::<CliResult<Vec<_>>>()?;
            let strengths = r
                .sidebands
                .iter()
                .map(|&k| d.sideband_strength(k).map_err(|e| CliError::from_core("scan.rabi.sidebands", e)))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ScanReport::Rabi { probe_rabi_hz: r.probe_rabi_khz * 1e3, strengths, traces })
        }
        Protocol::PhaseSweep => {
            let p = cfg.scan.phase_sweep.as_ref().expect("validated");
            let exp = cfg.experiment(seed)?;
            let sweep = phase_sweep(&p.phases(), &exp, p.tone, p.shot_index, p.shots_per_point)
                .map_err(|e| CliError::from_core("scan.phase_sweep", e))?;
            Ok(ScanReport::PhaseSweep(sweep))
        }
        other => Err(CliError::Usage(format!("protocol {} is not a scan; use simulate", other.name()))),
    }
}

pub fn write_scan(report: &ScanReport, out_dir: &Path, svg: bool) -> CliResult<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    match report {
        ScanReport::Odmr { spin_frequency_hz, traces } => {
            let path = out_dir.join("odmr.csv");
            write_csv(&path, |w| {
                let meta = [("spin_frequency_hz", format!("{spin_frequency_hz}"))];
                csv_header(w, "odmr", &meta, "rf_frequency_hz,modulation_index,probe_offset_hz,offset_over_rf,transfer")?;
                for tr in traces {
                    for (f, p) in tr.spectrum.frequencies.iter().zip(&tr.spectrum.transfer) {
                        let off = f - spin_frequency_hz;
                        writeln!(
                            w,
                            "{},{},{:.6},{:.6},{:e}",
                            tr.rf_frequency_hz,
                            tr.modulation_index,
                            off,
                            off / tr.rf_frequency_hz,
                            p
                        )?;
                    }
                }
                Ok(())
            })?;
            written.push(path);
            if svg {
                // traces stacked with a vertical offset, as in an ODMR waterfall
                let mut plot = Plot::new("ODMR under RF dressing", "probe offset / ω_rf", "transfer + offset");
                for (i, tr) in traces.iter().enumerate() {
                    let pts = tr
                        .spectrum
                        .frequencies
                        .iter()
                        .zip(&tr.spectrum.transfer)
                        .map(|(f, p)| ((f - spin_frequency_hz) / tr.rf_frequency_hz, p + 1.1 * i as f64))
                        .collect();
                    plot = plot.with(&format!("{:.2} MHz", tr.rf_frequency_hz * 1e-6), pts, Style::Line);
                }
                let path = out_dir.join("odmr.svg");
                write_text(&path, &plot.render())?;
                written.push(path);
            }
        }
        ScanReport::Rabi { probe_rabi_hz, strengths, traces } => {
            let path = out_dir.join("rabi.csv");
            write_csv(&path, |w| {
                csv_header(w, "rabi", &[("probe_rabi_hz", format!("{probe_rabi_hz}"))], "k,duration_s,population")?;
                for tr in traces {
                    for (t, p) in tr.durations.iter().zip(&tr.population) {
                        writeln!(w, "{},{:e},{:e}", tr.k, t, p)?;
                    }
                }
                Ok(())
            })?;
            written.push(path);
            let path = out_dir.join("rabi_fits.csv");
            write_csv(&path, |w| {
                csv_header(
                    w,
                    "rabi fits",
                    &[("probe_rabi_hz", format!("{probe_rabi_hz}"))],
                    "k,fitted_hz,bessel_hz,r_squared",
                )?;
                for (tr, j) in traces.iter().zip(strengths) {
                    let r2 = tr.fit.map_or(f64::NAN, |f| f.r_squared);
                    writeln!(w, "{},{:.6},{:.6},{:.6}", tr.k, tr.rabi_hz(), j.abs() * probe_rabi_hz, r2)?;
                }
                Ok(())
            })?;
            written.push(path);
            if svg {
                let mut plot = Plot::new("Rabi oscillations on the sidebands", "duration (us)", "P(|−1⟩)");
                for tr in traces {
                    let pts = tr.durations.iter().zip(&tr.population).map(|(t, p)| (t * 1e6, *p)).collect();
                    plot = plot.with(&format!("k = {}, {:.1} kHz", tr.k, tr.rabi_hz() * 1e-3), pts, Style::Line);
                }
                let path = out_dir.join("rabi.svg");
                write_text(&path, &plot.render())?;
                written.push(path);
            }
        }
        ScanReport::PhaseSweep(p) => {
            let path = out_dir.join("phase_sweep.csv");
            write_csv(&path, |w| {
                let f = p.fit_true_sz;
                let mut meta = vec![
                    ("shots_per_point", p.shots_per_point.to_string()),
                    ("fit_true_sz", format!("offset {:e} amplitude {:e} phase {:.6} r_squared {:.6}", f.offset, f.amplitude, f.phase, f.r_squared)),
                ];
                if let Some(c) = p.fit_counts {
                    meta.push((
                        "fit_counts",
                        format!("offset {:e} amplitude {:e} phase {:.6} r_squared {:.6}", c.offset, c.amplitude, c.phase, c.r_squared),
                    ));
                }
                csv_header(w, "phase sweep", &meta, "phase_deg,true_sz,mean_counts")?;
                for ((ph, s), c) in p.phases.iter().zip(&p.true_sz).zip(&p.mean_counts) {
                    writeln!(w, "{:.6},{:e},{:e}", ph.to_degrees(), s, c)?;
                }
                Ok(())
            })?;
            written.push(path);
            if svg {
                let f = p.fit_true_sz;
                let pts = p.phases.iter().zip(&p.true_sz).map(|(ph, s)| (ph.to_degrees(), *s)).collect();
                let curve = (0..=360).map(|d| (d as f64, f.eval((d as f64).to_radians()))).collect();
                let plot = Plot::new("response against signal phase", "signal phase (deg)", "⟨S_z⟩")
                    .with("simulated", pts, Style::Markers)
                    .with(&format!("fit, R² = {:.4}", f.r_squared), curve, Style::Line);
                let path = out_dir.join("phase_sweep.svg");
                write_text(&path, &plot.render())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------- describe

pub fn describe(cfg: &RunConfig) -> CliResult<String> {
    let mut s = String::new();
    let _ = writeln!(s, "protocol {}", cfg.protocol.name());
    let _ = writeln!(s, "spin transition {:.6} MHz", cfg.sensor.frequency_mhz);
    match cfg.protocol {
        Protocol::Odmr => {
            let o = cfg.scan.odmr.as_ref().expect("validated");
            let _ = writeln!(
                s,
                "probe Ω1/2π = {} kHz for {:.3} us, x = {}, {} points per ω_rf over ±{} ω_rf",
                o.probe_rabi_khz,
                o.probe_duration() * 1e6,
                o.modulation_index,
                o.steps_per_rf,
                o.span_rf_multiples
            );
            for f in &o.rf_frequencies_mhz {
                let _ = writeln!(s, "  rf {f} MHz: {} probe frequencies", o.grid(0.0, f * 1e6).len());
            }
            return Ok(s);
        }
        Protocol::Rabi => {
            let r = cfg.scan.rabi.as_ref().expect("validated");
            let _ = writeln!(
                s,
                "rf {} MHz, x = {}, Ω1/2π = {} kHz, sidebands {:?}, {} durations up to {} us, {:?} integration",
                r.rf_frequency_mhz, r.modulation_index, r.probe_rabi_khz, r.sidebands, r.points, r.duration_us, r.method
            );
            return Ok(s);
        }
        _ => {}
    }
    let exp = cfg.experiment(None)?;
    let t = exp.sampling_interval();
    let _ = writeln!(s, "reference {:.6} MHz, phase {:.2}°", exp.reference.frequency_hz * 1e-6, exp.reference.phase.to_degrees());
    for (i, tone) in exp.tones.iter().enumerate() {
        let _ = writeln!(
            s,
            "tone {i}: Ω/2π = {:.4} kHz, offset {:.4} Hz, phase {:.2}°, phase advance per shot {:.4}°",
            tone.rabi_amplitude / TAU * 1e-3,
            (tone.frequency_hz - exp.reference.frequency_hz),
            tone.initial_phase.to_degrees(),
            ((tone.frequency_hz - exp.reference.frequency_hz) * t).rem_euclid(1.0) * 360.0,
        );
    }
    s.push_str(&exp.sequence.describe());
    let _ = writeln!(s, "sampling frequency {:.4} Hz", 1.0 / t);
    if let Some(n) = cfg.shots {
        let _ = writeln!(s, "M = {n}, record length {:.6} s", n as f64 * t);
    }
    let (_, sense) = exp.sequence.sense();
    for tone in &exp.tones {
        let angle = tone.rabi_amplitude * sense.duration;
        if sense.cpmg.is_none() && sense.rf.is_none() && angle >= 0.1 {
            let _ = writeln!(s, "note: Ω·t = {angle:.3} rad, outside the small-angle regime");
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------- sidebands

#[derive(Clone, Debug)]
pub struct SidebandTable {
    pub rf_frequency_hz: f64,
    pub modulation_index: f64,
    pub spin_frequency_hz: f64,
    pub rows: Vec<Sideband>,
}

impl SidebandTable {
    pub fn text(&self) -> String {
        let mut s = format!(
            "rf {:.6} MHz, x = {:.6}\n{:>4}  {:>16}  {:>12}\n",
            self.rf_frequency_hz * 1e-6,
            self.modulation_index,
            "k",
            "frequency_mhz",
            "J_k(x)"
        );
        for r in &self.rows {
            let _ = writeln!(s, "{:>4}  {:>16.6}  {:>12.8}", r.k, r.frequency / TAU * 1e-6, r.strength);
        }
        s
    }
}

/// Sideband table for the RF drive of the config: the sequence RF block,
/// else the ODMR scan's first RF frequency, else the Rabi scan.
pub fn sideband_table(cfg: &RunConfig, max_order: i32) -> CliResult<SidebandTable> {
    let (omega_rf, x, phase) = if let Some(rf) = cfg.rf()? {
        (rf.omega_rf, rf.modulation_index(), rf.phase)
    } else if let Some(o) = &cfg.scan.odmr {
        (TAU * o.rf_frequencies_mhz[0] * 1e6, o.modulation_index, o.rf_phase_deg.to_radians())
    } else if let Some(r) = &cfg.scan.rabi {
        (TAU * r.rf_frequency_mhz * 1e6, r.modulation_index, r.rf_phase_deg.to_radians())
    } else {
        return Err(CliError::schema("sequence.rf", "no RF drive in this config"));
    };
    let d = FloquetDressing::with_phase(omega_rf, x * omega_rf, phase).map_err(|e| CliError::from_core("rf", e))?;
    let omega_s = TAU * cfg.spin_frequency_hz();
    let rows = sidebands(&d, omega_s, -max_order..=max_order).map_err(|e| CliError::from_core("rf", e))?;
    Ok(SidebandTable { rf_frequency_hz: omega_rf / TAU, modulation_index: x, spin_frequency_hz: cfg.spin_frequency_hz(), rows })
}

pub fn write_sidebands(table: &SidebandTable, out_dir: &Path) -> CliResult<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join("sidebands.csv");
    write_csv(&path, |w| {
        let meta = [
            ("rf_frequency_hz", format!("{}", table.rf_frequency_hz)),
            ("modulation_index", format!("{}", table.modulation_index)),
            ("spin_frequency_hz", format!("{}", table.spin_frequency_hz)),
        ];
        csv_header(w, "sidebands", &meta, "k,frequency_hz,strength")?;
        for r in &table.rows {
            writeln!(w, "{},{:.6},{:.12e}", r.k, r.frequency / TAU, r.strength)?;
        }
        Ok(())
    })?;
    Ok(path)
}
