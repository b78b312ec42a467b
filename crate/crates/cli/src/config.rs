//! Run configuration: a TOML file whose keys carry their units.

use std::f64::consts::TAU;
use std::path::Path;

use hetsense::analysis::{Channel, Normalization, SpectrumOptions, Window};
use hetsense::dynamics::DecayParams;
use hetsense::experiment::{Experiment, ReadoutMode as CoreReadoutMode, ReadoutModel};
use hetsense::sequences::{
    build_cpmg_heterodyne, build_floquet_heterodyne, build_plain_heterodyne, CpmgSpec, PulsePhaseConvention,
    PulseSequence, RfDriveSpec, ShotTiming,
};
use hetsense::signals::{ReferenceSpec, ToneSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Plain,
    Cpmg,
    Floquet,
    Odmr,
    Rabi,
    PhaseSweep,
}

impl Protocol {
    /// Protocols that produce a shot record.
    pub fn is_series(self) -> bool {
        matches!(self, Protocol::Plain | Protocol::Cpmg | Protocol::Floquet)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Plain => "plain",
            Protocol::Cpmg => "cpmg",
            Protocol::Floquet => "floquet",
            Protocol::Odmr => "odmr",
            Protocol::Rabi => "rabi",
            Protocol::PhaseSweep => "phase-sweep",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub protocol: Protocol,
    #[serde(default)]
    pub seed: u64,
    /// M
    pub shots: Option<u64>,
    pub sensor: SensorConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub tones: Vec<ToneConfig>,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub readout: ReadoutConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// ω_s/2π
    pub frequency_mhz: f64,
    /// Lifetimes; decay is off when absent.
    pub decay: Option<DecayConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub t1_ms: f64,
    pub t2_star_us: f64,
    pub t2_us: f64,
    pub t1_rho_ms: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Defaults to the sensor frequency.
    pub frequency_mhz: Option<f64>,
    #[serde(default)]
    pub phase_deg: f64,
    /// 0 for an instantaneous pulse.
    #[serde(default)]
    pub pi_half_ns: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    /// Ω/2π
    pub rabi_khz: f64,
    /// Offset from the reference. Give this or `frequency_mhz`.
    pub offset_hz: Option<f64>,
    pub frequency_mhz: Option<f64>,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    /// Sensing window for the plain and Floquet protocols.
    pub sensing_ns: Option<f64>,
    #[serde(default = "default_laser_init")]
    pub laser_init_us: f64,
    #[serde(default = "default_readout")]
    pub readout_us: f64,
    /// Idle time after readout. Give this or `sampling_interval_us`.
    pub dead_time_us: Option<f64>,
    /// Fixes T; the dead time absorbs the difference.
    pub sampling_interval_us: Option<f64>,
    pub cpmg: Option<CpmgConfig>,
    pub rf: Option<RfConfig>,
}

fn default_laser_init() -> f64 {
    1.0
}

fn default_readout() -> f64 {
    0.5
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            sensing_ns: None,
            laser_init_us: default_laser_init(),
            readout_us: default_readout(),
            dead_time_us: None,
            sampling_interval_us: None,
            cpmg: None,
            rf: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Cpmg,
    Cp,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpmgConfig {
    pub tau_us: f64,
    pub pulses: u32,
    #[serde(default)]
    pub convention: Convention,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfConfig {
    /// ω_rf/2π
    pub frequency_mhz: f64,
    /// Ω_rf/2π. Give this or `modulation_index`.
    pub amplitude_mhz: Option<f64>,
    pub modulation_index: Option<f64>,
    #[serde(default)]
    pub phase_deg: f64,
    /// Added to the RF phase every shot.
    #[serde(default)]
    pub phase_step_deg: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutModeConfig {
    #[default]
    Poisson,
    SingleShot,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    #[serde(default = "default_mean_photons")]
    pub mean_photons: f64,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default)]
    pub mode: ReadoutModeConfig,
}

fn default_mean_photons() -> f64 {
    0.1
}

fn default_contrast() -> f64 {
    0.3
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self { mean_photons: default_mean_photons(), contrast: default_contrast(), mode: ReadoutModeConfig::Poisson }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelConfig {
    #[default]
    Counts,
    TrueSz,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowConfig {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationConfig {
    #[default]
    Unbiased,
    RawSum,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub channel: ChannelConfig,
    /// N; defaults to half the record.
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub normalization: NormalizationConfig,
    /// Peak search range; defaults to the whole spectrum above DC.
    pub search_low_hz: Option<f64>,
    pub search_high_hz: Option<f64>,
    #[serde(default = "default_peaks")]
    pub peaks: usize,
    /// Defaults to 4 Fourier bins.
    pub min_separation_hz: Option<f64>,
    /// Correlation lengths (lags) for the linewidth table.
    #[serde(default)]
    pub lengths: Vec<usize>,
}

fn default_oversample() -> usize {
    8
}

fn default_peaks() -> usize {
    1
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::Counts,
            max_lag: None,
            window: WindowConfig::Rectangular,
            oversample: default_oversample(),
            normalization: NormalizationConfig::Unbiased,
            search_low_hz: None,
            search_high_hz: None,
            peaks: default_peaks(),
            min_separation_hz: None,
            lengths: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn channel(&self) -> Channel {
        match self.channel {
            ChannelConfig::Counts => Channel::Counts,
            ChannelConfig::TrueSz => Channel::TrueSz,
        }
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            window: match self.window {
                WindowConfig::Rectangular => Window::Rectangular,
                WindowConfig::Hann => Window::Hann,
            },
            oversample: self.oversample,
            normalization: match self.normalization {
                NormalizationConfig::Unbiased => Normalization::Unbiased,
                NormalizationConfig::RawSum => Normalization::RawSum,
            },
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.oversample == 0 {
            return Err(CliError::schema("analysis.oversample", "must be at least 1"));
        }
        if self.max_lag == Some(0) {
            return Err(CliError::schema("analysis.max_lag", "must be at least 1"));
        }
        if self.peaks == 0 {
            return Err(CliError::schema("analysis.peaks", "must be at least 1"));
        }
        if let (Some(lo), Some(hi)) = (self.search_low_hz, self.search_high_hz) {
            if !(lo < hi) {
                return Err(CliError::schema("analysis.search_high_hz", "must exceed search_low_hz"));
            }
        }
        if self.lengths.contains(&0) {
            return Err(CliError::schema("analysis.lengths", "lengths must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub odmr: Option<OdmrScanConfig>,
    pub rabi: Option<RabiScanConfig>,
    pub phase_sweep: Option<PhaseSweepConfig>,
}

/// One ODMR trace per RF frequency at a fixed modulation index.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdmrScanConfig {
    pub rf_frequencies_mhz: Vec<f64>,
    pub modulation_index: f64,
    #[serde(default)]
    pub rf_phase_deg: f64,
    /// Ω1/2π of the probe
    pub probe_rabi_khz: f64,
    /// Defaults to a bare π pulse, `1/(2·Ω1/2π)`.
    pub probe_duration_us: Option<f64>,
    /// Half-width of the scan in units of ω_rf.
    #[serde(default = "default_span")]
    pub span_rf_multiples: f64,
    /// Grid points per ω_rf.
    #[serde(default = "default_steps_per_rf")]
    pub steps_per_rf: u32,
}

fn default_span() -> f64 {
    3.5
}

fn default_steps_per_rf() -> u32 {
    20
}

impl OdmrScanConfig {
    pub fn probe_duration(&self) -> f64 {
        self.probe_duration_us.map_or(0.5 / (self.probe_rabi_khz * 1e3), |d| d * 1e-6)
    }

    /// Probe grid in Hz around `spin_hz` for one RF frequency.
    pub fn grid(&self, spin_hz: f64, rf_hz: f64) -> Vec<f64> {
        let half = (self.span_rf_multiples * self.steps_per_rf as f64).round() as i64;
        (-half..=half).map(|j| spin_hz + rf_hz * j as f64 / self.steps_per_rf as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiMethodConfig {
    #[default]
    Lab,
    Effective,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiScanConfig {
    pub rf_frequency_mhz: f64,
    pub modulation_index: f64,
    #[serde(default)]
    pub rf_phase_deg: f64,
    pub probe_rabi_khz: f64,
    pub sidebands: Vec<i32>,
    pub duration_us: f64,
    pub points: usize,
    #[serde(default)]
    pub method: RabiMethodConfig,
    /// Spin frequency used by lab-frame integration.
    #[serde(default = "default_lab_spin")]
    pub lab_spin_frequency_mhz: f64,
    #[serde(default = "default_lab_dt")]
    pub lab_dt_ns: f64,
}

fn default_lab_spin() -> f64 {
    50.0
}

fn default_lab_dt() -> f64 {
    0.5
}

impl RabiScanConfig {
    pub fn durations(&self) -> Vec<f64> {
        let end = self.duration_us * 1e-6;
        (0..self.points).map(|j| end * j as f64 / (self.points - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSweepConfig {
    #[serde(default = "default_phase_points")]
    pub points: usize,
    #[serde(default = "default_shots_per_point")]
    pub shots_per_point: u64,
    /// Which tone's phase is swept.
    #[serde(default)]
    pub tone: usize,
    /// Shot whose reference and RF phases are used at every point.
    #[serde(default)]
    pub shot_index: u64,
}

fn default_phase_points() -> usize {
    24
}

fn default_shots_per_point() -> u64 {
    10_000
}

impl PhaseSweepConfig {
    pub fn phases(&self) -> Vec<f64> {
        (0..self.points).map(|j| TAU * j as f64 / self.points as f64).collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_record")]
    pub record: String,
    /// Also write the record as CSV.
    #[serde(default)]
    pub csv: bool,
}

fn default_record() -> String {
    "record.bin".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { record: default_record(), csv: false }
    }
}

fn positive(path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(path, format!("must be finite and ≥ 0, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(path, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    /// Parse and validate. Errors name the offending key.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| CliError::schema("<file>", e.to_string().trim_end()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().message().trim_end().to_string();
            CliError::schema(if path == "." { "<root>".to_string() } else { path }, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::schema(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        positive("sensor.frequency_mhz", self.sensor.frequency_mhz)?;
        if let Some(d) = &self.sensor.decay {
            positive("sensor.decay.t1_ms", d.t1_ms)?;
            positive("sensor.decay.t2_star_us", d.t2_star_us)?;
            positive("sensor.decay.t2_us", d.t2_us)?;
            positive("sensor.decay.t1_rho_ms", d.t1_rho_ms)?;
        }
        if let Some(f) = self.reference.frequency_mhz {
            positive("reference.frequency_mhz", f)?;
        }
        finite("reference.phase_deg", self.reference.phase_deg)?;
        non_negative("reference.pi_half_ns", self.reference.pi_half_ns)?;
        for (i, t) in self.tones.iter().enumerate() {
            non_negative(&format!("tones[{i}].rabi_khz"), t.rabi_khz)?;
            finite(&format!("tones[{i}].phase_deg"), t.phase_deg)?;
            match (t.offset_hz, t.frequency_mhz) {
                (Some(v), None) => finite(&format!("tones[{i}].offset_hz"), v)?,
                (None, Some(v)) => positive(&format!("tones[{i}].frequency_mhz"), v)?,
                _ => {
                    return Err(CliError::schema(
                        format!("tones[{i}]"),
                        "give exactly one of offset_hz and frequency_mhz",
                    ))
                }
            }
        }
        self.validate_sequence()?;
        non_negative("readout.mean_photons", self.readout.mean_photons)?;
        if !(0.0..=1.0).contains(&self.readout.contrast) {
            return Err(CliError::schema("readout.contrast", format!("must lie in [0, 1], got {}", self.readout.contrast)));
        }
        self.analysis.validate()?;
        if self.protocol.is_series() {
            match self.shots {
                None => return Err(CliError::schema("shots", "required for protocol ".to_string() + self.protocol.name())),
                Some(0) => return Err(CliError::schema("shots", "must be at least 1")),
                Some(_) => {}
            }
        }
        self.validate_scan()
    }

    fn validate_sequence(&self) -> CliResult<()> {
        let s = &self.sequence;
        if let Some(v) = s.sensing_ns {
            non_negative("sequence.sensing_ns", v)?;
        }
        non_negative("sequence.laser_init_us", s.laser_init_us)?;
        non_negative("sequence.readout_us", s.readout_us)?;
        match (s.dead_time_us, s.sampling_interval_us) {
            (Some(_), Some(_)) => {
                return Err(CliError::schema("sequence", "give at most one of dead_time_us and sampling_interval_us"))
            }
            (Some(v), None) => non_negative("sequence.dead_time_us", v)?,
            (None, Some(v)) => positive("sequence.sampling_interval_us", v)?,
            (None, None) => {}
        }
        if let Some(c) = &s.cpmg {
            positive("sequence.cpmg.tau_us", c.tau_us)?;
            if c.pulses == 0 {
                return Err(CliError::schema("sequence.cpmg.pulses", "must be at least 1"));
            }
        }
        if let Some(rf) = &s.rf {
            positive("sequence.rf.frequency_mhz", rf.frequency_mhz)?;
            finite("sequence.rf.phase_deg", rf.phase_deg)?;
            finite("sequence.rf.phase_step_deg", rf.phase_step_deg)?;
            match (rf.amplitude_mhz, rf.modulation_index) {
                (Some(v), None) => non_negative("sequence.rf.amplitude_mhz", v)?,
                (None, Some(v)) => non_negative("sequence.rf.modulation_index", v)?,
                _ => {
                    return Err(CliError::schema(
                        "sequence.rf",
                        "give exactly one of amplitude_mhz and modulation_index",
                    ))
                }
            }
        }
        let need = |key: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(CliError::schema(format!("sequence.{key}"), format!("required for protocol {}", self.protocol.name())))
            }
        };
        let forbid = |key: &str, present: bool| {
            if present {
                Err(CliError::schema(format!("sequence.{key}"), format!("not used by protocol {}", self.protocol.name())))
            } else {
                Ok(())
            }
        };
        match self.protocol {
            Protocol::Plain => {
                need("sensing_ns", s.sensing_ns.is_some())?;
                forbid("cpmg", s.cpmg.is_some())?;
                forbid("rf", s.rf.is_some())
            }
            Protocol::Cpmg => {
                need("cpmg", s.cpmg.is_some())?;
                forbid("sensing_ns", s.sensing_ns.is_some())?;
                forbid("rf", s.rf.is_some())
            }
            Protocol::Floquet => {
                need("rf", s.rf.is_some())?;
                need("sensing_ns", s.sensing_ns.is_some())?;
                forbid("cpmg", s.cpmg.is_some())
            }
            Protocol::PhaseSweep => {
                if s.cpmg.is_some() && s.rf.is_some() {
                    return Err(CliError::schema("sequence", "cpmg and rf cannot be combined"));
                }
                need("sensing_ns", s.sensing_ns.is_some() || s.cpmg.is_some())
            }
            Protocol::Odmr | Protocol::Rabi => Ok(()),
        }
    }

    fn validate_scan(&self) -> CliResult<()> {
        match self.protocol {
            Protocol::Odmr => {
                let o = self
                    .scan
                    .odmr
                    .as_ref()
                    .ok_or_else(|| CliError::schema("scan.odmr", "required for protocol odmr"))?;
                if o.rf_frequencies_mhz.is_empty() {
                    return Err(CliError::schema("scan.odmr.rf_frequencies_mhz", "must not be empty"));
                }
                for (i, &f) in o.rf_frequencies_mhz.iter().enumerate() {
                    positive(&format!("scan.odmr.rf_frequencies_mhz[{i}]"), f)?;
                }
                non_negative("scan.odmr.modulation_index", o.modulation_index)?;
                finite("scan.odmr.rf_phase_deg", o.rf_phase_deg)?;
                positive("scan.odmr.probe_rabi_khz", o.probe_rabi_khz)?;
                if let Some(d) = o.probe_duration_us {
                    positive("scan.odmr.probe_duration_us", d)?;
                }
                positive("scan.odmr.span_rf_multiples", o.span_rf_multiples)?;
                if o.steps_per_rf == 0 {
                    return Err(CliError::schema("scan.odmr.steps_per_rf", "must be at least 1"));
                }
            }
            Protocol::Rabi => {
                let r = self
                    .scan
                    .rabi
                    .as_ref()
                    .ok_or_else(|| CliError::schema("scan.rabi", "required for protocol rabi"))?;
                positive("scan.rabi.rf_frequency_mhz", r.rf_frequency_mhz)?;
                non_negative("scan.rabi.modulation_index", r.modulation_index)?;
                finite("scan.rabi.rf_phase_deg", r.rf_phase_deg)?;
                positive("scan.rabi.probe_rabi_khz", r.probe_rabi_khz)?;
                positive("scan.rabi.duration_us", r.duration_us)?;
                positive("scan.rabi.lab_spin_frequency_mhz", r.lab_spin_frequency_mhz)?;
                positive("scan.rabi.lab_dt_ns", r.lab_dt_ns)?;
                if r.points < 4 {
                    return Err(CliError::schema("scan.rabi.points", "need at least 4"));
                }
                if r.sidebands.is_empty() {
                    return Err(CliError::schema("scan.rabi.sidebands", "must not be empty"));
                }
            }
            Protocol::PhaseSweep => {
                let p = self
                    .scan
                    .phase_sweep
                    .as_ref()
                    .ok_or_else(|| CliError::schema("scan.phase_sweep", "required for protocol phase-sweep"))?;
                if p.points < 4 {
                    return Err(CliError::schema("scan.phase_sweep.points", "need at least 4"));
                }
                if p.tone >= self.tones.len() {
                    return Err(CliError::schema(
                        "scan.phase_sweep.tone",
                        format!("no tone {} among {} tones", p.tone, self.tones.len()),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn spin_frequency_hz(&self) -> f64 {
        self.sensor.frequency_mhz * 1e6
    }

    pub fn reference(&self) -> CliResult<ReferenceSpec> {
        let f = self.reference.frequency_mhz.unwrap_or(self.sensor.frequency_mhz) * 1e6;
        let phase = self.reference.phase_deg.to_radians();
        ReferenceSpec::new(f, phase, self.reference.pi_half_ns * 1e-9).map_err(|e| CliError::from_core("reference", e))
    }

    pub fn tones(&self, reference: &ReferenceSpec) -> CliResult<Vec<ToneSpec>> {
        self.tones
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let f = match (t.offset_hz, t.frequency_mhz) {
                    (Some(off), _) => reference.frequency_hz + off,
                    (_, Some(mhz)) => mhz * 1e6,
                    _ => unreachable!("validated"),
                };
                ToneSpec::new(TAU * t.rabi_khz * 1e3, f, t.phase_deg.to_radians())
                    .map_err(|e| CliError::from_core(&format!("tones[{i}]"), e))
            })
            .collect()
    }

    pub fn decay(&self) -> CliResult<DecayParams> {
        match &self.sensor.decay {
            None => Ok(DecayParams::disabled()),
            Some(d) => DecayParams::enabled(d.t1_ms * 1e-3, d.t2_star_us * 1e-6, d.t2_us * 1e-6, d.t1_rho_ms * 1e-3)
                .map_err(|e| CliError::from_core("sensor.decay", e)),
        }
    }

    /// Readout with the seed, or `seed` when given.
    pub fn readout(&self, seed: Option<u64>) -> CliResult<ReadoutModel> {
        let seed = seed.unwrap_or(self.seed);
        match self.readout.mode {
            ReadoutModeConfig::Poisson => ReadoutModel::new(self.readout.mean_photons, self.readout.contrast, seed)
                .map_err(|e| CliError::from_core("readout", e)),
            ReadoutModeConfig::SingleShot => {
                let mut r = ReadoutModel::single_shot(seed);
                r.mode = CoreReadoutMode::SingleShot;
                Ok(r)
            }
        }
    }

    pub fn rf(&self) -> CliResult<Option<RfDriveSpec>> {
        let Some(rf) = &self.sequence.rf else { return Ok(None) };
        let omega = TAU * rf.frequency_mhz * 1e6;
        let amplitude = match (rf.amplitude_mhz, rf.modulation_index) {
            (Some(a), _) => TAU * a * 1e6,
            (_, Some(x)) => x * omega,
            _ => unreachable!("validated"),
        };
        RfDriveSpec::new(omega, amplitude, rf.phase_deg.to_radians(), rf.phase_step_deg.to_radians())
            .map(Some)
            .map_err(|e| CliError::from_core("sequence.rf", e))
    }

    pub fn timing(&self) -> ShotTiming {
        ShotTiming {
            laser_init: self.sequence.laser_init_us * 1e-6,
            readout: self.sequence.readout_us * 1e-6,
            dead_time: self.sequence.dead_time_us.unwrap_or(0.0) * 1e-6,
        }
    }

    pub fn sequence(&self, reference: &ReferenceSpec) -> CliResult<PulseSequence> {
        let s = &self.sequence;
        let timing = self.timing();
        let sensing = s.sensing_ns.map(|v| v * 1e-9);
        let seq = if let Some(c) = &s.cpmg {
            let convention = match c.convention {
                Convention::Cpmg => PulsePhaseConvention::Cpmg,
                Convention::Cp => PulsePhaseConvention::Cp,
            };
            let spec = CpmgSpec::new(c.tau_us * 1e-6, c.pulses, convention)
                .map_err(|e| CliError::from_core("sequence.cpmg", e))?;
            build_cpmg_heterodyne(&spec, reference, &timing).map_err(|e| CliError::from_core("sequence.cpmg", e))?
        } else if let Some(rf) = self.rf()? {
            build_floquet_heterodyne(&rf, sensing.unwrap_or(0.0), reference, &timing)
                .map_err(|e| CliError::from_core("sequence", e))?
        } else {
            let Some(sensing) = sensing else {
                return Err(CliError::schema("sequence.sensing_ns", "required"));
            };
            build_plain_heterodyne(sensing, reference, &timing).map_err(|e| CliError::from_core("sequence", e))?
        };
        match s.sampling_interval_us {
            Some(t) => seq
                .with_sampling_interval(t * 1e-6)
                .map_err(|e| CliError::from_core("sequence.sampling_interval_us", e)),
            None => Ok(seq),
        }
    }

    /// The shot experiment described by the file.
    pub fn experiment(&self, seed: Option<u64>) -> CliResult<Experiment> {
        if !(self.protocol.is_series() || self.protocol == Protocol::PhaseSweep) {
            return Err(CliError::Usage(format!("protocol {} has no shot series", self.protocol.name())));
        }
        let reference = self.reference()?;
        let tones = self.tones(&reference)?;
        let sequence = self.sequence(&reference)?;
        Experiment::new(self.spin_frequency_hz(), reference, tones, sequence, self.decay()?, self.readout(seed)?)
            .map_err(|e| CliError::from_core("<root>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAIN: &str = r#"
schema_version = 1
protocol = "plain"
seed = 3
shots = 100

[sensor]
frequency_mhz = 4139.4

[[tones]]
rabi_khz = 3600
offset_hz = 50138

[sequence]
sensing_ns = 34.2
sampling_interval_us = 1.824
"#;

    #[test]
    fn plain_config_builds_experiment() {
        let cfg = RunConfig::from_toml(PLAIN).unwrap();
        let exp = cfg.experiment(None).unwrap();
        assert!((exp.sampling_interval() - 1.824e-6).abs() < 1e-18);
        assert_eq!(exp.readout.rng_seed, 3);
        assert!((exp.tones[0].frequency_hz - exp.reference.frequency_hz - 50138.0).abs() < 1e-5);
        assert_eq!(cfg.experiment(Some(9)).unwrap().readout.rng_seed, 9);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let text = PLAIN.replace("sensing_ns = 34.2", "sensing_ns = 34.2\nsensing_us = 1");
        match RunConfig::from_toml(&text) {
            Err(CliError::Schema { path, message }) => {
                assert!(path.starts_with("sequence"), "{path}");
                assert!(message.contains("sensing_us"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_shots_rejected() {
        let text = PLAIN.replace("shots = 100", "shots = 0");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Schema { path, .. }) if path == "shots"));
    }

    #[test]
    fn wrong_type_names_its_path() {
        let text = PLAIN.replace("rabi_khz = 3600", "rabi_khz = \"fast\"");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Schema { path, .. }) if path == "tones[0].rabi_khz"));
    }

    #[test]
    fn tone_needs_one_frequency() {
        let text = PLAIN.replace("offset_hz = 50138", "offset_hz = 50138\nfrequency_mhz = 4139.45");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Schema { path, .. }) if path == "tones[0]"));
    }

    #[test]
    fn future_schema_rejected() {
        let text = PLAIN.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Schema { path, .. }) if path == "schema_version"));
    }

    #[test]
    fn sampling_interval_shorter_than_shot_rejected() {
        let text = PLAIN.replace("sampling_interval_us = 1.824", "sampling_interval_us = 1.0");
        assert!(matches!(RunConfig::from_toml(&text).unwrap().experiment(None), Err(CliError::Schema { .. })));
    }

    #[test]
    fn odmr_grid_is_centered() {
        let o = OdmrScanConfig {
            rf_frequencies_mhz: vec![1.0],
            modulation_index: 1.5,
            rf_phase_deg: 0.0,
            probe_rabi_khz: 20.0,
            probe_duration_us: None,
            span_rf_multiples: 3.5,
            steps_per_rf: 20,
        };
        let g = o.grid(100.0, 1e6);
        assert_eq!(g.len(), 141);
        assert_eq!(g[70], 100.0);
        assert!((o.probe_duration() - 25e-6).abs() < 1e-18);
    }
}
