//! Shot series with coherent phase tracking, photon readout, and scan drivers.

mod cpmg;
mod engine;
mod readout;
mod record;
mod scans;

pub use cpmg::{cpmg_phase_pickup, cpmg_pickup_law, max_cpmg_phase_pickup};
pub use engine::{Experiment, RfTerm, SenseDrive, DEFAULT_MAX_PHASE_STEP};
pub use readout::{shot_rng, ReadoutMode, ReadoutModel};
pub use record::{MeasurementRecord, RECORD_MAGIC, RECORD_VERSION};
pub use scans::{odmr_scan, phase_sweep, rabi_scan, OdmrSpectrum, PhaseSweep, RabiMethod, RabiTrace};
