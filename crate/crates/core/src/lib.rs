//! Simulation of heterodyne microwave sensing with a single two-level spin.
//!
//! A shot prepares a superposition with a coherent reference pulse, lets a
//! weak signal rotate it for a short sensing window and reads the population
//! out. Because the signal keeps its phase between shots, a long series of
//! shots samples `sin(δω·n·T + δφ)` and its autocorrelation spectrum resolves
//! `δω` to `1/(N·T)`, far below the sensor lifetime.
//!
//! Modules, bottom up:
//!
//! - [`dynamics`]: states, propagators, the lab-frame oracle and decay.
//! - [`signals`]: tones, the reference and exact per-shot phase bookkeeping.
//! - [`sequences`]: per-shot pulse programs for the three protocols.
//! - [`dressed`]: Bessel functions, Floquet and Mollow dressed frames.
//! - [`experiment`]: the shot engine, readout and scan drivers.
//! - [`analysis`]: autocorrelation, spectra and peak fits.

pub mod analysis;
pub mod dressed;
pub mod dynamics;
mod error;
pub mod experiment;
pub mod sequences;
pub mod signals;

pub use error::{Error, Result};
