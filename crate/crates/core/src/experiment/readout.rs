use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};

/// How a shot's spin state turns into a recorded number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// Poisson photon counts with a state-dependent mean.
    #[default]
    Poisson,
    /// Projective outcome: 1 for `|0⟩`, 0 for `|−1⟩`.
    SingleShot,
}

/// Photon readout: mean counts `n̄·(1 + C·2⟨S_z⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReadoutModel {
    pub mean_photons: f64,
    pub contrast: f64,
    pub rng_seed: u64,
    pub mode: ReadoutMode,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self { mean_photons: 0.1, contrast: 0.3, rng_seed: 0, mode: ReadoutMode::Poisson }
    }
}

impl ReadoutModel {
    pub fn new(mean_photons: f64, contrast: f64, rng_seed: u64) -> Result<Self> {
        let m = Self { mean_photons, contrast, rng_seed, mode: ReadoutMode::Poisson };
        m.validate()?;
        Ok(m)
    }

    pub fn single_shot(rng_seed: u64) -> Self {
        Self { mean_photons: 1.0, contrast: 1.0, rng_seed, mode: ReadoutMode::SingleShot }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons >= 0.0) || !self.mean_photons.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mean photon number must be finite and ≥ 0, got {}",
                self.mean_photons
            )));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::InvalidArgument(format!(
                "contrast must lie in [0, 1], got {}",
                self.contrast
            )));
        }
        Ok(())
    }

    /// Mean counts for a given `⟨S_z⟩`; never negative for `|S_z| ≤ 1/2`.
    pub fn expected_counts(&self, sz: f64) -> f64 {
        match self.mode {
            ReadoutMode::Poisson => self.mean_photons * (1.0 + self.contrast * 2.0 * sz),
            ReadoutMode::SingleShot => (0.5 + sz).clamp(0.0, 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, sz: f64, rng: &mut R) -> u32 {
        let mean = self.expected_counts(sz).max(0.0);
        match self.mode {
            ReadoutMode::SingleShot => u32::from(rng.random::<f64>() < mean),
            ReadoutMode::Poisson if mean == 0.0 => 0,
            ReadoutMode::Poisson => {
                let d = Poisson::new(mean).expect("finite positive mean");
                d.sample(rng) as u32
            }
        }
    }
}

/// Independent stream for shot `n`: the seed picks the key, the shot index
/// picks the stream, so shots can be drawn in any order.
pub fn shot_rng(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}
