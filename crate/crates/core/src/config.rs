//! Run configuration, loadable from TOML. Every field is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::{PnlmsParams, DEFAULT_REGULARIZATION, DEFAULT_TAPS};
use crate::controller::ControlConfig;
use crate::error::{Error, Result};
use crate::filterbank::{FilterbankConfig, DEFAULT_BANDS, DEFAULT_HOP};
use crate::sim::scenario::SAMPLE_RATE;
use crate::stats::{DEFAULT_STATS_BANDS, DEFAULT_TIME_CONSTANT_S};

pub const DEFAULT_TRUNCATE_S: f64 = 5.0;
/// Mic sub-band frames are delayed by this much so that the sub-band echo
/// path, which spreads over neighbouring frames, is causal for the filters.
pub const DEFAULT_MIC_DELAY_FRAMES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sample_rate: u32,
    /// Hop size in samples.
    pub frame: usize,
    pub bands: usize,
    pub prototype_len: usize,
    pub stats_bands: usize,
    pub taps: usize,
    pub regularization: f64,
    pub pnlms_rho: f64,
    pub pnlms_delta: f64,
    pub mic_delay_frames: usize,
    pub time_constant_s: f64,
    pub truncate_s: f64,
    pub seed: u64,
    pub control: ControlConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pnlms = PnlmsParams::default();
        Self {
            sample_rate: SAMPLE_RATE as u32,
            frame: DEFAULT_HOP,
            bands: DEFAULT_BANDS,
            prototype_len: 4 * DEFAULT_HOP,
            stats_bands: DEFAULT_STATS_BANDS,
            taps: DEFAULT_TAPS,
            regularization: DEFAULT_REGULARIZATION,
            pnlms_rho: pnlms.rho,
            pnlms_delta: pnlms.delta,
            mic_delay_frames: DEFAULT_MIC_DELAY_FRAMES,
            time_constant_s: DEFAULT_TIME_CONSTANT_S,
            truncate_s: DEFAULT_TRUNCATE_S,
            seed: 0,
            control: ControlConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig always serialises")
    }

    pub fn filterbank(&self) -> FilterbankConfig {
        FilterbankConfig {
            bands: self.bands,
            hop: self.frame,
            prototype_len: self.prototype_len,
        }
    }

    pub fn pnlms(&self) -> PnlmsParams {
        PnlmsParams {
            rho: self.pnlms_rho,
            delta: self.pnlms_delta,
        }
    }

    pub fn frame_period_s(&self) -> f64 {
        self.frame as f64 / self.sample_rate as f64
    }

    /// Number of leading frames dropped from the statistics.
    pub fn truncate_frames(&self) -> usize {
        (self.truncate_s * self.sample_rate as f64 / self.frame as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if self.stats_bands == 0 || self.stats_bands > self.bands {
            return Err(Error::config(format!(
                "statistics bands {} must be in 1..={}",
                self.stats_bands, self.bands
            )));
        }
        if self.taps == 0 {
            return Err(Error::config("filter length must be positive"));
        }
        if !(self.regularization > 0.0 && self.regularization.is_finite()) {
            return Err(Error::config("regularization must be positive"));
        }
        if !(self.pnlms_rho > 0.0 && self.pnlms_delta > 0.0) {
            return Err(Error::config("PNLMS rho and delta must be positive"));
        }
        if !(self.truncate_s >= 0.0 && self.truncate_s.is_finite()) {
            return Err(Error::config("truncation must be non-negative"));
        }
        if !(self.time_constant_s > 0.0) {
            return Err(Error::config("time constant must be positive"));
        }
        self.control.validate()?;
        // checks bands, hop and prototype length
        crate::filterbank::Prototype::new(self.filterbank()).map(|_| ())
    }
}
