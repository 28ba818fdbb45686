//! Ensemble statistics over the lower sub-bands.
//!
//! Per frame, the fraction of bands whose output was the main residual, the
//! shadow residual or the microphone, plus the fraction of bands where a
//! coefficient copy fired into the main or into the shadow filter. The raw
//! vector is smoothed with a one-pole average.

use crate::controller::{BandOutcome, Selection};
use crate::error::{Error, Result};

pub const DEFAULT_STATS_BANDS: usize = 100;
pub const DEFAULT_TIME_CONSTANT_S: f64 = 0.2;
pub const STATS_CSV_HEADER: [&str; 6] = ["frame", "P_m", "P_s", "P_d", "U_m", "U_s"];
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatsVector {
    pub frame: u64,
    pub p_main: f64,
    pub p_shadow: f64,
    pub p_mic: f64,
    pub u_main: f64,
    pub u_shadow: f64,
}

impl StatsVector {
    pub const LEN: usize = 5;

    pub fn from_array(frame: u64, v: [f64; 5]) -> Self {
        Self {
            frame,
            p_main: v[0],
            p_shadow: v[1],
            p_mic: v[2],
            u_main: v[3],
            u_shadow: v[4],
        }
    }

    /// `[P_m, P_s, P_d, U_m, U_s]`
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.p_main,
            self.p_shadow,
            self.p_mic,
            self.u_main,
            self.u_shadow,
        ]
    }

    pub fn selection_sum(&self) -> f64 {
        self.p_main + self.p_shadow + self.p_mic
    }
}

/// Counts selections and copy events over the first `stats_bands` outcomes.
pub fn aggregate(frame: u64, outcomes: &[BandOutcome], stats_bands: usize) -> Result<StatsVector> {
    if stats_bands == 0 {
        return Err(Error::config("number of statistics bands must be positive"));
    }
    if outcomes.len() < stats_bands {
        return Err(Error::Size {
            expected: stats_bands,
            actual: outcomes.len(),
        });
    }
    let (mut main, mut shadow, mut mic, mut into_main, mut into_shadow) = (0u32, 0u32, 0u32, 0u32, 0u32);
    for o in &outcomes[..stats_bands] {
        match o.selected {
            Selection::Main => main += 1,
            Selection::Shadow => shadow += 1,
            Selection::Mic => mic += 1,
        }
        into_main += o.copied_into_main as u32;
        into_shadow += o.copied_into_shadow as u32;
    }
    let n = stats_bands as f64;
    Ok(StatsVector {
        frame,
        p_main: main as f64 / n,
        p_shadow: shadow as f64 / n,
        p_mic: mic as f64 / n,
        u_main: into_main as f64 / n,
        u_shadow: into_shadow as f64 / n,
    })
}

/// `exp(-frame_period / time_constant)`
pub fn alpha_from_time_constant(frame_period_s: f64, time_constant_s: f64) -> Result<f64> {
    if !(frame_period_s > 0.0) || !(time_constant_s > 0.0) {
        return Err(Error::config(format!(
            "frame period and time constant must be positive, got {frame_period_s} and {time_constant_s}"
        )));
    }
    Ok((-frame_period_s / time_constant_s).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoother {
    state: [f64; 5],
    alpha: f64,
    frame_period_s: f64,
    time_constant_s: f64,
}

impl Smoother {
    /// Uniform selection prior, no copies.
    pub const DEFAULT_SEED: [f64; 5] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];

    pub fn new(seed: [f64; 5], frame_period_s: f64, time_constant_s: f64) -> Result<Self> {
        if seed.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config(format!("smoother seed {seed:?} outside [0, 1]")));
        }
        let sum = seed[0] + seed[1] + seed[2];
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::config(format!(
                "smoother seed selection probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            state: seed,
            alpha: alpha_from_time_constant(frame_period_s, time_constant_s)?,
            frame_period_s,
            time_constant_s,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn frame_period_s(&self) -> f64 {
        self.frame_period_s
    }

    pub fn time_constant_s(&self) -> f64 {
        self.time_constant_s
    }

    pub fn current(&self) -> [f64; 5] {
        self.state
    }

    pub fn smooth(&mut self, raw: &StatsVector) -> StatsVector {
        let a = self.alpha;
        for (s, r) in self.state.iter_mut().zip(raw.to_array()) {
            *s = a * *s + (1.0 - a) * r;
        }
        StatsVector::from_array(raw.frame, self.state)
    }
}
