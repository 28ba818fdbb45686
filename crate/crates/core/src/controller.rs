//! Main/shadow hypothesis pair per sub-band.
//!
//! Every band runs an aggressive PNLMS main filter and a conservative
//! variable-step NLMS shadow filter on the same reference. Coefficients are
//! copied from the better filter into the worse one once it has been better
//! by the copy threshold for a number of consecutive frames, and the output
//! is whichever of the two residuals or the raw microphone has least power.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{vss_shadow_step, AdaptiveFilter, PnlmsParams, StepSize};
use crate::error::{Error, Result};
use crate::filterbank::SubbandFrame;

/// Floor applied to band powers before the copy comparison.
pub const POWER_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub copy_threshold_db: f64,
    /// Consecutive frames the shadow must win before it is copied into the main.
    pub shadow_to_main_holdover: u32,
    /// Consecutive frames the main must win before it is copied into the shadow.
    pub main_to_shadow_holdover: u32,
    pub mu_main: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            copy_threshold_db: 10.0,
            shadow_to_main_holdover: 2,
            main_to_shadow_holdover: 5,
            mu_main: 0.5,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.copy_threshold_db > 0.0 && self.copy_threshold_db.is_finite()) {
            return Err(Error::config(format!(
                "copy threshold must be positive, got {} dB",
                self.copy_threshold_db
            )));
        }
        if self.shadow_to_main_holdover == 0 || self.main_to_shadow_holdover == 0 {
            return Err(Error::config("holdover counts must be at least 1"));
        }
        StepSize::new(self.mu_main)?;
        Ok(())
    }

    fn threshold_ratio(&self) -> f64 {
        10f64.powf(self.copy_threshold_db / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selection {
    Main,
    Shadow,
    Mic,
}

/// Consecutive-frame counters for the copy heuristics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CopyCounters {
    pub shadow_better: u32,
    pub main_better: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CopyDecision {
    pub into_main: bool,
    pub into_shadow: bool,
}

/// Advances the holdover counters with this frame's residual powers.
pub fn update_copy_logic(
    p_main: f64,
    p_shadow: f64,
    counters: &mut CopyCounters,
    cfg: &ControlConfig,
) -> Result<CopyDecision> {
    if !(p_main >= 0.0) || !(p_shadow >= 0.0) {
        return Err(Error::input(format!(
            "residual powers must be non-negative, got main {p_main}, shadow {p_shadow}"
        )));
    }
    let ratio = cfg.threshold_ratio();
    let pm = p_main.max(POWER_FLOOR);
    let ps = p_shadow.max(POWER_FLOOR);

    counters.shadow_better = if pm >= ps * ratio {
        counters.shadow_better + 1
    } else {
        0
    };
    counters.main_better = if ps >= pm * ratio {
        counters.main_better + 1
    } else {
        0
    };

    let decision = CopyDecision {
        into_main: counters.shadow_better >= cfg.shadow_to_main_holdover,
        into_shadow: counters.main_better >= cfg.main_to_shadow_holdover,
    };
    if decision.into_main || decision.into_shadow {
        *counters = CopyCounters::default();
    }
    Ok(decision)
}

/// Minimum-power choice; ties go to Main, then Shadow, then Mic.
pub fn select_min_power(e_main: Complex64, e_shadow: Complex64, mic: Complex64) -> Selection {
    let (pm, ps, pd) = (e_main.norm_sqr(), e_shadow.norm_sqr(), mic.norm_sqr());
    if pm <= ps && pm <= pd {
        Selection::Main
    } else if ps <= pd {
        Selection::Shadow
    } else {
        Selection::Mic
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandOutcome {
    pub e_main: Complex64,
    pub e_shadow: Complex64,
    pub selected: Selection,
    pub copied_into_main: bool,
    pub copied_into_shadow: bool,
    /// The selected signal.
    pub residual: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandHypothesis {
    main: AdaptiveFilter,
    shadow: AdaptiveFilter,
    counters: CopyCounters,
}

impl BandHypothesis {
    pub fn new(taps: usize, regularization: f64, pnlms: PnlmsParams) -> Result<Self> {
        let shadow = AdaptiveFilter::new(taps, regularization)?;
        let main = shadow.clone().with_pnlms(pnlms);
        Ok(Self {
            main,
            shadow,
            counters: CopyCounters::default(),
        })
    }

    pub fn main(&self) -> &AdaptiveFilter {
        &self.main
    }

    pub fn shadow(&self) -> &AdaptiveFilter {
        &self.shadow
    }

    pub fn main_mut(&mut self) -> &mut AdaptiveFilter {
        &mut self.main
    }

    pub fn shadow_mut(&mut self) -> &mut AdaptiveFilter {
        &mut self.shadow
    }

    pub fn counters(&self) -> CopyCounters {
        self.counters
    }

    /// Processes one frame of this band.
    ///
    /// Order: predict both, compute residuals, run the copy heuristics, pick
    /// the minimum-power output, then adapt. A copied-into filter adapts on
    /// the residual of its new taps.
    pub fn step(&mut self, x: Complex64, d: Complex64, cfg: &ControlConfig) -> Result<BandOutcome> {
        if !x.is_finite() || !d.is_finite() {
            return Err(Error::input("non-finite band sample"));
        }
        let mu_main = StepSize::new(cfg.mu_main)?;

        let mut y_main = self.main.push_and_predict(x)?;
        let mut y_shadow = self.shadow.push_and_predict(x)?;
        let e_main = d - y_main;
        let e_shadow = d - y_shadow;

        let copy = update_copy_logic(
            e_main.norm_sqr(),
            e_shadow.norm_sqr(),
            &mut self.counters,
            cfg,
        )?;
        if copy.into_main {
            self.main.copy_taps_from(&self.shadow);
            y_main = y_shadow;
        } else if copy.into_shadow {
            self.shadow.copy_taps_from(&self.main);
            y_shadow = y_main;
        }

        let selected = select_min_power(e_main, e_shadow, d);
        let residual = match selected {
            Selection::Main => e_main,
            Selection::Shadow => e_shadow,
            Selection::Mic => d,
        };

        self.main.pnlms_update(d - y_main, mu_main)?;
        let e_adapt = d - y_shadow;
        self.shadow
            .nlms_update(e_adapt, vss_shadow_step(y_shadow, e_adapt))?;

        Ok(BandOutcome {
            e_main,
            e_shadow,
            selected,
            copied_into_main: copy.into_main,
            copied_into_shadow: copy.into_shadow,
            residual,
        })
    }
}

/// All bands of one microphone.
#[derive(Debug, Clone)]
pub struct HypothesisBank {
    bands: Vec<BandHypothesis>,
    cfg: ControlConfig,
}

impl HypothesisBank {
    pub fn new(
        bands: usize,
        taps: usize,
        regularization: f64,
        pnlms: PnlmsParams,
        cfg: ControlConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let proto = BandHypothesis::new(taps, regularization, pnlms)?;
        Ok(Self {
            bands: vec![proto; bands],
            cfg,
        })
    }

    pub fn bands(&self) -> &[BandHypothesis] {
        &self.bands
    }

    pub fn bands_mut(&mut self) -> &mut [BandHypothesis] {
        &mut self.bands
    }

    pub fn config(&self) -> &ControlConfig {
        &self.cfg
    }

    /// Steps every band; returns per-band outcomes and the residual frame.
    pub fn step_frame(
        &mut self,
        x: &SubbandFrame,
        d: &SubbandFrame,
    ) -> Result<(Vec<BandOutcome>, SubbandFrame)> {
        for frame in [x, d] {
            if frame.len() != self.bands.len() {
                return Err(Error::Size {
                    expected: self.bands.len(),
                    actual: frame.len(),
                });
            }
        }
        if let Some(band) = (0..self.bands.len())
            .find(|&k| !x.bands[k].is_finite() || !d.bands[k].is_finite())
        {
            return Err(Error::Band {
                band,
                source: Box::new(Error::input("non-finite band sample")),
            });
        }
        let cfg = self.cfg;
        let outcomes = self
            .bands
            .par_iter_mut()
            .enumerate()
            .map(|(k, band)| {
                band.step(x.bands[k], d.bands[k], &cfg)
                    .map_err(|e| Error::Band {
                        band: k,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let residual = SubbandFrame {
            index: d.index,
            bands: outcomes.iter().map(|o| o.residual).collect(),
        };
        Ok((outcomes, residual))
    }
}
