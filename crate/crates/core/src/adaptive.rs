//! Complex adaptive FIR filters run independently in every sub-band.
//!
//! The prediction is `y = sum_l x[l] * h[l]` over a most-recent-first delay
//! line. Both update rules minimise `|d - y|^2` for that prediction, so the
//! gradient direction is `e * conj(x)`; for real signals this is the familiar
//! `h += mu * e * x / (x'x)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_TAPS: usize = 20;
pub const DEFAULT_REGULARIZATION: f64 = 1e-10;
/// Floor added to the residual power in the shadow step-size rule.
pub const VSS_FLOOR: f64 = 1e-20;
/// Returned by [`misalignment`] when the estimate is exact.
pub const MISALIGNMENT_FLOOR_DB: f64 = -300.0;

/// Adaptation rate, restricted to `[0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct StepSize(f64);

impl StepSize {
    pub const MAX: f64 = 0.5;

    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=Self::MAX).contains(&mu) {
            return Err(Error::config(format!(
                "step size {mu} outside [0, {}]",
                Self::MAX
            )));
        }
        Ok(Self(mu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnlmsParams {
    /// Floor of each gain relative to the largest tap.
    pub rho: f64,
    /// Activation floor used while all taps are near zero.
    pub delta: f64,
}

impl Default for PnlmsParams {
    fn default() -> Self {
        Self {
            rho: 0.01,
            delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveFilter {
    taps: Vec<Complex64>,
    delay_line: Vec<Complex64>,
    regularization: f64,
    pnlms: Option<PnlmsParams>,
}

impl AdaptiveFilter {
    /// Zero-initialised NLMS filter with `len` taps.
    pub fn new(len: usize, regularization: f64) -> Result<Self> {
        if len == 0 {
            return Err(Error::config("filter length must be positive"));
        }
        if !(regularization > 0.0 && regularization.is_finite()) {
            return Err(Error::config(format!(
                "regularization must be positive, got {regularization}"
            )));
        }
        Ok(Self {
            taps: vec![Complex64::new(0.0, 0.0); len],
            delay_line: vec![Complex64::new(0.0, 0.0); len],
            regularization,
            pnlms: None,
        })
    }

    pub fn with_pnlms(mut self, params: PnlmsParams) -> Self {
        self.pnlms = Some(params);
        self
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn delay_line(&self) -> &[Complex64] {
        &self.delay_line
    }

    pub fn set_taps(&mut self, taps: &[Complex64]) -> Result<()> {
        if taps.len() != self.taps.len() {
            return Err(Error::Size {
                expected: self.taps.len(),
                actual: taps.len(),
            });
        }
        self.taps.copy_from_slice(taps);
        Ok(())
    }

    /// Overwrites this filter's taps with `source`'s. Delay lines are untouched.
    pub fn copy_taps_from(&mut self, source: &AdaptiveFilter) {
        self.taps.copy_from_slice(&source.taps);
    }

    /// Shifts `x_new` into the delay line and returns the echo prediction.
    pub fn push_and_predict(&mut self, x_new: Complex64) -> Result<Complex64> {
        if !x_new.is_finite() {
            return Err(Error::input("non-finite reference sample"));
        }
        let len = self.delay_line.len();
        self.delay_line.copy_within(0..len - 1, 1);
        self.delay_line[0] = x_new;
        Ok(self.predict())
    }

    pub fn predict(&self) -> Complex64 {
        self.delay_line
            .iter()
            .zip(&self.taps)
            .map(|(x, h)| x * h)
            .sum()
    }

    fn input_energy(&self) -> f64 {
        self.delay_line.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Normalised LMS step using the current delay line.
    pub fn nlms_update(&mut self, error: Complex64, mu: StepSize) -> Result<()> {
        if !error.is_finite() {
            return Err(Error::input("non-finite error sample"));
        }
        let energy = self.input_energy();
        if energy == 0.0 || error == Complex64::new(0.0, 0.0) {
            return Ok(());
        }
        let scale = error * (mu.value() / (energy + self.regularization));
        for (h, x) in self.taps.iter_mut().zip(&self.delay_line) {
            *h += scale * x.conj();
        }
        Ok(())
    }

    /// Proportionate NLMS step: each tap's step is weighted by its magnitude.
    pub fn pnlms_update(&mut self, error: Complex64, mu: StepSize) -> Result<()> {
        let params = self
            .pnlms
            .ok_or_else(|| Error::config("filter has no PNLMS parameters"))?;
        if !error.is_finite() {
            return Err(Error::input("non-finite error sample"));
        }
        if self.input_energy() == 0.0 || error == Complex64::new(0.0, 0.0) {
            return Ok(());
        }
        let gains = proportionate_gains(&self.taps, params);
        let weighted_energy: f64 = gains
            .iter()
            .zip(&self.delay_line)
            .map(|(g, x)| g * x.norm_sqr())
            .sum();
        let scale = error * (mu.value() / (weighted_energy + self.regularization));
        for ((h, x), g) in self.taps.iter_mut().zip(&self.delay_line).zip(&gains) {
            *h += scale * *g * x.conj();
        }
        Ok(())
    }
}

/// Gains `g_l = gamma_l / mean(gamma)` with
/// `gamma_l = max(rho * max(delta, max_m |h_m|), |h_l|)`.
pub fn proportionate_gains(taps: &[Complex64], params: PnlmsParams) -> Vec<f64> {
    let peak = taps.iter().map(|h| h.norm()).fold(params.delta, f64::max);
    let floor = params.rho * peak;
    let gamma: Vec<f64> = taps.iter().map(|h| h.norm().max(floor)).collect();
    let mean = gamma.iter().sum::<f64>() / gamma.len() as f64;
    gamma.into_iter().map(|g| g / mean).collect()
}

/// Shadow step size: `min(|y_s|^2 / |e_s|^2, 0.5)`.
pub fn vss_shadow_step(prediction: Complex64, error: Complex64) -> StepSize {
    let ratio = prediction.norm_sqr() / (error.norm_sqr() + VSS_FLOOR);
    // NaN (non-finite inputs) falls through to 0.
    let mu = if ratio >= StepSize::MAX {
        StepSize::MAX
    } else if ratio >= 0.0 {
        ratio
    } else {
        0.0
    };
    StepSize(mu)
}

/// Normalised distance `10 log10(|h - h_ref|^2 / |h_ref|^2)` in dB.
pub fn misalignment(estimate: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::Size {
            expected: reference.len(),
            actual: estimate.len(),
        });
    }
    let den: f64 = reference.iter().map(|h| h.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::input("reference response has zero energy"));
    }
    let num: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    if num == 0.0 {
        return Ok(MISALIGNMENT_FLOOR_DB);
    }
    Ok(10.0 * (num / den).log10())
}
