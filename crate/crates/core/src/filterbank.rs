//! Uniform complex-modulated filterbank.
//!
//! The bank has `M = 2 * bands` odd-stacked channels, of which only the lower
//! half is kept (the upper half is the complex conjugate of the lower half for
//! real input). Band `k` covers `[k, k + 1) * fs / M`, so the lowest 100 of
//! 512 bands at 48 kHz span exactly 0 to 4687.5 Hz.
//!
//! Analysis uses a Blackman-windowed sinc prototype of length `4 * hop`,
//! decimated by `hop` (2x oversampled). The synthesis window is derived from
//! the analysis prototype by solving the time-domain reconstruction
//! conditions phase by phase, so the chain reconstructs its input up to
//! floating point error with a latency of `prototype_len - hop` samples.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_BANDS: usize = 512;
pub const DEFAULT_HOP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterbankConfig {
    pub bands: usize,
    pub hop: usize,
    pub prototype_len: usize,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            bands: DEFAULT_BANDS,
            hop: DEFAULT_HOP,
            prototype_len: 4 * DEFAULT_HOP,
        }
    }
}

impl FilterbankConfig {
    pub fn channels(&self) -> usize {
        2 * self.bands
    }

    fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.hop == 0 {
            return Err(Error::config("bands and hop must be positive"));
        }
        if self.prototype_len == 0 || self.prototype_len % self.hop != 0 {
            return Err(Error::config(format!(
                "prototype length {} is not a multiple of hop {}",
                self.prototype_len, self.hop
            )));
        }
        if self.channels() % self.hop != 0 {
            return Err(Error::config(format!(
                "channel count {} is not a multiple of hop {}",
                self.channels(),
                self.hop
            )));
        }
        Ok(())
    }
}

/// Analysis and synthesis windows shared by every state built from one config.
#[derive(Debug, Clone)]
pub struct Prototype {
    config: FilterbankConfig,
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
}

impl Prototype {
    pub fn new(config: FilterbankConfig) -> Result<Self> {
        config.validate()?;
        let analysis = windowed_sinc(config.prototype_len, 0.5 / config.channels() as f64);
        let synthesis = solve_synthesis(&analysis, config.hop, config.channels())?;
        Ok(Self {
            config,
            analysis,
            synthesis,
        })
    }

    pub fn config(&self) -> FilterbankConfig {
        self.config
    }

    pub fn analysis_window(&self) -> &[f64] {
        &self.analysis
    }

    pub fn synthesis_window(&self) -> &[f64] {
        &self.synthesis
    }

    /// Ratio of expected sub-band energy per frame to time-domain energy per
    /// frame for white input.
    pub fn energy_gain(&self) -> f64 {
        let m = self.config.channels() as f64;
        let r = self.config.hop as f64;
        m * self.analysis.iter().map(|h| h * h).sum::<f64>() / (2.0 * r)
    }

    /// Center frequency of band `k` in Hz.
    pub fn band_center_hz(&self, k: usize, sample_rate: f64) -> f64 {
        (k as f64 + 0.5) * sample_rate / self.config.channels() as f64
    }
}

/// Blackman-windowed sinc low-pass with cutoff `fc` (cycles/sample),
/// normalized to unit DC gain.
fn windowed_sinc(len: usize, fc: f64) -> Vec<f64> {
    let center = (len as f64 - 1.0) / 2.0;
    let denom = len as f64 - 1.0;
    let mut h: Vec<f64> = (0..len)
        .map(|m| {
            let t = m as f64 - center;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let phase = 2.0 * PI * m as f64 / denom;
            let window = 0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// For each polyphase component `c` the output is
/// `sum_r f[c + rR] * h[c + rR + lM] * x[t + lM]`; reconstruction needs that
/// sum to be 1 for `l = 0` and 0 otherwise. The synthesis taps of each phase
/// are the solution of those constraints closest to `h / sum(h^2)`.
fn solve_synthesis(analysis: &[f64], hop: usize, channels: usize) -> Result<Vec<f64>> {
    let taps_per_phase = analysis.len() / hop;
    let shift = channels / hop;
    let max_lag = (taps_per_phase - 1) / shift;
    let mut synthesis = vec![0.0; analysis.len()];

    for c in 0..hop {
        let a: Vec<f64> = (0..taps_per_phase).map(|r| analysis[c + r * hop]).collect();
        let energy: f64 = a.iter().map(|v| v * v).sum();
        if energy <= 0.0 {
            return Err(Error::config(format!("prototype phase {c} has no energy")));
        }
        let target: Vec<f64> = a.iter().map(|v| v / energy).collect();

        // One constraint row per lag l in -max_lag..=max_lag.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for l in -(max_lag as isize)..=(max_lag as isize) {
            let row: Vec<f64> = (0..taps_per_phase)
                .map(|r| {
                    let idx = r as isize + l * shift as isize;
                    if idx >= 0 && (idx as usize) < taps_per_phase {
                        a[idx as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            rhs.push(if l == 0 { 1.0 } else { 0.0 });
            rows.push(row);
        }

        // b = t + A^T (A A^T)^-1 (e - A t)
        let n = rows.len();
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                gram[i][j] = dot(&rows[i], &rows[j]);
            }
        }
        let resid: Vec<f64> = (0..n).map(|i| rhs[i] - dot(&rows[i], &target)).collect();
        let lambda = solve_dense(gram, resid)
            .ok_or_else(|| Error::config(format!("prototype phase {c} is not invertible")))?;
        for r in 0..taps_per_phase {
            let correction: f64 = (0..n).map(|i| rows[i][r] * lambda[i]).sum();
            synthesis[c + r * hop] = target[r] + correction;
        }
    }
    Ok(synthesis)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// One frame of complex sub-band samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    pub index: u64,
    pub bands: Vec<Complex64>,
}

impl SubbandFrame {
    pub fn zeros(index: u64, bands: usize) -> Self {
        Self {
            index,
            bands: vec![Complex64::new(0.0, 0.0); bands],
        }
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

/// Rotation by `exp(-j pi q / M)` that shifts the DFT grid by half a bin.
fn half_bin_twiddles(channels: usize, sign: f64) -> Vec<Complex64> {
    (0..channels)
        .map(|q| Complex64::from_polar(1.0, sign * PI * q as f64 / channels as f64))
        .collect()
}

#[derive(Clone)]
pub struct AnalysisState {
    prototype: Arc<Prototype>,
    history: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    twiddles: Vec<Complex64>,
    buffer: Vec<Complex64>,
    frames: u64,
}

impl std::fmt::Debug for AnalysisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalysisState")
            .field("config", &self.prototype.config)
            .field("frames", &self.frames)
            .finish()
    }
}

impl AnalysisState {
    pub fn new(prototype: Arc<Prototype>) -> Self {
        let m = prototype.config.channels();
        let fft = FftPlanner::new().plan_fft_forward(m);
        Self {
            history: vec![0.0; prototype.config.prototype_len],
            twiddles: half_bin_twiddles(m, -1.0),
            buffer: vec![Complex64::new(0.0, 0.0); m],
            fft,
            prototype,
            frames: 0,
        }
    }

    pub fn prototype(&self) -> &Arc<Prototype> {
        &self.prototype
    }

    /// Consumes `hop` new samples and returns the sub-band frame.
    pub fn analyze(&mut self, frame: &[f64]) -> Result<SubbandFrame> {
        let cfg = self.prototype.config;
        if frame.len() != cfg.hop {
            return Err(Error::Size {
                expected: cfg.hop,
                actual: frame.len(),
            });
        }
        if frame.iter().any(|s| !s.is_finite()) {
            return Err(Error::input("non-finite sample in analysis frame"));
        }
        let p = cfg.prototype_len;
        self.history.copy_within(cfg.hop.., 0);
        self.history[p - cfg.hop..].copy_from_slice(frame);

        let m = cfg.channels();
        let h = &self.prototype.analysis;
        for q in 0..m {
            let mut acc = 0.0;
            let mut sign = 1.0;
            let mut idx = q;
            while idx < p {
                acc += sign * h[idx] * self.history[idx];
                sign = -sign;
                idx += m;
            }
            self.buffer[q] = self.twiddles[q] * acc;
        }
        self.fft.process(&mut self.buffer);

        let out = SubbandFrame {
            index: self.frames,
            bands: self.buffer[..cfg.bands].to_vec(),
        };
        self.frames += 1;
        Ok(out)
    }
}

#[derive(Clone)]
pub struct SynthesisState {
    prototype: Arc<Prototype>,
    overlap: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
    twiddles: Vec<Complex64>,
    buffer: Vec<Complex64>,
}

impl std::fmt::Debug for SynthesisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SynthesisState")
            .field("config", &self.prototype.config)
            .finish()
    }
}

impl SynthesisState {
    pub fn new(prototype: Arc<Prototype>) -> Self {
        let m = prototype.config.channels();
        let ifft = FftPlanner::new().plan_fft_inverse(m);
        Self {
            overlap: vec![0.0; prototype.config.prototype_len],
            twiddles: half_bin_twiddles(m, 1.0),
            buffer: vec![Complex64::new(0.0, 0.0); m],
            ifft,
            prototype,
        }
    }

    /// Produces `hop` output samples from one sub-band frame.
    pub fn synthesize(&mut self, bands: &SubbandFrame) -> Result<Vec<f64>> {
        let cfg = self.prototype.config;
        if bands.len() != cfg.bands {
            return Err(Error::Size {
                expected: cfg.bands,
                actual: bands.len(),
            });
        }
        let m = cfg.channels();
        for (k, &v) in bands.bands.iter().enumerate() {
            self.buffer[k] = v;
            self.buffer[m - 1 - k] = v.conj();
        }
        self.ifft.process(&mut self.buffer);

        let scale = 1.0 / m as f64;
        let f = &self.prototype.synthesis;
        for q in 0..m {
            let base = (self.buffer[q] * self.twiddles[q]).re * scale;
            let mut sign = 1.0;
            let mut idx = q;
            while idx < cfg.prototype_len {
                self.overlap[idx] += sign * f[idx] * base;
                sign = -sign;
                idx += m;
            }
        }

        let out = self.overlap[..cfg.hop].to_vec();
        self.overlap.copy_within(cfg.hop.., 0);
        let len = self.overlap.len();
        self.overlap[len - cfg.hop..].fill(0.0);
        Ok(out)
    }
}

/// Latency of analysis followed by synthesis, in samples.
pub fn round_trip_delay(analysis: &AnalysisState, synthesis: &SynthesisState) -> usize {
    debug_assert_eq!(
        analysis.prototype.config, synthesis.prototype.config,
        "states built from different prototypes"
    );
    let cfg = analysis.prototype.config;
    cfg.prototype_len - cfg.hop
}
