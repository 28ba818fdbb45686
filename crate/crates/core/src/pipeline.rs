//! Full sub-band echo canceller: analysis, per-band hypotheses, statistics
//! and resynthesis.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::config::RunConfig;
use crate::controller::{BandOutcome, HypothesisBank};
use crate::error::{Error, Result};
use crate::filterbank::{AnalysisState, Prototype, SubbandFrame, SynthesisState};
use crate::stats::{aggregate, Smoother, StatsVector};

/// Result of one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub outcomes: Vec<BandOutcome>,
    pub raw: StatsVector,
    pub smoothed: StatsVector,
    /// `hop` time-domain residual samples, delayed by [`Canceller::latency`].
    pub residual: Vec<f64>,
}

/// Streaming canceller for one reference/microphone pair.
#[derive(Debug, Clone)]
pub struct Canceller {
    cfg: RunConfig,
    reference: AnalysisState,
    mic: AnalysisState,
    synthesis: SynthesisState,
    bank: HypothesisBank,
    smoother: Smoother,
    mic_delay: VecDeque<SubbandFrame>,
    frame: u64,
}

impl Canceller {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let proto = Arc::new(Prototype::new(cfg.filterbank())?);
        let bank = HypothesisBank::new(
            cfg.bands,
            cfg.taps,
            cfg.regularization,
            cfg.pnlms(),
            cfg.control,
        )?;
        let smoother = Smoother::new(
            Smoother::DEFAULT_SEED,
            cfg.frame_period_s(),
            cfg.time_constant_s,
        )?;
        let mic_delay = (0..cfg.mic_delay_frames)
            .map(|i| SubbandFrame::zeros(i as u64, cfg.bands))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            reference: AnalysisState::new(proto.clone()),
            mic: AnalysisState::new(proto.clone()),
            synthesis: SynthesisState::new(proto),
            bank,
            smoother,
            mic_delay,
            frame: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn bank(&self) -> &HypothesisBank {
        &self.bank
    }

    /// Samples between a microphone sample and its residual.
    pub fn latency(&self) -> usize {
        self.cfg.prototype_len - self.cfg.frame + self.cfg.mic_delay_frames * self.cfg.frame
    }

    pub fn process_frame(&mut self, x: &[f64], d: &[f64]) -> Result<FrameOutput> {
        let xs = self.reference.analyze(x)?;
        let ds = self.mic.analyze(d)?;
        self.mic_delay.push_back(ds);
        let mut ds = self.mic_delay.pop_front().expect("queue is never empty after push");
        ds.index = self.frame;

        let (outcomes, residual) = self.bank.step_frame(&xs, &ds)?;
        let raw = aggregate(self.frame, &outcomes, self.cfg.stats_bands)?;
        let smoothed = self.smoother.smooth(&raw);
        let residual = self.synthesis.synthesize(&residual)?;
        self.frame += 1;
        Ok(FrameOutput {
            outcomes,
            raw,
            smoothed,
            residual,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AecOutput {
    /// Residual aligned with the input, same length.
    pub residual: Vec<f64>,
    /// Smoothed statistics after truncation.
    pub stats: Vec<StatsVector>,
    /// Raw statistics for every frame, including the truncated ones.
    pub raw: Vec<StatsVector>,
}

/// Runs the canceller over whole signals.
///
/// The last partial frame is zero padded. One statistics row is produced per
/// input frame; rows before `truncate_s` are dropped.
pub fn run_aec(x: &[f64], d: &[f64], cfg: &RunConfig) -> Result<AecOutput> {
    if x.len() != d.len() {
        return Err(Error::input(format!(
            "reference has {} samples but microphone has {}",
            x.len(),
            d.len()
        )));
    }
    let mut canceller = Canceller::new(cfg)?;
    let hop = cfg.frame;
    let frames = x.len().div_ceil(hop);
    let latency = canceller.latency();
    let total = (x.len() + latency).div_ceil(hop);

    let mut residual = Vec::with_capacity(total * hop);
    let mut raw = Vec::with_capacity(frames);
    let mut stats = Vec::with_capacity(frames);
    let truncate = cfg.truncate_frames();
    let mut xb = vec![0.0; hop];
    let mut db = vec![0.0; hop];
    for m in 0..total {
        xb.fill(0.0);
        db.fill(0.0);
        let start = (m * hop).min(x.len());
        let end = ((m + 1) * hop).min(x.len());
        xb[..end - start].copy_from_slice(&x[start..end]);
        db[..end - start].copy_from_slice(&d[start..end]);
        let out = canceller.process_frame(&xb, &db)?;
        residual.extend_from_slice(&out.residual);
        if m < frames {
            raw.push(out.raw);
            if m >= truncate {
                stats.push(out.smoothed);
            }
        }
    }
    let residual = residual[latency..latency + x.len()].to_vec();
    Ok(AecOutput {
        residual,
        stats,
        raw,
    })
}
