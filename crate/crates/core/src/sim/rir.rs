//! Synthetic loudspeaker-to-microphone impulse responses.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_for, Stream};
use crate::error::{Error, Result};

pub const RIR_LEN: usize = 9600;
pub const DEFAULT_T60_S: f64 = 0.15;
pub const DIRECT_PATH_LAG: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct RoomIr {
    pub taps: Vec<f64>,
    pub t60_s: f64,
    pub seed: u64,
}

impl RoomIr {
    pub fn norm(&self) -> f64 {
        self.taps.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Exponentially decaying Gaussian tail behind a unit direct-path spike,
/// normalised to unit energy. Taps before the direct path are zero.
pub fn gen_rir(seed: u64, t60_s: f64, len: usize, sample_rate: f64) -> Result<RoomIr> {
    if !(t60_s > 0.0) {
        return Err(Error::config(format!("T60 must be positive, got {t60_s}")));
    }
    if len <= DIRECT_PATH_LAG {
        return Err(Error::config(format!(
            "impulse response length {len} does not reach the direct path"
        )));
    }
    let mut rng = rng_for(seed, Stream::Rir);
    let decay = 3.0 * std::f64::consts::LN_10 / (t60_s * sample_rate);
    let mut taps: Vec<f64> = (0..len)
        .map(|l| {
            let g: f64 = rng.sample(StandardNormal);
            g * (-(l as f64) * decay).exp()
        })
        .collect();
    taps[..DIRECT_PATH_LAG].fill(0.0);
    taps[DIRECT_PATH_LAG] = 1.0;
    normalize(&mut taps);
    Ok(RoomIr { taps, t60_s, seed })
}

/// Blends `h` with an independent response drawn from `seed`:
/// `normalize((1 - severity) h + severity g)`.
pub fn perturb_rir(h: &RoomIr, severity: f64, seed: u64, sample_rate: f64) -> Result<RoomIr> {
    if !(severity > 0.0 && severity <= 1.0) {
        return Err(Error::config(format!(
            "perturbation severity must be in (0, 1], got {severity}"
        )));
    }
    let g = gen_rir(seed, h.t60_s, h.taps.len(), sample_rate)?;
    let mut taps: Vec<f64> = h
        .taps
        .iter()
        .zip(&g.taps)
        .map(|(a, b)| (1.0 - severity) * a + severity * b)
        .collect();
    normalize(&mut taps);
    Ok(RoomIr {
        taps,
        t60_s: h.t60_s,
        seed,
    })
}

fn normalize(taps: &mut [f64]) {
    let n = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        taps.iter_mut().for_each(|v| *v /= n);
    }
}
