//! Excitation and interference signals for the simulator.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_for, Stream};
use crate::error::{Error, Result};

/// Peak level of the rendered reference, in dBFS.
pub const REFERENCE_PEAK_DBFS: f64 = -6.0;

/// Pink noise plus a slowly wandering bed of tones, peak-normalised to
/// [`REFERENCE_PEAK_DBFS`].
pub fn gen_reference(duration_s: f64, seed: u64, sample_rate: f64) -> Result<Vec<f64>> {
    if !(duration_s > 0.0) {
        return Err(Error::config(format!("duration must be positive, got {duration_s}")));
    }
    let len = (duration_s * sample_rate).round() as usize;
    let mut rng = rng_for(seed, Stream::Reference);

    let mut out = pink_noise(len, &mut rng);
    scale_to_rms(&mut out, 1.0);

    let tones = 40;
    let (lo, hi) = (50.0f64, 12_000.0f64);
    let mut bed = vec![0.0; len];
    for i in 0..tones {
        let base = lo * (hi / lo).powf((i as f64 + rng.gen_range(0.0..1.0)) / tones as f64);
        let depth = rng.gen_range(0.005..0.03);
        let rate = rng.gen_range(0.05..0.3);
        let phase0 = rng.gen_range(0.0..2.0 * PI);
        let lfo0 = rng.gen_range(0.0..2.0 * PI);
        let amp = rng.gen_range(0.5..1.0) / (base / lo).sqrt();
        let mut phase = phase0;
        for (n, b) in bed.iter_mut().enumerate() {
            let t = n as f64 / sample_rate;
            let f = base * (1.0 + depth * (2.0 * PI * rate * t + lfo0).sin());
            phase += 2.0 * PI * f / sample_rate;
            *b += amp * phase.sin();
        }
    }
    scale_to_rms(&mut bed, 0.5);
    for (o, b) in out.iter_mut().zip(&bed) {
        *o += b;
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let target = 10f64.powf(REFERENCE_PEAK_DBFS / 20.0);
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= target / peak);
    }
    Ok(out)
}

/// Gaussian noise shaped to a 1/f spectrum (Kellet's refined filter).
fn pink_noise(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..len)
        .map(|_| {
            let white: f64 = rng.sample(StandardNormal);
            b[0] = 0.99886 * b[0] + white * 0.0555179;
            b[1] = 0.99332 * b[1] + white * 0.0750759;
            b[2] = 0.96900 * b[2] + white * 0.1538520;
            b[3] = 0.86650 * b[3] + white * 0.3104856;
            b[4] = 0.55000 * b[4] + white * 0.5329522;
            b[5] = -0.7616 * b[5] - white * 0.0168980;
            let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
            b[6] = white * 0.115926;
            out
        })
        .collect()
}

/// Formant-filtered noise with a syllabic (about 4 Hz) amplitude envelope,
/// unit RMS.
pub fn speech_like(len: usize, seed: u64, sample_rate: f64) -> Vec<f64> {
    let mut rng = rng_for(seed, Stream::Interferer);
    let formants = [(500.0, 6.0), (1500.0, 8.0), (2500.0, 10.0)];
    let glide: Vec<(f64, f64)> = formants
        .iter()
        .map(|_| (rng.gen_range(1.0..3.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let mut filters: Vec<Biquad> = formants.iter().map(|_| Biquad::default()).collect();

    let syllable = 0.25;
    let mut gains = Vec::new();
    let mut out = Vec::with_capacity(len);
    let phase = rng.gen_range(0.0..2.0 * PI);
    for n in 0..len {
        let t = n as f64 / sample_rate;
        if n % 64 == 0 {
            for (i, ((fc, q), (rate, ph))) in formants.iter().zip(&glide).enumerate() {
                let f = fc * (1.0 + 0.15 * (2.0 * PI * rate * t + ph).sin());
                filters[i].set_bandpass(f, *q, sample_rate);
            }
        }
        let idx = (t / syllable) as usize;
        while gains.len() <= idx {
            gains.push(rng.gen_range(0.3..1.0));
        }
        let env = (0.5 * (1.0 - (2.0 * PI * t / syllable + phase).cos())).powi(2) * gains[idx];
        let white: f64 = rng.sample(StandardNormal);
        let voiced: f64 = filters.iter_mut().map(|f| f.process(white)).sum();
        out.push(voiced * env);
    }
    scale_to_rms(&mut out, 1.0);
    out
}

/// Short low-frequency knock from handling the device, unit RMS.
pub fn contact_burst(len: usize, seed: u64, sample_rate: f64) -> Vec<f64> {
    let mut rng = rng_for(seed, Stream::Contact);
    let tau = 0.008 * sample_rate;
    let thump_hz = rng.gen_range(60.0..140.0);
    let coeff = (-2.0 * PI * 1000.0 / sample_rate).exp();
    let mut lp = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|n| {
            let white: f64 = rng.sample(StandardNormal);
            lp = coeff * lp + (1.0 - coeff) * white;
            let env = (-(n as f64) / tau).exp();
            let thump = (2.0 * PI * thump_hz * n as f64 / sample_rate).sin();
            env * (4.0 * lp + thump)
        })
        .collect();
    scale_to_rms(&mut out, 1.0);
    out
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn scale_to_rms(x: &mut [f64], target: f64) {
    let r = rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Biquad {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// Constant 0 dB peak gain band-pass.
    fn set_bandpass(&mut self, fc: f64, q: f64, fs: f64) {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        self.b0 = alpha / a0;
        self.b2 = -alpha / a0;
        self.a1 = -2.0 * w0.cos() / a0;
        self.a2 = (1.0 - alpha) / a0;
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}
