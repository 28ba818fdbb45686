use num_complex::Complex64;
use rustfft::FftPlanner;

/// Causal linear convolution `y[n] = sum_l h[l] x[n - l]`, truncated to
/// `x.len()` samples. Overlap-add with FFT blocks.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let fft_len = (2 * h.len()).next_power_of_two().max(1024);
    let block = fft_len - h.len() + 1;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut h_spec = vec![Complex64::new(0.0, 0.0); fft_len];
    for (dst, &v) in h_spec.iter_mut().zip(h) {
        dst.re = v;
    }
    fwd.process(&mut h_spec);

    let scale = 1.0 / fft_len as f64;
    let mut y = vec![0.0; x.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for start in (0..x.len()).step_by(block) {
        let end = (start + block).min(x.len());
        buf.fill(Complex64::new(0.0, 0.0));
        for (dst, &v) in buf.iter_mut().zip(&x[start..end]) {
            dst.re = v;
        }
        fwd.process(&mut buf);
        for (b, hs) in buf.iter_mut().zip(&h_spec) {
            *b *= hs;
        }
        inv.process(&mut buf);
        let stop = (start + fft_len).min(x.len());
        for (i, out) in y[start..stop].iter_mut().enumerate() {
            *out += buf[i].re * scale;
        }
    }
    y
}

#[cfg(test)]
pub(crate) fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(l, hl)| hl * x[n - l])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (nx, nh) in [(1, 1), (10, 3), (3000, 700), (5000, 1)] {
            let x: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..nh).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = convolve(&x, &h);
            let slow = convolve_direct(&x, &h);
            let err: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum();
            let ref_e: f64 = slow.iter().map(|v| v * v).sum();
            assert!(err <= 1e-18 * ref_e.max(1e-300), "{nx}x{nh}: {err} vs {ref_e}");
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(convolve(&[], &[1.0]).is_empty());
        assert_eq!(convolve(&[1.0, 2.0], &[]), vec![0.0, 0.0]);
    }
}
