//! One-sided DFT of real signals on top of rustfft.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT of a real frame, one-sided output.
///
/// `bins[f] = sum_t x[t] * exp(-i 2 pi f t / T)` for `f in [0, T/2]`.
pub fn dft_forward(frame: &[f64]) -> Vec<Complex64> {
    let t = frame.len();
    if t == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = frame.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(t).process(&mut buf);
    buf.truncate(t / 2 + 1);
    buf
}

/// Inverse of [`dft_forward`]: rebuilds the two-sided spectrum by conjugate
/// symmetry and returns the real signal of length `(bins - 1) * 2` (even
/// lengths; a one-bin input maps back to length 1).
pub fn dft_inverse(bins: &[Complex64]) -> Vec<f64> {
    let f = bins.len();
    if f == 0 {
        return Vec::new();
    }
    if f == 1 {
        return vec![bins[0].re];
    }
    let t = (f - 1) * 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    buf[..f].copy_from_slice(bins);
    for k in 1..f - 1 {
        buf[t - k] = bins[k].conj();
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(t).process(&mut buf);
    let scale = 1.0 / t as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Full two-sided complex DFT of a complex input. Used where the one-sided
/// form is inconvenient (minimum-phase construction needs an asymmetric
/// input).
pub fn dft_complex(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let t = input.len();
    if t == 0 {
        return Vec::new();
    }
    let mut buf = input.to_vec();
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(t).process(&mut buf);
        let scale = 1.0 / t as f64;
        for v in &mut buf {
            *v *= scale;
        }
    } else {
        planner.plan_fft_forward(t).process(&mut buf);
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent direct-summation oracle, O(T^2).
    fn naive_dft(frame: &[f64]) -> Vec<Complex64> {
        let t = frame.len();
        let mut out = Vec::with_capacity(t / 2 + 1);
        for f in 0..=t / 2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, x) in frame.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * f as f64 * n as f64 / t as f64;
                acc += Complex64::new(phase.cos(), phase.sin()) * *x;
            }
            out.push(acc);
        }
        out
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let bins = dft_forward(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bins.len(), 3);
        for b in bins {
            assert!((b.re - 1.0).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_concentrates_in_dc() {
        let bins = dft_forward(&[1.0, 1.0, 1.0, 1.0]);
        assert!((bins[0].re - 4.0).abs() < 1e-12);
        assert!(bins[1].norm() < 1e-12);
        assert!(bins[2].norm() < 1e-12);
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let frame: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = dft_forward(&frame);
        let slow = naive_dft(&frame);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &len in &[2usize, 8, 10, 64, 100] {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = dft_inverse(&dft_forward(&x));
            assert_eq!(back.len(), x.len());
            for (a, b) in x.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-10, "len {len}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_of_impulse_bins() {
        let bins = vec![Complex64::new(1.0, 0.0); 3];
        let x = dft_inverse(&bins);
        assert!((x[0] - 1.0).abs() < 1e-12);
        for v in &x[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bins_to_zero_vector() {
        let x = dft_inverse(&vec![Complex64::new(0.0, 0.0); 5]);
        assert_eq!(x.len(), 8);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let len = 32;
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mixed: Vec<f64> = x.iter().zip(y.iter()).map(|(u, v)| a * u + b * v).collect();
            let fx = dft_forward(&x);
            let fy = dft_forward(&y);
            let fm = dft_forward(&mixed);
            for i in 0..fm.len() {
                let want = fx[i] * a + fy[i] * b;
                assert!((fm[i] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let len = 64;
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let time_energy: f64 = x.iter().map(|v| v * v).sum();
            let bins = dft_forward(&x);
            // Two-sided energy: DC and Nyquist once, everything else twice.
            let mut freq_energy = bins[0].norm_sqr() + bins[len / 2].norm_sqr();
            for b in &bins[1..len / 2] {
                freq_energy += 2.0 * b.norm_sqr();
            }
            freq_energy /= len as f64;
            assert!((time_energy - freq_energy).abs() < 1e-8);
        }
    }
}
