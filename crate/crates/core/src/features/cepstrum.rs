//! Cepstral analysis/synthesis and the minimum-phase construction.

use super::{Cepstra, FeatureError};
use crate::signal::dft::{dft_complex, dft_forward, dft_inverse};
use crate::signal::{ComplexSpectrum, PowerSpectrum};
use rustfft::num_complex::Complex64;

/// Relative spectral floor applied before taking logs.
const RELATIVE_FLOOR: f64 = 1e-10;
/// Absolute fallback so all-zero frames stay finite.
const ABSOLUTE_FLOOR: f64 = 1e-100;

fn floor_frame(frame: &[f64]) -> Vec<f64> {
    let max = frame.iter().cloned().fold(0.0, f64::max);
    let floor = (max * RELATIVE_FLOOR).max(ABSOLUTE_FLOOR);
    frame.iter().map(|v| v.max(floor)).collect()
}

/// All-pass frequency-warping recursion. Maps `c` onto `target_order + 1`
/// coefficients of the warped axis; `alpha = 0` reduces to truncation or
/// zero-padding. Negate `alpha` to unwarp.
pub fn freqt(c: &[f64], target_order: usize, alpha: f64) -> Vec<f64> {
    let beta = 1.0 - alpha * alpha;
    let mut out = vec![0.0; target_order + 1];
    let mut prev = vec![0.0; target_order + 1];
    for &ci in c.iter().rev() {
        prev.copy_from_slice(&out);
        out[0] = ci + alpha * prev[0];
        if target_order >= 1 {
            out[1] = beta * prev[0] + alpha * prev[1];
        }
        for j in 2..=target_order {
            out[j] = prev[j - 1] + alpha * (prev[j] - out[j - 1]);
        }
    }
    out
}

/// One-sided real cepstrum of a log-amplitude vector (length F), via the
/// symmetric spectrum it represents.
fn log_amplitude_to_cepstrum(log_amp: &[f64]) -> Vec<f64> {
    let bins: Vec<Complex64> = log_amp.iter().map(|a| Complex64::new(*a, 0.0)).collect();
    let full = dft_inverse(&bins);
    full[..log_amp.len()].to_vec()
}

/// Evaluate the symmetric extension of a one-sided cepstrum back to
/// log-amplitudes at F bins.
fn cepstrum_to_log_amplitude(c_onesided: &[f64]) -> Vec<f64> {
    let f = c_onesided.len();
    let t = (f - 1) * 2;
    let mut sym = vec![0.0; t];
    sym[..f].copy_from_slice(c_onesided);
    for q in 1..f - 1 {
        sym[t - q] = c_onesided[q];
    }
    dft_forward(&sym).iter().map(|b| b.re).collect()
}

/// Linear-domain moving average across bins. Smoothing a voiced power
/// spectrum over roughly one harmonic spacing removes the pulse-train comb
/// before the log, which is what makes the cepstra an envelope rather than a
/// harmonic snapshot.
pub fn smooth_power(p: &PowerSpectrum, width_bins: usize) -> PowerSpectrum {
    if width_bins <= 1 {
        return p.clone();
    }
    let half = width_bins / 2;
    let frames = p
        .frames
        .iter()
        .map(|row| {
            (0..row.len())
                .map(|f| {
                    let lo = f.saturating_sub(half);
                    let hi = (f + half + 1).min(row.len());
                    row[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
                })
                .collect()
        })
        .collect();
    PowerSpectrum {
        frames,
        bins: p.bins,
    }
}

/// Power spectrum -> truncated, optionally warped cepstra.
///
/// `order` may equal the bin count (the lossless boundary case); anything
/// larger is rejected.
pub fn cepstral_analysis(
    p: &PowerSpectrum,
    order: usize,
    warp_alpha: f64,
) -> Result<Cepstra, FeatureError> {
    if order > p.bins {
        return Err(FeatureError::OrderTooLarge {
            m: order,
            f: p.bins,
        });
    }
    let frames = p
        .frames
        .iter()
        .map(|frame| {
            let floored = floor_frame(frame);
            let log_amp: Vec<f64> = floored.iter().map(|v| 0.5 * v.ln()).collect();
            let c_full = log_amplitude_to_cepstrum(&log_amp);
            if warp_alpha == 0.0 {
                c_full[..order].to_vec()
            } else {
                let mut warped = freqt(&c_full, order - 1, warp_alpha);
                warped.truncate(order);
                warped
            }
        })
        .collect();
    Ok(Cepstra {
        frames,
        order,
        warp_alpha,
    })
}

/// Cepstra -> per-frame linear amplitude spectrum (sqrt of power) at `bins`
/// one-sided bins. Inverse of [`cepstral_analysis`] up to truncation loss.
pub fn cepstra_to_amplitude(c: &Cepstra, bins: usize) -> Vec<Vec<f64>> {
    c.frames
        .iter()
        .map(|frame| {
            let unwarped = if c.warp_alpha == 0.0 {
                let mut v = frame.clone();
                v.resize(bins, 0.0);
                v
            } else {
                freqt(frame, bins - 1, -c.warp_alpha)
            };
            cepstrum_to_log_amplitude(&unwarped)
                .iter()
                .map(|a| a.exp())
                .collect()
        })
        .collect()
}

/// Homomorphic minimum-phase construction: fold the log-amplitude cepstrum
/// causally and exponentiate. The result's modulus equals the input
/// amplitude.
pub fn minimum_phase_spectrum(amplitude: &[Vec<f64>]) -> ComplexSpectrum {
    let frames: Vec<Vec<Complex64>> = amplitude
        .iter()
        .map(|amp| {
            let f = amp.len();
            let t = (f - 1) * 2;
            let floored = floor_frame(amp);
            let log_amp: Vec<f64> = floored.iter().map(|v| v.ln()).collect();
            let c = log_amplitude_to_cepstrum(&log_amp);
            // Causal fold: keep c0 and the Nyquist coefficient, double the rest.
            let mut causal = vec![Complex64::new(0.0, 0.0); t];
            causal[0] = Complex64::new(c[0], 0.0);
            for q in 1..f - 1 {
                causal[q] = Complex64::new(2.0 * c[q], 0.0);
            }
            causal[f - 1] = Complex64::new(c[f - 1], 0.0);
            let log_spec = dft_complex(&causal, false);
            log_spec[..f].iter().map(|l| l.exp()).collect()
        })
        .collect();
    let bins = frames.first().map(|f| f.len()).unwrap_or(0);
    ComplexSpectrum { frames, bins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn power_of(frames: Vec<Vec<f64>>) -> PowerSpectrum {
        let bins = frames[0].len();
        PowerSpectrum { frames, bins }
    }

    #[test]
    fn flat_spectrum_concentrates_in_c0() {
        // p = e^2 everywhere -> log sqrt(p) = 1 -> c0 = 1, rest 0.
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let p = power_of(vec![vec![e2; 33]]);
        let c = cepstral_analysis(&p, 8, 0.0).unwrap();
        assert!((c.frames[0][0] - 1.0).abs() < 1e-12);
        for v in &c.frames[0][1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn order_above_bin_count_is_rejected() {
        let p = power_of(vec![vec![1.0; 16]]);
        assert!(matches!(
            cepstral_analysis(&p, 17, 0.0),
            Err(FeatureError::OrderTooLarge { .. })
        ));
        assert!(cepstral_analysis(&p, 16, 0.0).is_ok());
    }

    /// alpha = 0, order = F: analysis followed by synthesis reproduces the
    /// amplitude spectrum exactly (round-trip oracle).
    #[test]
    fn full_order_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let bins = 33;
        for _ in 0..20 {
            let frame: Vec<f64> = (0..bins).map(|_| rng.gen_range(-1.5..1.5f64).exp()).collect();
            let p = power_of(vec![frame.clone()]);
            let c = cepstral_analysis(&p, bins, 0.0).unwrap();
            let amp = cepstra_to_amplitude(&c, bins);
            for (a, b) in amp[0].iter().zip(frame.iter()) {
                assert!((a - b.sqrt()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn truncation_error_shrinks_with_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let bins = 65;
        let frame: Vec<f64> = (0..bins).map(|_| rng.gen_range(-1.0..1.0f64).exp()).collect();
        let p = power_of(vec![frame.clone()]);
        let target: Vec<f64> = frame.iter().map(|v| v.sqrt()).collect();
        let mut last_err = f64::INFINITY;
        for m in [10, 20, 40, 64] {
            let c = cepstral_analysis(&p, m, 0.0).unwrap();
            let amp = cepstra_to_amplitude(&c, bins);
            let err: f64 = amp[0]
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a.ln() - b.ln()).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(
                err <= last_err + 1e-12,
                "reconstruction error not non-increasing: {err} after {last_err} at M={m}"
            );
            last_err = err;
        }
    }

    #[test]
    fn warping_changes_nonflat_spectra_only() {
        let bins = 33;
        let flat = power_of(vec![vec![4.0; bins]]);
        let c0 = cepstral_analysis(&flat, 8, 0.0).unwrap();
        let c1 = cepstral_analysis(&flat, 8, 0.55).unwrap();
        for (a, b) in c0.frames[0].iter().zip(c1.frames[0].iter()) {
            assert!((a - b).abs() < 1e-10, "warping must fix constants");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let shaped: Vec<f64> = (0..bins).map(|_| rng.gen_range(-1.0..1.0f64).exp()).collect();
        let p = power_of(vec![shaped]);
        let u = cepstral_analysis(&p, 8, 0.0).unwrap();
        let w = cepstral_analysis(&p, 8, 0.55).unwrap();
        let diff: f64 = u.frames[0]
            .iter()
            .zip(w.frames[0].iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-6, "warping must move non-flat cepstra");
    }

    #[test]
    fn freqt_zero_alpha_is_resize() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        let out = freqt(&c, 5, 0.0);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        let out = freqt(&c, 1, 0.0);
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn freqt_inverts_with_negated_alpha() {
        let c = vec![0.8, 0.4, -0.2, 0.1, 0.05];
        let warped = freqt(&c, 63, 0.42);
        let back = freqt(&warped, 4, -0.42);
        for (a, b) in c.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_cepstrum_gives_flat_amplitude() {
        let c = Cepstra {
            frames: vec![vec![1.0, 0.0, 0.0]],
            order: 3,
            warp_alpha: 0.0,
        };
        let amp = cepstra_to_amplitude(&c, 17);
        for v in &amp[0] {
            assert!((v - std::f64::consts::E).abs() < 1e-12);
        }
    }

    #[test]
    fn minimum_phase_flat_amplitude_has_zero_phase() {
        let amp = vec![vec![2.0; 17]];
        let spec = minimum_phase_spectrum(&amp);
        for b in &spec.frames[0] {
            assert!((b.re - 2.0).abs() < 1e-10);
            assert!(b.im.abs() < 1e-10);
        }
    }

    #[test]
    fn minimum_phase_preserves_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        for _ in 0..20 {
            let bins = 33;
            let amp: Vec<f64> = (0..bins).map(|_| rng.gen_range(-1.0..1.0f64).exp()).collect();
            let spec = minimum_phase_spectrum(&[amp.clone()]);
            for (b, a) in spec.frames[0].iter().zip(amp.iter()) {
                assert!((b.norm() - a).abs() < 1e-6, "modulus oracle violated");
            }
        }
    }

    /// Single-pole causal filter oracle: |H| of h[n] = a^n reconstructs the
    /// causal impulse response.
    #[test]
    fn minimum_phase_recovers_single_pole_filter() {
        let a = 0.5f64;
        let t = 128usize;
        let f = t / 2 + 1;
        // H(w_k) = 1 / (1 - a e^{-i w_k})
        let amp: Vec<f64> = (0..f)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * k as f64 / t as f64;
                let den = Complex64::new(1.0 - a * w.cos(), a * w.sin());
                1.0 / den.norm()
            })
            .collect();
        let spec = minimum_phase_spectrum(&[amp]);
        // Rebuild the impulse response from the one-sided spectrum.
        let h = dft_inverse(&spec.frames[0]);
        for (n, v) in h.iter().take(24).enumerate() {
            let want = a.powi(n as i32);
            assert!((v - want).abs() < 1e-4, "h[{n}] = {v}, want {want}");
        }
    }
}
