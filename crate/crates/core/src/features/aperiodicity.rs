//! Band aperiodicity from per-band comb-filter residual ratios.
//!
//! For each frequency band, the periodic component of a frame is modeled as
//! the best scaled copy of the band-limited signal one pitch period earlier;
//! the aperiodicity is the residual-to-total energy ratio `1 - r^2` with `r`
//! the normalized correlation at that lag. Unvoiced frames are fully
//! aperiodic by definition.

use super::{BandAperiodicity, F0Track, FeatureError};
use crate::signal::dft::{dft_forward, dft_inverse};
use crate::signal::Waveform;

pub const DEFAULT_BANDS: usize = 25;

/// Analysis window for the residual measurement: five periods of a 55 Hz
/// fundamental, so narrowband noise decorrelates enough to be measurable.
pub fn window_len(sample_rate: u32) -> usize {
    (5.0 * sample_rate as f64 / 55.0).ceil() as usize
}

/// Band-limit a frame by zeroing one-sided bins outside `[lo, hi)`.
fn band_limit(bins: &[rustfft::num_complex::Complex64], lo: usize, hi: usize) -> Vec<f64> {
    let mut masked = vec![rustfft::num_complex::Complex64::new(0.0, 0.0); bins.len()];
    masked[lo..hi.min(bins.len())].copy_from_slice(&bins[lo..hi.min(bins.len())]);
    dft_inverse(&masked)
}

/// Normalized correlation between x[t] and x[t + lag] with linear
/// interpolation at fractional lags.
fn correlation_at_lag(x: &[f64], lag: f64) -> f64 {
    let li = lag.floor() as usize;
    let frac = lag - li as f64;
    let span = x.len().saturating_sub(li + 2);
    if span < 8 {
        return 0.0;
    }
    let mut num = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for t in 0..span {
        let shifted = x[t + li] * (1.0 - frac) + x[t + li + 1] * frac;
        num += x[t] * shifted;
        e0 += x[t] * x[t];
        e1 += shifted * shifted;
    }
    let den = (e0 * e1).sqrt();
    if den <= 1e-14 {
        0.0
    } else {
        num / den
    }
}

/// Estimate per-band aperiodicity on the frame grid of `f0`.
pub fn estimate_band_aperiodicity(
    wave: &Waveform,
    f0: &F0Track,
    bands: usize,
) -> Result<BandAperiodicity, FeatureError> {
    let sr = wave.sample_rate;
    let hop_f = sr as f64 / f0.frame_rate;
    if hop_f.fract() != 0.0 || hop_f < 1.0 {
        return Err(FeatureError::FractionalHop {
            sr,
            frame_rate: f0.frame_rate,
        });
    }
    let hop = hop_f as usize;
    let win = window_len(sr);
    let n_possible = if wave.len() < win {
        0
    } else {
        (wave.len() - win) / hop + 1
    };
    let n = n_possible.min(f0.f0.len());

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let f0_hz = f0.f0[i];
        if f0_hz <= 0.0 {
            frames.push(vec![1.0; bands]);
            continue;
        }
        let seg = &wave.samples[i * hop..i * hop + win];
        let mean = seg.iter().sum::<f64>() / win as f64;
        let x: Vec<f64> = seg.iter().map(|v| v - mean).collect();
        let bins = dft_forward(&x);
        let total_energy: f64 = x.iter().map(|v| v * v).sum();
        let band_width = (bins.len() as f64) / bands as f64;
        let lag = sr as f64 / f0_hz;
        let mut row = Vec::with_capacity(bands);
        for b in 0..bands {
            let lo = (b as f64 * band_width).floor() as usize;
            let hi = ((b + 1) as f64 * band_width).floor() as usize;
            let hi = hi.max(lo + 1);
            let xb = band_limit(&bins, lo, hi);
            let band_energy: f64 = xb.iter().map(|v| v * v).sum();
            if band_energy <= 1e-10 * total_energy.max(1e-300) {
                row.push(1.0);
                continue;
            }
            let r = correlation_at_lag(&xb, lag).max(0.0);
            // A band of fractional width carries that fraction of independent
            // samples; shrink by one null-hypothesis standard deviation so
            // narrowband noise does not masquerade as periodic.
            let span = (win as f64 - lag - 2.0).max(1.0);
            let n_eff = (span * (hi - lo) as f64 / bins.len() as f64).max(4.0);
            let bias = 1.0 / n_eff.sqrt();
            let r_adj = ((r - bias) / (1.0 - bias)).max(0.0);
            row.push((1.0 - r_adj * r_adj).clamp(0.0, 1.0));
        }
        frames.push(row);
    }
    Ok(BandAperiodicity { frames, bands })
}
