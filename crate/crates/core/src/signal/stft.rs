//! Short-time transform pair used by Griffin-Lim and the IF diagnostics.

use super::dft::{dft_forward, dft_inverse};
use super::{frame_signal, ComplexSpectrum, FrameConfig, SignalError, Waveform};

/// Checks the weighted overlap-add condition used by [`istft`]: hop at most
/// half a frame and the periodized sum of squared windows bounded away from
/// zero everywhere.
pub fn check_cola(cfg: &FrameConfig) -> Result<(), SignalError> {
    if cfg.hop * 2 > cfg.frame_length {
        return Err(SignalError::NotCola(format!(
            "hop {} > frame_length {} / 2",
            cfg.hop, cfg.frame_length
        )));
    }
    let w = cfg.window.curve(cfg.frame_length);
    let mut min_sum = f64::INFINITY;
    for n in 0..cfg.hop {
        let mut s = 0.0;
        let mut i = n;
        while i < cfg.frame_length {
            s += w[i] * w[i];
            i += cfg.hop;
        }
        min_sum = min_sum.min(s);
    }
    if min_sum <= 1e-8 {
        return Err(SignalError::NotCola(format!(
            "squared-window overlap-add sum reaches {min_sum:.3e}"
        )));
    }
    Ok(())
}

pub fn stft(wave: &Waveform, cfg: &FrameConfig) -> Result<ComplexSpectrum, SignalError> {
    let frames = frame_signal(wave, cfg)?;
    Ok(ComplexSpectrum {
        frames: frames.iter().map(|f| dft_forward(f)).collect(),
        bins: cfg.bins(),
    })
}

/// Least-squares inverse STFT: per-frame inverse DFT, synthesis-windowed
/// overlap-add, normalized by the accumulated squared window.
pub fn istft(
    spec: &ComplexSpectrum,
    cfg: &FrameConfig,
    sample_rate: u32,
) -> Result<Waveform, SignalError> {
    check_cola(cfg)?;
    let n_frames = spec.frames.len();
    if n_frames == 0 {
        return Ok(Waveform::new(Vec::new(), sample_rate));
    }
    let win = cfg.window.curve(cfg.frame_length);
    let out_len = cfg.frame_length + (n_frames - 1) * cfg.hop;
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    for (m, bins) in spec.frames.iter().enumerate() {
        let frame = dft_inverse(bins);
        let start = m * cfg.hop;
        for (i, v) in frame.iter().enumerate() {
            out[start + i] += v * win[i];
            norm[start + i] += win[i] * win[i];
        }
    }
    // Where the window coverage is negligible (a handful of samples at the
    // very edges) the least-squares division would amplify noise instead of
    // reconstructing; emit silence there.
    for (o, n) in out.iter_mut().zip(norm.iter()) {
        if *n > 1e-6 {
            *o /= n;
        } else {
            *o = 0.0;
        }
    }
    Ok(Waveform::new(out, sample_rate))
}

/// Squared-window energy, the periodogram normalizer for this config.
pub fn window_energy(cfg: &FrameConfig) -> f64 {
    cfg.window.curve(cfg.frame_length).iter().map(|w| w * w).sum()
}

/// Power spectrum scaled by the window energy, so a unit-power signal reads
/// as a unit-level envelope.
pub fn periodogram(wave: &Waveform, cfg: &FrameConfig) -> Result<crate::signal::PowerSpectrum, SignalError> {
    let spec = stft(wave, cfg)?;
    let mut p = crate::signal::power_spectrum(&spec);
    let scale = 1.0 / window_energy(cfg);
    for row in &mut p.frames {
        for v in row {
            *v *= scale;
        }
    }
    Ok(p)
}
