//! Autocorrelation pitch tracker.

use super::{F0Track, FeatureError};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub frame_rate: f64,
    /// Normalized-autocorrelation peak below this is unvoiced.
    pub voicing_threshold: f64,
    /// Frame RMS below this is treated as silence.
    pub silence_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f_min: 55.0,
            f_max: 600.0,
            frame_rate: 200.0,
            voicing_threshold: 0.3,
            silence_threshold: 1e-4,
        }
    }
}

impl PitchConfig {
    /// Analysis window: 2.5 periods of the lowest trackable F0.
    pub fn window_len(&self, sample_rate: u32) -> usize {
        (2.5 * sample_rate as f64 / self.f_min).ceil() as usize
    }

    pub fn hop(&self, sample_rate: u32) -> Result<usize, FeatureError> {
        let hop = sample_rate as f64 / self.frame_rate;
        if hop.fract() != 0.0 || hop < 1.0 {
            return Err(FeatureError::FractionalHop {
                sr: sample_rate,
                frame_rate: self.frame_rate,
            });
        }
        Ok(hop as usize)
    }
}

/// Normalized autocorrelation of `x` at integer lag `tau`.
fn nac(x: &[f64], tau: usize) -> f64 {
    let n = x.len() - tau;
    let mut num = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for t in 0..n {
        num += x[t] * x[t + tau];
        e0 += x[t] * x[t];
        e1 += x[t + tau] * x[t + tau];
    }
    let den = (e0 * e1).sqrt();
    if den <= 1e-12 {
        0.0
    } else {
        num / den
    }
}

/// Extract a per-frame F0 track. Unvoiced frames carry 0.
pub fn extract_f0(wave: &Waveform, cfg: &PitchConfig) -> Result<F0Track, FeatureError> {
    let sr = wave.sample_rate;
    let need = (4.0 * cfg.f_max).ceil() as u32;
    if sr < need {
        return Err(FeatureError::SampleRateTooLow { sr, need });
    }
    let hop = cfg.hop(sr)?;
    let win = cfg.window_len(sr);
    let lag_min = (sr as f64 / cfg.f_max).floor().max(2.0) as usize;
    let lag_max = ((sr as f64 / cfg.f_min).ceil() as usize).min(win - 2);

    let n_frames = if wave.len() < win {
        0
    } else {
        (wave.len() - win) / hop + 1
    };
    let mut f0 = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let seg = &wave.samples[i * hop..i * hop + win];
        let mean = seg.iter().sum::<f64>() / win as f64;
        let x: Vec<f64> = seg.iter().map(|v| v - mean).collect();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / win as f64).sqrt();
        if rms < cfg.silence_threshold {
            f0.push(0.0);
            continue;
        }
        let r: Vec<f64> = (lag_min..=lag_max).map(|tau| nac(&x, tau)).collect();
        let r_max = r.iter().cloned().fold(f64::MIN, f64::max);
        if r_max < cfg.voicing_threshold {
            f0.push(0.0);
            continue;
        }
        // First local peak close to the global maximum; avoids locking onto
        // a period multiple.
        let accept = (0.85 * r_max).max(cfg.voicing_threshold);
        let mut best = None;
        for j in 1..r.len().saturating_sub(1) {
            if r[j] >= accept && r[j] >= r[j - 1] && r[j] >= r[j + 1] {
                best = Some(j);
                break;
            }
        }
        let j = match best {
            Some(j) => j,
            None => {
                // Monotone edge case: fall back to the global maximum.
                r.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(j, _)| j)
                    .unwrap()
            }
        };
        // Parabolic refinement around the winning lag.
        let tau = (lag_min + j) as f64
            + if j > 0 && j + 1 < r.len() {
                let denom = r[j - 1] - 2.0 * r[j] + r[j + 1];
                if denom.abs() > 1e-12 {
                    (0.5 * (r[j - 1] - r[j + 1]) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else {
                0.0
            };
        f0.push((sr as f64 / tau).clamp(cfg.f_min, cfg.f_max));
    }
    Ok(F0Track {
        f0,
        frame_rate: cfg.frame_rate,
    })
}
