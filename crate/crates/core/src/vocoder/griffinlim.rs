//! Griffin-Lim phase recovery: alternate between the target magnitudes and
//! the set of consistent spectrograms.

use super::VocoderError;
use crate::features::cepstrum::minimum_phase_spectrum;
use crate::signal::stft::{check_cola, istft, stft};
use crate::signal::{ComplexSpectrum, FrameConfig, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPhase {
    Zero,
    Random { seed: u64 },
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GriffinLimConfig {
    pub iterations: usize,
    pub frame: FrameConfig,
    pub init_phase: InitPhase,
    /// Stop early once the spectral-convergence error drops below this.
    pub tolerance: f64,
}

impl GriffinLimConfig {
    pub fn new(frame: FrameConfig) -> Self {
        GriffinLimConfig {
            iterations: 60,
            frame,
            init_phase: InitPhase::Zero,
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GriffinLimResult {
    pub wave: Waveform,
    /// Spectral-convergence error per iteration:
    /// ||  |STFT(x_i)| - A || / || A ||.
    pub errors: Vec<f64>,
}

fn spectral_convergence(spec: &ComplexSpectrum, target: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, trow) in spec.frames.iter().zip(target.iter()) {
        for (s, a) in row.iter().zip(trow.iter()) {
            let d = s.norm() - a;
            num += d * d;
            den += a * a;
        }
    }
    (num / den.max(1e-300)).sqrt()
}

fn with_target_magnitude(spec: &ComplexSpectrum, target: &[Vec<f64>]) -> ComplexSpectrum {
    let frames = spec
        .frames
        .iter()
        .zip(target.iter())
        .map(|(row, trow)| {
            row.iter()
                .zip(trow.iter())
                .map(|(s, a)| {
                    let m = s.norm();
                    if m > 1e-300 {
                        s * (a / m)
                    } else {
                        Complex64::new(*a, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    ComplexSpectrum {
        frames,
        bins: spec.bins,
    }
}

fn initial_spectrum(
    target: &[Vec<f64>],
    bins: usize,
    init: InitPhase,
) -> ComplexSpectrum {
    match init {
        InitPhase::Zero => ComplexSpectrum {
            frames: target
                .iter()
                .map(|row| row.iter().map(|a| Complex64::new(*a, 0.0)).collect())
                .collect(),
            bins,
        },
        InitPhase::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ComplexSpectrum {
                frames: target
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|a| {
                                let phi: f64 =
                                    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                                Complex64::from_polar(*a, phi)
                            })
                            .collect()
                    })
                    .collect(),
                bins,
            }
        }
        InitPhase::Minimum => minimum_phase_spectrum(target),
    }
}

/// Iterate from an explicit initial spectrum whose magnitudes already match
/// the target.
pub fn griffin_lim_from(
    init: ComplexSpectrum,
    target_amplitude: &[Vec<f64>],
    glc: &GriffinLimConfig,
    sample_rate: u32,
) -> Result<GriffinLimResult, VocoderError> {
    check_cola(&glc.frame).map_err(VocoderError::Signal)?;
    let mut wave = istft(&init, &glc.frame, sample_rate)?;
    let mut errors = Vec::with_capacity(glc.iterations);
    for _ in 0..glc.iterations {
        let spec = stft(&wave, &glc.frame)?;
        let e = spectral_convergence(&spec, target_amplitude);
        errors.push(e);
        if e <= glc.tolerance {
            break;
        }
        let projected = with_target_magnitude(&spec, target_amplitude);
        wave = istft(&projected, &glc.frame, sample_rate)?;
    }
    Ok(GriffinLimResult { wave, errors })
}

/// Recover a waveform whose STFT magnitude matches `target_amplitude`.
pub fn griffin_lim(
    target_amplitude: &[Vec<f64>],
    glc: &GriffinLimConfig,
    sample_rate: u32,
) -> Result<GriffinLimResult, VocoderError> {
    let bins = target_amplitude.first().map(|r| r.len()).unwrap_or(0);
    let init = initial_spectrum(target_amplitude, bins, glc.init_phase);
    griffin_lim_from(init, target_amplitude, glc, sample_rate)
}

/// Re-compute the amplitude spectrum of an existing waveform and run the
/// recovery initialized from that waveform's own phase.
pub fn phase_recovery_enhance(
    wave: &Waveform,
    glc: &GriffinLimConfig,
) -> Result<GriffinLimResult, VocoderError> {
    let spec = stft(wave, &glc.frame)?;
    let amplitude: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|row| row.iter().map(|c| c.norm()).collect())
        .collect();
    griffin_lim_from(spec, &amplitude, glc, wave.sample_rate)
}
