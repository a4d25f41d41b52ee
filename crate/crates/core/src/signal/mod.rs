//! Deterministic DSP primitives: framing, windowing, DFT, spectra, STFT/ISTFT,
//! mu-law companding, WAV I/O.

pub mod dft;
pub mod mulaw;
pub mod stft;
pub mod wav;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("waveform too short: {len} samples, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("invalid frame config: {0}")]
    BadConfig(String),
    #[error("stft config does not satisfy overlap-add reconstruction: {0}")]
    NotCola(String),
    #[error("quantized level {level} out of range for {levels} levels")]
    LevelOutOfRange { level: u32, levels: u32 },
    #[error("wav: {0}")]
    Wav(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono audio signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let e: f64 = self.samples.iter().map(|s| s * s).sum();
        (e / self.samples.len() as f64).sqrt()
    }

    pub fn assert_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
    Hamming,
}

impl Window {
    /// Window curve of length `n` (periodic form, suited for spectral analysis
    /// and overlap-add).
    pub fn curve(&self, n: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Hamming => (0..n)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Frame segmentation parameters for short-time analysis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrameConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl FrameConfig {
    pub fn new(frame_length: usize, hop: usize, window: Window) -> Result<Self, SignalError> {
        if frame_length == 0 || hop == 0 || hop > frame_length {
            return Err(SignalError::BadConfig(format!(
                "need 0 < hop <= frame_length, got frame_length={frame_length} hop={hop}"
            )));
        }
        Ok(FrameConfig {
            frame_length,
            hop,
            window,
        })
    }

    /// Number of full frames that fit in `len` samples. Frames that do not
    /// fit entirely are dropped.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_length {
            0
        } else {
            (len - self.frame_length) / self.hop + 1
        }
    }

    /// One-sided spectral bin count for this frame length.
    pub fn bins(&self) -> usize {
        self.frame_length / 2 + 1
    }
}

/// Complex short-time spectrum, one frame per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub frames: Vec<Vec<rustfft::num_complex::Complex64>>,
    /// One-sided bin count, `frame_length / 2 + 1`.
    pub bins: usize,
}

impl ComplexSpectrum {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Per-frame nonnegative power values.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub frames: Vec<Vec<f64>>,
    pub bins: usize,
}

/// Slice a waveform into windowed frames. Frames that do not fit are dropped;
/// no implicit padding.
pub fn frame_signal(wave: &Waveform, cfg: &FrameConfig) -> Result<Vec<Vec<f64>>, SignalError> {
    if wave.len() < cfg.frame_length {
        return Err(SignalError::TooShort {
            len: wave.len(),
            need: cfg.frame_length,
        });
    }
    let win = cfg.window.curve(cfg.frame_length);
    let n = cfg.frame_count(wave.len());
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * cfg.hop;
        let frame: Vec<f64> = wave.samples[start..start + cfg.frame_length]
            .iter()
            .zip(win.iter())
            .map(|(s, w)| s * w)
            .collect();
        frames.push(frame);
    }
    Ok(frames)
}

/// Elementwise squared modulus of a complex spectrum.
pub fn power_spectrum(spec: &ComplexSpectrum) -> PowerSpectrum {
    PowerSpectrum {
        frames: spec
            .frames
            .iter()
            .map(|row| row.iter().map(|c| c.re * c.re + c.im * c.im).collect())
            .collect(),
        bins: spec.bins,
    }
}
