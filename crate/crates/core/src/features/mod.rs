//! Acoustic feature chain: power spectrum -> warped cepstra, minimum-phase
//! inversion, F0 tracking and 255-level quantization, band aperiodicity.

pub mod aperiodicity;
pub mod cepstrum;
pub mod f0q;
pub mod pitch;
pub mod store;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cepstral order {m} must be < bin count {f}")]
    OrderTooLarge { m: usize, f: usize },
    #[error("sample rate {sr} Hz too low, need at least {need} Hz")]
    SampleRateTooLow { sr: u32, need: u32 },
    #[error("hop is not an integer: sample rate {sr} at frame rate {frame_rate}")]
    FractionalHop { sr: u32, frame_rate: f64 },
    #[error("no voiced frames available to build an F0 codebook")]
    EmptyVoicedSet,
    #[error("misaligned features: {0}")]
    Misaligned(String),
    #[error("signal: {0}")]
    Signal(#[from] crate::signal::SignalError),
}

/// Truncated (optionally frequency-warped) cepstra, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Cepstra {
    pub frames: Vec<Vec<f64>>,
    /// Coefficients per frame.
    pub order: usize,
    /// All-pass warping coefficient in (-1, 1); 0 disables warping.
    pub warp_alpha: f64,
}

impl Cepstra {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Per-frame fundamental frequency in Hz; 0 marks unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0: Vec<f64>,
    pub frame_rate: f64,
}

impl F0Track {
    pub fn voiced_count(&self) -> usize {
        self.f0.iter().filter(|v| **v > 0.0).count()
    }
}

/// Log-spaced voiced F0 levels; level 0 is reserved for unvoiced.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct F0Codebook {
    /// Natural-log centers of the voiced levels (levels 1..=len).
    pub log_centers: Vec<f64>,
}

/// F0 track quantized against a codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedF0 {
    /// Per-frame level in [0, codebook.len()]; 0 means unvoiced.
    pub levels: Vec<u16>,
    pub codebook: F0Codebook,
    pub frame_rate: f64,
}

/// Per-band aperiodic-to-total energy ratio in [0, 1], one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAperiodicity {
    pub frames: Vec<Vec<f64>>,
    pub bands: usize,
}

/// The per-frame feature bundle consumed by acoustic models and vocoders.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFrameSequence {
    pub mgc: Cepstra,
    pub bap: BandAperiodicity,
    pub f0: F0Track,
    pub qf0: QuantizedF0,
}

impl AcousticFrameSequence {
    pub fn new(
        mgc: Cepstra,
        bap: BandAperiodicity,
        f0: F0Track,
        qf0: QuantizedF0,
    ) -> Result<Self, FeatureError> {
        let n = mgc.frames.len();
        if bap.frames.len() != n || f0.f0.len() != n || qf0.levels.len() != n {
            return Err(FeatureError::Misaligned(format!(
                "mgc {} / bap {} / f0 {} / qf0 {}",
                n,
                bap.frames.len(),
                f0.f0.len(),
                qf0.levels.len()
            )));
        }
        Ok(AcousticFrameSequence { mgc, bap, f0, qf0 })
    }

    pub fn num_frames(&self) -> usize {
        self.mgc.frames.len()
    }

    /// Keep only the first `n` frames of every stream.
    pub fn truncate(&mut self, n: usize) {
        self.mgc.frames.truncate(n);
        self.bap.frames.truncate(n);
        self.f0.f0.truncate(n);
        self.qf0.levels.truncate(n);
    }
}

/// Run the whole analysis chain on one utterance and align the streams onto
/// a common frame count (the pitch/aperiodicity windows are longer than the
/// spectral ones, so the shortest stream wins).
pub fn extract_acoustic_features(
    wave: &crate::signal::Waveform,
    cfg: &store::ExtractionConfig,
    codebook: &F0Codebook,
) -> Result<AcousticFrameSequence, FeatureError> {
    let hop = cfg.pitch.hop(wave.sample_rate)?;
    let frame_cfg = crate::signal::FrameConfig::new(cfg.frame_length, hop, cfg.window)?;
    let spec = crate::signal::stft::stft(wave, &frame_cfg)?;
    let power = crate::signal::power_spectrum(&spec);
    let mgc = cepstrum::cepstral_analysis(&power, cfg.mgc_order, cfg.warp_alpha)?;
    let f0 = pitch::extract_f0(wave, &cfg.pitch)?;
    let bap = aperiodicity::estimate_band_aperiodicity(wave, &f0, cfg.bap_bands)?;
    let n = mgc.frames.len().min(f0.f0.len()).min(bap.frames.len());
    let mut mgc = mgc;
    let mut f0 = f0;
    let mut bap = bap;
    mgc.frames.truncate(n);
    f0.f0.truncate(n);
    bap.frames.truncate(n);
    let qf0 = f0q::quantize_f0(&f0, codebook);
    AcousticFrameSequence::new(mgc, bap, f0, qf0)
}
