//! Deterministic waveform generation: source-filter synthesis with mixed
//! excitation, and Griffin-Lim phase recovery.

pub mod griffinlim;

use crate::features::cepstrum::{cepstra_to_amplitude, minimum_phase_spectrum};
use crate::features::{BandAperiodicity, Cepstra, F0Track, FeatureError};
use crate::signal::dft::{dft_forward, dft_inverse};
use crate::signal::stft::{istft, stft};
use crate::signal::{ComplexSpectrum, FrameConfig, SignalError, Waveform, Window};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VocoderError {
    #[error("misaligned features: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Frame-synchronous synthesis geometry plus the excitation noise seed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthesisConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop: usize,
    pub noise_seed: u64,
}

impl SynthesisConfig {
    /// Hop pinned to the 200 Hz feature frame rate.
    pub fn at_frame_rate(
        sample_rate: u32,
        frame_length: usize,
        frame_rate: f64,
        noise_seed: u64,
    ) -> Result<Self, VocoderError> {
        let hop = sample_rate as f64 / frame_rate;
        if hop.fract() != 0.0 || hop < 1.0 {
            return Err(VocoderError::Misaligned(format!(
                "hop {sample_rate}/{frame_rate} is not a whole number of samples"
            )));
        }
        Ok(SynthesisConfig {
            sample_rate,
            frame_length,
            hop: hop as usize,
            noise_seed,
        })
    }

    pub fn bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    pub fn frame_config(&self) -> FrameConfig {
        FrameConfig {
            frame_length: self.frame_length,
            hop: self.hop,
            window: Window::Hann,
        }
    }

    /// Samples needed so exactly `n` analysis frames fit.
    pub fn span(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            self.frame_length + (n_frames - 1) * self.hop
        }
    }
}

/// Energy-preserving band blend weights: periodic^2 + noise^2 = 1.
pub fn band_weights(bap: f64) -> (f64, f64) {
    let b = bap.clamp(0.0, 1.0);
    ((1.0 - b).sqrt(), b.sqrt())
}

/// Pulse train with a fractional-period phase accumulator, one pulse per
/// period crossing, amplitude sqrt(period) so its average power is about 1.
fn pulse_train(f0: &F0Track, cfg: &SynthesisConfig) -> Vec<f64> {
    let n = f0.f0.len();
    let len = cfg.span(n);
    let mut out = vec![0.0; len];
    let sr = cfg.sample_rate as f64;
    let mut phase = 1.0f64; // fire immediately at voicing onset
    for (i, v) in out.iter_mut().enumerate() {
        let frame = (i / cfg.hop).min(n - 1);
        let hz = f0.f0[frame];
        if hz <= 0.0 {
            phase = 1.0;
            continue;
        }
        phase += hz / sr;
        if phase >= 1.0 {
            phase -= 1.0;
            *v = (sr / hz).sqrt();
        }
    }
    out
}

fn gaussian_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Frequency-domain mixed excitation: per band b, sqrt(1-bap_b) of the pulse
/// spectrum plus sqrt(bap_b) of the noise spectrum. Unvoiced frames are pure
/// noise whatever the BAP says.
pub fn mixed_excitation(
    f0: &F0Track,
    bap: &BandAperiodicity,
    cfg: &SynthesisConfig,
) -> Result<Waveform, VocoderError> {
    let n = f0.f0.len();
    if bap.frames.len() != n {
        return Err(VocoderError::Misaligned(format!(
            "f0 {} frames vs bap {}",
            n,
            bap.frames.len()
        )));
    }
    if n == 0 {
        return Ok(Waveform::new(Vec::new(), cfg.sample_rate));
    }
    let frame_cfg = cfg.frame_config();
    let pulses = Waveform::new(pulse_train(f0, cfg), cfg.sample_rate);
    let noise = Waveform::new(gaussian_noise(cfg.span(n), cfg.noise_seed), cfg.sample_rate);
    let spec_p = stft(&pulses, &frame_cfg)?;
    let spec_n = stft(&noise, &frame_cfg)?;
    let bins = frame_cfg.bins();
    let bands = bap.bands;
    let mut frames = Vec::with_capacity(spec_p.frames.len());
    for (i, (pf, nf)) in spec_p.frames.iter().zip(spec_n.frames.iter()).enumerate() {
        let voiced = f0.f0[i.min(n - 1)] > 0.0;
        let row = &bap.frames[i.min(n - 1)];
        let mixed: Vec<_> = (0..bins)
            .map(|f| {
                let band = (f * bands / bins).min(bands - 1);
                let b = if voiced { row[band] } else { 1.0 };
                let (wp, wn) = band_weights(b);
                pf[f] * wp + nf[f] * wn
            })
            .collect();
        frames.push(mixed);
    }
    let spec = ComplexSpectrum { frames, bins };
    Ok(istft(&spec, &frame_cfg, cfg.sample_rate)?)
}

/// Per-frame minimum-phase filtering of an excitation, overlap-added.
pub fn filter_with_spectra(
    excitation: &Waveform,
    spectra: &ComplexSpectrum,
    cfg: &SynthesisConfig,
) -> Result<Waveform, VocoderError> {
    let frame_cfg = cfg.frame_config();
    let spec_e = stft(excitation, &frame_cfg)?;
    let n = spec_e.frames.len().min(spectra.frames.len());
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let ef = &spec_e.frames[i];
        let hf = &spectra.frames[i];
        frames.push((0..frame_cfg.bins()).map(|f| ef[f] * hf[f]).collect());
    }
    let spec = ComplexSpectrum {
        frames,
        bins: frame_cfg.bins(),
    };
    Ok(istft(&spec, &frame_cfg, cfg.sample_rate)?)
}

/// Full source-filter synthesis: mixed excitation shaped by the minimum-phase
/// spectra reconstructed from the cepstra.
pub fn source_filter_synthesize(
    mgc: &Cepstra,
    f0: &F0Track,
    bap: &BandAperiodicity,
    cfg: &SynthesisConfig,
) -> Result<Waveform, VocoderError> {
    let n = mgc.frames.len();
    if f0.f0.len() != n || bap.frames.len() != n {
        return Err(VocoderError::Misaligned(format!(
            "mgc {} / f0 {} / bap {}",
            n,
            f0.f0.len(),
            bap.frames.len()
        )));
    }
    let excitation = mixed_excitation(f0, bap, cfg)?;
    let amplitude = cepstra_to_amplitude(mgc, cfg.bins());
    let spectra = minimum_phase_spectrum(&amplitude);
    let out = filter_with_spectra(&excitation, &spectra, cfg)?;
    debug_assert!(out.assert_finite());
    Ok(out)
}

/// Impulse response of a two-resonance filter evaluated on the one-sided bin
/// grid. Shared by tests and the synthetic dataset generator.
pub fn formant_amplitude(bins: usize, sample_rate: u32, formants: &[(f64, f64)]) -> Vec<f64> {
    let t = (bins - 1) * 2;
    (0..bins)
        .map(|k| {
            let freq = k as f64 * sample_rate as f64 / t as f64;
            let mut a = 1.0;
            for &(fc, bw) in formants {
                // Resonance magnitude of a two-pole section.
                let num = bw * bw;
                let den = (freq - fc) * (freq - fc) + bw * bw;
                a *= 1.0 + 8.0 * num / den;
            }
            a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::cepstrum::cepstral_analysis;
    use crate::signal::power_spectrum;

    fn cfg_16k() -> SynthesisConfig {
        SynthesisConfig::at_frame_rate(16000, 512, 200.0, 7).unwrap()
    }

    fn constant_f0(hz: f64, n: usize) -> F0Track {
        F0Track {
            f0: vec![hz; n],
            frame_rate: 200.0,
        }
    }

    fn constant_bap(v: f64, n: usize, bands: usize) -> BandAperiodicity {
        BandAperiodicity {
            frames: vec![vec![v; bands]; n],
            bands,
        }
    }

    #[test]
    fn band_weights_partition_energy() {
        for i in 0..=100 {
            let b = i as f64 / 100.0;
            let (wp, wn) = band_weights(b);
            assert!((wp * wp + wn * wn - 1.0).abs() < 1e-12);
        }
    }

    /// Harmonic-peak oracle: a pure-pulse excitation concentrates energy at
    /// multiples of f0.
    #[test]
    fn zero_bap_gives_harmonic_spectrum() {
        let cfg = cfg_16k();
        let n = 100;
        let exc = mixed_excitation(&constant_f0(200.0, n), &constant_bap(0.0, n, 25), &cfg).unwrap();
        let spec = stft(&exc, &cfg.frame_config()).unwrap();
        let p = power_spectrum(&spec);
        // Bin spacing is 16000/512 = 31.25 Hz; f0 = 200 Hz -> every 6.4 bins.
        let frame = &p.frames[50];
        let harmonic_bins = [6, 13, 19, 26, 32];
        let off_bins = [3, 10, 16, 22, 29];
        let on: f64 = harmonic_bins
            .iter()
            .map(|&b| frame[b - 1..=b + 1].iter().cloned().fold(0.0, f64::max))
            .sum();
        let off: f64 = off_bins.iter().map(|&b| frame[b]).sum();
        assert!(on > 20.0 * off, "harmonics {on} vs valleys {off}");
    }

    #[test]
    fn full_bap_is_noise() {
        let cfg = cfg_16k();
        let n = 100;
        let exc = mixed_excitation(&constant_f0(200.0, n), &constant_bap(1.0, n, 25), &cfg).unwrap();
        // Normalized autocorrelation at the pitch lag should be small.
        let x = &exc.samples[cfg.frame_length..cfg.frame_length + 4000];
        let lag = 80usize;
        let mut num = 0.0;
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for t in 0..x.len() - lag {
            num += x[t] * x[t + lag];
            e0 += x[t] * x[t];
            e1 += x[t + lag] * x[t + lag];
        }
        let r = num / (e0 * e1).sqrt();
        assert!(r.abs() < 0.3, "noise autocorrelation {r}");
    }

    #[test]
    fn unvoiced_frames_ignore_bap_values() {
        let cfg = cfg_16k();
        let n = 40;
        let f0 = constant_f0(0.0, n);
        let a = mixed_excitation(&f0, &constant_bap(0.0, n, 25), &cfg).unwrap();
        let b = mixed_excitation(&f0, &constant_bap(1.0, n, 25), &cfg).unwrap();
        assert_eq!(a.samples, b.samples, "unvoiced output must not depend on BAP");
    }

    #[test]
    fn flat_cepstra_are_a_unit_filter() {
        let cfg = cfg_16k();
        let n = 40;
        let f0 = constant_f0(125.0, n);
        let bap = constant_bap(0.0, n, 25);
        let exc = mixed_excitation(&f0, &bap, &cfg).unwrap();
        let mgc = Cepstra {
            frames: vec![vec![0.0; 30]; n],
            order: 30,
            warp_alpha: 0.0,
        };
        let out = source_filter_synthesize(&mgc, &f0, &bap, &cfg).unwrap();
        let lo = cfg.frame_length;
        let hi = out.len().min(exc.len()) - cfg.frame_length;
        for i in lo..hi {
            assert!(
                (out.samples[i] - exc.samples[i]).abs() < 1e-6,
                "sample {i}: {} vs {}",
                out.samples[i],
                exc.samples[i]
            );
        }
    }

    #[test]
    fn silence_features_synthesize_silence() {
        let cfg = cfg_16k();
        let n = 30;
        let f0 = constant_f0(0.0, n);
        let bap = constant_bap(1.0, n, 25);
        // log amplitude -80: essentially silence
        let mut frames = vec![vec![0.0; 30]; n];
        for f in &mut frames {
            f[0] = -80.0;
        }
        let mgc = Cepstra {
            frames,
            order: 30,
            warp_alpha: 0.0,
        };
        let out = source_filter_synthesize(&mgc, &f0, &bap, &cfg).unwrap();
        assert!(out.samples.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn synthesis_is_linear_in_excitation_amplitude() {
        let cfg = cfg_16k();
        let n = 30;
        let f0 = constant_f0(110.0, n);
        let bap = constant_bap(0.3, n, 25);
        let exc = mixed_excitation(&f0, &bap, &cfg).unwrap();
        let mut exc2 = exc.clone();
        for v in &mut exc2.samples {
            *v *= 2.5;
        }
        let mgc = Cepstra {
            frames: vec![vec![0.4, 0.2, -0.1]; n],
            order: 3,
            warp_alpha: 0.0,
        };
        let amp = cepstra_to_amplitude(&mgc, cfg.bins());
        let spectra = minimum_phase_spectrum(&amp);
        let y1 = filter_with_spectra(&exc, &spectra, &cfg).unwrap();
        let y2 = filter_with_spectra(&exc2, &spectra, &cfg).unwrap();
        for (a, b) in y1.samples.iter().zip(y2.samples.iter()) {
            assert!((b - 2.5 * a).abs() < 1e-8);
        }
    }

    /// Envelope via harmonically smoothed power followed by the cepstral
    /// chain; shared analysis for both sides of the comparison.
    fn envelope_of(wave: &Waveform, cfg: &SynthesisConfig, f0_hz: f64) -> Vec<Vec<f64>> {
        let frame_cfg = cfg.frame_config();
        let p = power_spectrum(&stft(wave, &frame_cfg).unwrap());
        let bin_hz = cfg.sample_rate as f64 / cfg.frame_length as f64;
        let width = (1.25 * f0_hz / bin_hz).ceil() as usize;
        let smoothed = crate::features::cepstrum::smooth_power(&p, width);
        let mgc = cepstral_analysis(&smoothed, 40, 0.0).unwrap();
        cepstra_to_amplitude(&mgc, cfg.bins())
    }

    /// Analysis-synthesis oracle: a synthetic two-formant vowel keeps its
    /// spectral envelope through the full chain.
    #[test]
    fn vowel_analysis_synthesis_preserves_the_envelope() {
        let cfg = cfg_16k();
        let n = 120;
        let f0 = constant_f0(120.0, n);
        let bap0 = constant_bap(0.0, n, 25);
        let exc = mixed_excitation(&f0, &bap0, &cfg).unwrap();
        let amp = formant_amplitude(cfg.bins(), cfg.sample_rate, &[(700.0, 130.0), (1200.0, 170.0)]);
        let vowel_spec = minimum_phase_spectrum(&vec![amp.clone(); n]);
        let vowel = filter_with_spectra(&exc, &vowel_spec, &cfg).unwrap();

        // Analyze the vowel and resynthesize from its envelope cepstra.
        let frame_cfg = cfg.frame_config();
        let p = power_spectrum(&stft(&vowel, &frame_cfg).unwrap());
        let bin_hz = cfg.sample_rate as f64 / cfg.frame_length as f64;
        let width = (1.25 * 120.0 / bin_hz).ceil() as usize;
        let smoothed = crate::features::cepstrum::smooth_power(&p, width);
        let mgc = cepstral_analysis(&smoothed, 40, 0.0).unwrap();
        let n2 = mgc.frames.len();
        let resynth = source_filter_synthesize(
            &mgc,
            &constant_f0(120.0, n2),
            &constant_bap(0.0, n2, 25),
            &cfg,
        )
        .unwrap();

        let env1 = envelope_of(&vowel, &cfg, 120.0);
        let env2 = envelope_of(&resynth, &cfg, 120.0);
        let frames = env2.len().min(env1.len());
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 10..frames - 10 {
            for f in 1..cfg.bins() - 1 {
                let db = 20.0 * (env1[i][f].max(1e-10) / env2[i][f].max(1e-10)).log10();
                acc += db * db;
                count += 1;
            }
        }
        let lsd = (acc / count as f64).sqrt();
        assert!(lsd < 3.0, "log-spectral distortion {lsd} dB");
    }
}
