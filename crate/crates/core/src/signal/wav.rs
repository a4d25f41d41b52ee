//! Mono RIFF WAV I/O, 16-bit integer and 32-bit float PCM.

use super::{SignalError, Waveform};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Float32,
}

pub fn read_wav(path: &Path) -> Result<Waveform, SignalError> {
    let reader =
        hound::WavReader::open(path).map_err(|e| SignalError::Wav(format!("{path:?}: {e}")))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(SignalError::Wav(format!(
            "{path:?}: expected mono, got {} channels",
            spec.channels
        )));
    }
    let samples: Result<Vec<f64>, _> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect(),
        (fmt, bits) => {
            return Err(SignalError::Wav(format!(
                "{path:?}: unsupported format {fmt:?}/{bits} bit"
            )))
        }
    };
    let samples = samples.map_err(|e| SignalError::Wav(format!("{path:?}: {e}")))?;
    Ok(Waveform::new(samples, spec.sample_rate))
}

pub fn write_wav(path: &Path, wave: &Waveform, format: WavFormat) -> Result<(), SignalError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: match format {
            WavFormat::Int16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Int16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| SignalError::Wav(e.to_string()))?;
    match format {
        WavFormat::Int16 => {
            for &s in &wave.samples {
                let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                writer
                    .write_sample(v)
                    .map_err(|e| SignalError::Wav(e.to_string()))?;
            }
        }
        WavFormat::Float32 => {
            for &s in &wave.samples {
                writer
                    .write_sample(s as f32)
                    .map_err(|e| SignalError::Wav(e.to_string()))?;
            }
        }
    }
    writer
        .finalize()
        .map_err(|e| SignalError::Wav(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float32_round_trip_is_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let wave = Waveform::new(
            (0..100).map(|i| ((i as f64) / 50.0 - 1.0) * 0.9).collect(),
            48000,
        );
        write_wav(&path, &wave, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 48000);
        assert_eq!(back.len(), wave.len());
        for (a, b) in wave.samples.iter().zip(back.samples.iter()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn int16_round_trip_within_quantum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let wave = Waveform::new(
            (0..100)
                .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 25.0).sin() * 0.5)
                .collect(),
            16000,
        );
        write_wav(&path, &wave, WavFormat::Int16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in wave.samples.iter().zip(back.samples.iter()) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        std::fs::write(&path, b"RIFF-not-really-a-wav").unwrap();
        assert!(matches!(read_wav(&path), Err(SignalError::Wav(_))));
    }
}
