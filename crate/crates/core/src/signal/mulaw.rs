//! Mu-law companding with uniform mid-tread quantization.
//!
//! Samples are companded to [-1, 1] with `sign(x) * ln(1 + mu|x|) / ln(1 + mu)`
//! and mapped to `L` levels so that x = 0 lands exactly on level `L / 2`.

use super::{SignalError, Waveform};

pub const DEFAULT_LEVELS: u32 = 1024;
pub const DEFAULT_MU: f64 = 1023.0;

/// Waveform quantized to `levels` mu-law levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWave {
    pub levels: Vec<u16>,
    pub level_count: u32,
    pub mu: f64,
    pub sample_rate: u32,
}

impl QuantizedWave {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// One-hot encoding of a single level.
    pub fn one_hot(&self, index: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.level_count as usize];
        v[self.levels[index] as usize] = 1.0;
        v
    }
}

pub fn compand(x: f64, mu: f64) -> f64 {
    x.signum() * (1.0 + mu * x.abs()).ln() / (1.0 + mu).ln()
}

pub fn expand(y: f64, mu: f64) -> f64 {
    y.signum() * ((1.0 + mu).powf(y.abs()) - 1.0) / mu
}

/// Mid-tread level for a companded value in [-1, 1].
fn level_of(y: f64, level_count: u32) -> u16 {
    let half = level_count as f64 / 2.0;
    let l = (y * half).round() + half;
    l.clamp(0.0, level_count as f64 - 1.0) as u16
}

/// Companded bin center of a level.
fn center_of(level: u16, level_count: u32) -> f64 {
    let half = level_count as f64 / 2.0;
    (level as f64 - half) / half
}

/// Quantize a waveform. Samples outside [-1, 1] are clipped; the second
/// return value counts them so callers can log the event.
pub fn mu_law_encode(wave: &Waveform, level_count: u32, mu: f64) -> (QuantizedWave, usize) {
    let mut clipped = 0usize;
    let levels = wave
        .samples
        .iter()
        .map(|&s| {
            let s = if s > 1.0 || s < -1.0 {
                clipped += 1;
                s.clamp(-1.0, 1.0)
            } else {
                s
            };
            level_of(compand(s, mu), level_count)
        })
        .collect();
    (
        QuantizedWave {
            levels,
            level_count,
            mu,
            sample_rate: wave.sample_rate,
        },
        clipped,
    )
}

/// Expand level centers back to samples.
pub fn mu_law_decode(q: &QuantizedWave) -> Result<Waveform, SignalError> {
    let mut samples = Vec::with_capacity(q.levels.len());
    for &l in &q.levels {
        if l as u32 >= q.level_count {
            return Err(SignalError::LevelOutOfRange {
                level: l as u32,
                levels: q.level_count,
            });
        }
        samples.push(expand(center_of(l, q.level_count), q.mu));
    }
    Ok(Waveform::new(samples, q.sample_rate))
}

/// Decode a single level with the given codebook size.
pub fn decode_level(level: u16, level_count: u32, mu: f64) -> f64 {
    expand(center_of(level, level_count), mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave_of(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 16000)
    }

    #[test]
    fn zero_maps_to_midpoint() {
        let (q, clipped) = mu_law_encode(&wave_of(vec![0.0]), 1024, 1023.0);
        assert_eq!(q.levels[0], 512);
        assert_eq!(clipped, 0);
        let back = mu_law_decode(&q).unwrap();
        assert_eq!(back.samples[0], 0.0);
    }

    #[test]
    fn range_endpoints() {
        let (q, _) = mu_law_encode(&wave_of(vec![1.0, -1.0]), 1024, 1023.0);
        assert_eq!(q.levels[0], 1023);
        assert_eq!(q.levels[1], 0);
    }

    #[test]
    fn out_of_range_is_clipped_and_counted() {
        let (q, clipped) = mu_law_encode(&wave_of(vec![1.5, -2.0, 0.5]), 1024, 1023.0);
        assert_eq!(clipped, 2);
        assert_eq!(q.levels[0], 1023);
        assert_eq!(q.levels[1], 0);
    }

    #[test]
    fn decode_rejects_out_of_range_levels() {
        let q = QuantizedWave {
            levels: vec![300],
            level_count: 256,
            mu: 255.0,
            sample_rate: 16000,
        };
        assert!(matches!(
            mu_law_decode(&q),
            Err(SignalError::LevelOutOfRange { .. })
        ));
    }

    /// Exhaustive scan oracle: companded-domain round-trip error stays within
    /// one quantization step, and encoding is monotone.
    #[test]
    fn exhaustive_scan_round_trip_and_monotone() {
        let level_count = 1024u32;
        let mu = 1023.0;
        let step = 2.0 / level_count as f64;
        let n = 10_001;
        let mut prev_level = 0u16;
        for i in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let (q, _) = mu_law_encode(&wave_of(vec![x]), level_count, mu);
            let level = q.levels[0];
            if i > 0 {
                assert!(level >= prev_level, "encode not monotone at x={x}");
            }
            prev_level = level;
            let decoded = mu_law_decode(&q).unwrap().samples[0];
            // One step in the companded domain...
            let companded_err = (compand(x, mu) - compand(decoded, mu)).abs();
            assert!(
                companded_err <= step + 1e-12,
                "companded error {companded_err} > step {step} at x={x}"
            );
            // ...mapped back: x must sit within the level's widened bin.
            let c = center_of(level, level_count);
            let lo = expand((c - step).max(-1.0), mu);
            let hi = expand((c + step).min(1.0), mu);
            assert!(
                x >= lo - 1e-12 && x <= hi + 1e-12,
                "x={x} outside decoded bin [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn one_hot_has_single_one() {
        let (q, _) = mu_law_encode(&wave_of(vec![0.25]), 1024, 1023.0);
        let v = q.one_hot(0);
        assert_eq!(v.len(), 1024);
        assert_eq!(v.iter().filter(|x| **x == 1.0).count(), 1);
        assert_eq!(v[q.levels[0] as usize], 1.0);
    }
}
