//! 255-level log-spaced F0 quantization with a dedicated unvoiced symbol.

use super::{F0Codebook, F0Track, FeatureError, QuantizedF0};

pub const VOICED_LEVELS: usize = 255;

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = (p / 100.0 * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Build a codebook from the voiced F0 values of a training set: log-spaced
/// levels between the 1st and 99th percentile.
pub fn build_codebook(tracks: &[&F0Track], levels: usize) -> Result<F0Codebook, FeatureError> {
    let mut voiced: Vec<f64> = tracks
        .iter()
        .flat_map(|t| t.f0.iter().copied())
        .filter(|f| *f > 0.0)
        .collect();
    if voiced.is_empty() {
        return Err(FeatureError::EmptyVoicedSet);
    }
    voiced.sort_by(|a, b| a.total_cmp(b));
    let lo = percentile(&voiced, 1.0);
    let hi = percentile(&voiced, 99.0);
    // Degenerate range (constant pitch): widen slightly so centers stay distinct.
    let (lo, hi) = if hi - lo < 1e-9 {
        (lo * 0.99, hi * 1.01)
    } else {
        (lo, hi)
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let log_centers = (0..levels)
        .map(|i| llo + (lhi - llo) * i as f64 / (levels - 1) as f64)
        .collect();
    Ok(F0Codebook { log_centers })
}

/// Nearest-level assignment on log-F0. Unvoiced frames map to level 0.
pub fn quantize_f0(track: &F0Track, codebook: &F0Codebook) -> QuantizedF0 {
    let levels = track
        .f0
        .iter()
        .map(|&f| {
            if f <= 0.0 {
                0u16
            } else {
                let lf = f.ln();
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (i, c) in codebook.log_centers.iter().enumerate() {
                    let d = (lf - c).abs();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                (best + 1) as u16
            }
        })
        .collect();
    QuantizedF0 {
        levels,
        codebook: codebook.clone(),
        frame_rate: track.frame_rate,
    }
}

/// Map levels back to the codebook centers; level 0 becomes unvoiced (0 Hz).
pub fn dequantize_f0(qf0: &QuantizedF0) -> F0Track {
    let f0 = qf0
        .levels
        .iter()
        .map(|&l| {
            if l == 0 {
                0.0
            } else {
                qf0.codebook.log_centers[(l - 1) as usize].exp()
            }
        })
        .collect();
    F0Track {
        f0,
        frame_rate: qf0.frame_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(f0: Vec<f64>) -> F0Track {
        F0Track {
            f0,
            frame_rate: 200.0,
        }
    }

    fn toy_codebook() -> F0Codebook {
        let t = track((0..500).map(|i| 80.0 + (i as f64) * 0.4).collect());
        build_codebook(&[&t], VOICED_LEVELS).unwrap()
    }

    #[test]
    fn empty_voiced_set_is_an_error() {
        let t = track(vec![0.0; 10]);
        assert!(matches!(
            build_codebook(&[&t], VOICED_LEVELS),
            Err(FeatureError::EmptyVoicedSet)
        ));
    }

    #[test]
    fn level_center_round_trips_exactly() {
        let cb = toy_codebook();
        let f = cb.log_centers[100].exp();
        let q = quantize_f0(&track(vec![f]), &cb);
        assert_eq!(q.levels[0], 101);
        let back = dequantize_f0(&q);
        assert!((back.f0[0] - f).abs() < 1e-12);
    }

    #[test]
    fn unvoiced_maps_to_level_zero_and_back() {
        let cb = toy_codebook();
        let q = quantize_f0(&track(vec![0.0, 150.0, 0.0]), &cb);
        assert_eq!(q.levels[0], 0);
        assert!(q.levels[1] > 0);
        assert_eq!(q.levels[2], 0);
        let back = dequantize_f0(&q);
        assert_eq!(back.f0[0], 0.0);
        assert!(back.f0[1] > 0.0);
    }

    #[test]
    fn quantize_dequantize_is_idempotent_for_every_level() {
        let cb = toy_codebook();
        let levels: Vec<u16> = (0..=VOICED_LEVELS as u16).collect();
        let q = QuantizedF0 {
            levels: levels.clone(),
            codebook: cb.clone(),
            frame_rate: 200.0,
        };
        let re = quantize_f0(&dequantize_f0(&q), &cb);
        assert_eq!(re.levels, levels);
    }

    /// Round-trip error bounded by half the log step (scan oracle).
    #[test]
    fn random_voiced_round_trip_within_half_step() {
        let cb = toy_codebook();
        let log_step = cb.log_centers[1] - cb.log_centers[0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f0: Vec<f64> = (0..1000)
            .map(|_| rng.gen_range(cb.log_centers[0]..*cb.log_centers.last().unwrap()).exp())
            .collect();
        let t = track(f0.clone());
        let back = dequantize_f0(&quantize_f0(&t, &cb));
        for (orig, deq) in f0.iter().zip(back.f0.iter()) {
            let err = (orig.ln() - deq.ln()).abs();
            assert!(err <= 0.5 * log_step + 1e-12, "log error {err}");
        }
    }
}
