//! On-disk feature store: one binary file per utterance plus a JSON sidecar
//! describing how the features were extracted.
//!
//! Acoustic file layout (all little-endian):
//!   magic "VBAF", version u32, n_frames u32, mgc_order u32, bap_bands u32,
//!   frame_rate f32, then row-major f32 matrices MGC, BAP, F0, QF0.
//!
//! Linguistic file layout:
//!   magic "VBLF", version u32, n_frames u32, dim u32, frame_rate f32,
//!   then one row-major f32 matrix.

use super::pitch::PitchConfig;
use super::{
    AcousticFrameSequence, BandAperiodicity, Cepstra, F0Codebook, F0Track, QuantizedF0,
};
use crate::signal::Window;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const ACOUSTIC_MAGIC: &[u8; 4] = b"VBAF";
const LINGUISTIC_MAGIC: &[u8; 4] = b"VBLF";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

/// Everything that determined the numeric content of a feature file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExtractionConfig {
    pub frame_length: usize,
    pub window: Window,
    pub mgc_order: usize,
    pub warp_alpha: f64,
    pub bap_bands: usize,
    pub pitch: PitchConfig,
}

impl ExtractionConfig {
    /// Defaults for a given sample rate: 25 ms frames rounded up to a power
    /// of two, order-60 cepstra warped by 0.55, 25 bands.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let raw = (0.025 * sample_rate as f64).ceil() as usize;
        let frame_length = raw.next_power_of_two();
        ExtractionConfig {
            frame_length,
            window: Window::Hann,
            mgc_order: 60,
            warp_alpha: 0.55,
            bap_bands: 25,
            pitch: PitchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sidecar {
    pub config: ExtractionConfig,
    pub codebook: F0Codebook,
    /// Hash of the source audio plus config; lets re-runs skip fresh files.
    pub source_hash: String,
}

pub fn sidecar_path(feature_path: &Path) -> PathBuf {
    let mut os = feature_path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f32(w: &mut impl Write, v: f32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> std::io::Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn write_matrix(w: &mut impl Write, rows: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in rows {
        write_f32(w, v as f32)?;
    }
    Ok(())
}

fn read_matrix(r: &mut impl Read, n: usize, m: usize) -> std::io::Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(m);
        for _ in 0..m {
            row.push(read_f32(r)? as f64);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_features(
    path: &Path,
    seq: &AcousticFrameSequence,
    sidecar: &Sidecar,
) -> Result<(), StoreError> {
    let n = seq.num_frames();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(ACOUSTIC_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, n as u32)?;
    write_u32(&mut w, seq.mgc.order as u32)?;
    write_u32(&mut w, seq.bap.bands as u32)?;
    write_f32(&mut w, seq.f0.frame_rate as f32)?;
    write_matrix(&mut w, seq.mgc.frames.iter().flatten().copied())?;
    write_matrix(&mut w, seq.bap.frames.iter().flatten().copied())?;
    write_matrix(&mut w, seq.f0.f0.iter().copied())?;
    write_matrix(&mut w, seq.qf0.levels.iter().map(|l| *l as f64))?;
    w.flush()?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_vec_pretty(sidecar)?,
    )?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<(AcousticFrameSequence, Sidecar), StoreError> {
    let sidecar: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != ACOUSTIC_MAGIC {
        return Err(StoreError::Format {
            path: path.to_owned(),
            reason: format!("bad magic {magic:?}"),
        });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(StoreError::Format {
            path: path.to_owned(),
            reason: format!("unsupported version {version}"),
        });
    }
    let n = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    let b = read_u32(&mut r)? as usize;
    let frame_rate = read_f32(&mut r)? as f64;
    let mgc = Cepstra {
        frames: read_matrix(&mut r, n, m)?,
        order: m,
        warp_alpha: sidecar.config.warp_alpha,
    };
    let bap = BandAperiodicity {
        frames: read_matrix(&mut r, n, b)?,
        bands: b,
    };
    let f0 = F0Track {
        f0: read_matrix(&mut r, n, 1)?.into_iter().map(|r| r[0]).collect(),
        frame_rate,
    };
    let qf0 = QuantizedF0 {
        levels: read_matrix(&mut r, n, 1)?
            .into_iter()
            .map(|r| r[0] as u16)
            .collect(),
        codebook: sidecar.codebook.clone(),
        frame_rate,
    };
    let seq = AcousticFrameSequence::new(mgc, bap, f0, qf0).map_err(|e| StoreError::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    Ok((seq, sidecar))
}

/// Per-frame linguistic input vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticMatrix {
    pub frames: Vec<Vec<f64>>,
    pub dim: usize,
    pub frame_rate: f64,
}

pub fn write_linguistic(path: &Path, m: &LinguisticMatrix) -> Result<(), StoreError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(LINGUISTIC_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, m.frames.len() as u32)?;
    write_u32(&mut w, m.dim as u32)?;
    write_f32(&mut w, m.frame_rate as f32)?;
    write_matrix(&mut w, m.frames.iter().flatten().copied())?;
    w.flush()?;
    Ok(())
}

pub fn read_linguistic(path: &Path) -> Result<LinguisticMatrix, StoreError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != LINGUISTIC_MAGIC {
        return Err(StoreError::Format {
            path: path.to_owned(),
            reason: format!("bad magic {magic:?}"),
        });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(StoreError::Format {
            path: path.to_owned(),
            reason: format!("unsupported version {version}"),
        });
    }
    let n = read_u32(&mut r)? as usize;
    let d = read_u32(&mut r)? as usize;
    let frame_rate = read_f32(&mut r)? as f64;
    Ok(LinguisticMatrix {
        frames: read_matrix(&mut r, n, d)?,
        dim: d,
        frame_rate,
    })
}
