//! Model checkpoints: an architecture descriptor (JSON) plus the contiguous
//! 32-bit float parameters, in a fixed parameter order.
//!
//! Layout (little-endian): magic "VBCK", version u32, arch_len u32, arch JSON
//! bytes, param_count u64, then `param_count` f32 values.

use super::tensor::Tensor;
use super::NeuralError;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"VBCK";
const VERSION: u32 = 1;

pub fn save_checkpoint(
    path: &Path,
    arch: &serde_json::Value,
    params: &[&Tensor],
) -> Result<(), NeuralError> {
    let arch_bytes =
        serde_json::to_vec(arch).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    let count: usize = params.iter().map(|p| p.len()).sum();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(arch_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&arch_bytes)?;
    w.write_all(&(count as u64).to_le_bytes())?;
    for p in params {
        for v in &p.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(serde_json::Value, Vec<f32>), NeuralError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NeuralError::Checkpoint(format!(
            "{path:?}: bad magic {magic:?}"
        )));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(NeuralError::Checkpoint(format!(
            "{path:?}: unsupported version {version}"
        )));
    }
    r.read_exact(&mut b4)?;
    let arch_len = u32::from_le_bytes(b4) as usize;
    let mut arch_bytes = vec![0u8; arch_len];
    r.read_exact(&mut arch_bytes)?;
    let arch =
        serde_json::from_slice(&arch_bytes).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b4)?;
        flat.push(f32::from_le_bytes(b4));
    }
    Ok((arch, flat))
}

/// Copy a flat f32 buffer into parameter tensors, in order.
pub fn fill_params(params: Vec<&mut Tensor>, flat: &[f32]) -> Result<(), NeuralError> {
    let want: usize = params.iter().map(|p| p.len()).sum();
    if want != flat.len() {
        return Err(NeuralError::Checkpoint(format!(
            "parameter count mismatch: architecture wants {want}, file has {}",
            flat.len()
        )));
    }
    let mut cursor = 0;
    for p in params {
        for v in &mut p.values {
            *v = flat[cursor] as f64;
            cursor += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::{LayerSpec, Network};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_load_save_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let specs = vec![
            LayerSpec::FfTanh { input: 3, output: 4 },
            LayerSpec::Linear { input: 4, output: 2 },
        ];
        let mut net = Network::new(&specs, &mut ChaCha8Rng::seed_from_u64(5));
        let arch = serde_json::json!({ "layers": specs });
        save_checkpoint(&p1, &arch, &net.params()).unwrap();

        let (arch_back, flat) = load_checkpoint(&p1).unwrap();
        assert_eq!(arch_back, arch);
        fill_params(net.params_mut(), &flat).unwrap();
        save_checkpoint(&p2, &arch_back, &net.params()).unwrap();

        let bytes1 = std::fs::read(&p1).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn param_count_mismatch_is_rejected() {
        let mut t = Tensor::zeros(&[4]);
        assert!(matches!(
            fill_params(vec![&mut t], &[1.0, 2.0]),
            Err(NeuralError::Checkpoint(_))
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.ckpt");
        std::fs::write(&p, b"JUNKJUNKJUNK").unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(NeuralError::Checkpoint(_))
        ));
    }
}
