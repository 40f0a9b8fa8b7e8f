//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `NCSDFCKP` |
//! | 4     | format version (1) |
//! | 8     | header length `n` |
//! | n     | JSON header: metadata plus a tensor index of name, shape, offset |
//! | ...   | tensor data as little-endian `f64`, in index order |
//!
//! Values are stored as raw bits, so a round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::param::ParamBlock;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NCSDFCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Writes `meta` and `tensors` to `path` atomically (temp file then rename).
pub fn write_checkpoint<M: Serialize>(path: &Path, meta: &M, tensors: &[&ParamBlock]) -> Result<()> {
    let mut offset = 0;
    let index = tensors
        .iter()
        .map(|t| {
            let e = TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            };
            offset += t.len();
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        meta: serde_json::to_value(meta)?,
        tensors: index,
    })?;
    let mut buf = Vec::with_capacity(20 + header.len() + offset * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for t in tensors {
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint back into its metadata and tensors.
pub fn read_checkpoint<M: for<'de> Deserialize<'de>>(path: &Path) -> Result<(M, Vec<ParamBlock>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |r: &str| Error::malformed(path, r);
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let data_start = 20usize
        .checked_add(hlen)
        .filter(|e| *e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[20..data_start])?;
    let data = &bytes[data_start..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let (a, b) = (e.offset * 8, (e.offset + n) * 8);
        if b > data.len() {
            return Err(bad(&format!("tensor {} out of range", e.name)));
        }
        let values = data[a..b]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(ParamBlock::new(e.name, e.shape, values));
    }
    let meta = serde_json::from_value(header.meta)?;
    Ok((meta, tensors))
}

/// Copies tensors into `targets` by name; every target must be present with
/// the same shape.
pub fn restore_blocks(path: &Path, targets: Vec<&mut ParamBlock>, source: &[ParamBlock]) -> Result<()> {
    let by_name: std::collections::HashMap<&str, &ParamBlock> =
        source.iter().map(|b| (b.name.as_str(), b)).collect();
    for t in targets {
        let s = by_name
            .get(t.name.as_str())
            .ok_or_else(|| Error::malformed(path, format!("missing tensor {}", t.name)))?;
        if s.shape != t.shape {
            return Err(Error::ShapeMismatch(format!(
                "tensor {}: checkpoint {:?}, model {:?}",
                t.name, s.shape, t.shape
            )));
        }
        t.data.copy_from_slice(&s.data);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        let a = ParamBlock::new("a", vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300]);
        let b = ParamBlock::new("b", vec![1], vec![std::f64::consts::PI]);
        write_checkpoint(&p, &serde_json::json!({"iteration": 7}), &[&a, &b]).unwrap();
        let (meta, t): (serde_json::Value, _) = read_checkpoint(&p).unwrap();
        assert_eq!(meta["iteration"], 7);
        assert_eq!(t.len(), 2);
        for (x, y) in t.iter().zip([&a, &b]) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.shape, y.shape);
            let xb: Vec<u64> = x.data.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ckpt");
        fs::write(&p, b"hello world, definitely not a checkpoint").unwrap();
        assert!(read_checkpoint::<serde_json::Value>(&p).is_err());
    }

    #[test]
    fn restore_checks_shapes() {
        let src = vec![ParamBlock::new("a", vec![2], vec![1.0, 2.0])];
        let mut ok = ParamBlock::zeros("a", vec![2]);
        restore_blocks(Path::new("m"), vec![&mut ok], &src).unwrap();
        assert_eq!(ok.data, vec![1.0, 2.0]);
        let mut wrong = ParamBlock::zeros("a", vec![3]);
        assert!(restore_blocks(Path::new("m"), vec![&mut wrong], &src).is_err());
        let mut missing = ParamBlock::zeros("z", vec![2]);
        assert!(restore_blocks(Path::new("m"), vec![&mut missing], &src).is_err());
    }
}
