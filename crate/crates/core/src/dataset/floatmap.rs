//! Dense float maps on disk (`.nmap`).
//!
//! Layout: a 20-byte header followed by `H * W * C` 32-bit IEEE floats in
//! row-major `(row, col, channel)` order.
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `NMAP`                            |
//! | 4      | 1    | version (1)                             |
//! | 5      | 1    | byte order: 0 little-endian, 1 big-endian |
//! | 6      | 2    | reserved, zero                          |
//! | 8      | 4    | height (u32, in the declared byte order)|
//! | 12     | 4    | width                                   |
//! | 16     | 4    | channels                                |
//!
//! Writers always emit little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NMAP";
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn from_vec3(height: usize, width: usize, v: &[[f64; 3]]) -> Self {
        let data = v.iter().flat_map(|p| p.map(|x| x as f32)).collect();
        Self::new(height, width, 3, data)
    }

    pub fn from_scalar(height: usize, width: usize, v: &[f64]) -> Self {
        Self::new(height, width, 1, v.iter().map(|x| *x as f32).collect())
    }

    pub fn to_vec3(&self) -> Vec<[f64; 3]> {
        assert_eq!(self.channels, 3);
        self.data
            .chunks_exact(3)
            .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
            .collect()
    }

    pub fn to_scalar(&self) -> Vec<f64> {
        assert_eq!(self.channels, 1);
        self.data.iter().map(|x| *x as f64).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[1, 0, 0, 0]);
        for v in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::malformed(path, "missing NMAP header"));
        }
        if bytes[4] != 1 {
            return Err(Error::malformed(path, format!("unsupported version {}", bytes[4])));
        }
        let big = match bytes[5] {
            0 => false,
            1 => true,
            b => return Err(Error::malformed(path, format!("bad byte-order flag {b}"))),
        };
        let word = |off: usize| {
            let b: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
            if big {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        let (h, w, c) = (word(8) as usize, word(12) as usize, word(16) as usize);
        let n = h * w * c;
        if bytes.len() != HEADER_LEN + 4 * n {
            return Err(Error::malformed(
                path,
                format!("expected {} payload bytes, found {}", 4 * n, bytes.len() - HEADER_LEN),
            ));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| {
                let b: [u8; 4] = b.try_into().unwrap();
                if big {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect();
        Ok(Self::new(h, w, c, data))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

/// Reads a 16-bit RGB PNG normal map, mapping `[0, 65535]` to `[-1, 1]`.
pub fn read_png16_normals(path: &Path) -> Result<FloatMap> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.into_rgb16();
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .flat_map(|p| p.0.map(|v| v as f32 / 65535.0 * 2.0 - 1.0))
        .collect();
    Ok(FloatMap::new(h as usize, w as usize, 3, data))
}
