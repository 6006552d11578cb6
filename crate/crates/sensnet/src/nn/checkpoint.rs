//! Versioned binary network checkpoints.
//!
//! Byte layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"SNET"`                         |
//! | 4      | 4    | format version, currently `1` (u32)     |
//! | 8      | 1    | activation tag (u8)                     |
//! | 9      | 1    | scalar width in bytes: 4 or 8 (u8)      |
//! | 10     | 2    | reserved, zero (u16)                    |
//! | 12     | 4    | affine layer count `L` (u32)            |
//! | 16     | 8(L+1) | layer widths `d, h₁, …, n` (u64 each) |
//! | …      | —    | weight matrices, in layer order, row-major, raw IEEE-754 bits |
//!
//! Round-tripping stores and restores the exact bit pattern of every weight,
//! so save followed by load reproduces the network bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::activation::Activation;
use super::mlp::Mlp;

const MAGIC: [u8; 4] = *b"SNET";
const VERSION: u32 = 1;
/// Refuse to allocate for absurd stored dimensions.
const MAX_WIDTH: u64 = 1 << 32;

/// Writes `m` to `path` in the documented checkpoint layout.
pub fn save_checkpoint<F: Scalar>(m: &Mlp<F>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[m.activation().tag(), F::BYTE_WIDTH, 0, 0])?;
    out.write_all(&(m.depth() as u32).to_le_bytes())?;
    for &w in m.widths() {
        out.write_all(&(w as u64).to_le_bytes())?;
    }
    for layer in m.weights() {
        for &v in layer.iter() {
            let bits = v.to_bits_u64().to_le_bytes();
            out.write_all(&bits[..F::BYTE_WIDTH as usize])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Reads a checkpoint written by [`save_checkpoint`]. The scalar type must
/// match the stored width — a 32-bit file does not silently widen to f64.
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<Mlp<F>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:02x?}; not a network checkpoint"
        )));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let mut header = [0u8; 4];
    input.read_exact(&mut header)?;
    let activation = Activation::from_tag(header[0])?;
    let width = header[1];
    if width != F::BYTE_WIDTH {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {width}-byte scalars but a {}-byte load was requested",
            F::BYTE_WIDTH
        )));
    }
    let layers = read_u32(&mut input)? as usize;
    if layers == 0 {
        return Err(Error::Checkpoint("checkpoint declares zero layers".into()));
    }
    let mut widths = Vec::with_capacity(layers + 1);
    for _ in 0..=layers {
        let w = read_u64(&mut input)?;
        if w == 0 || w >= MAX_WIDTH {
            return Err(Error::Checkpoint(format!("implausible layer width {w}")));
        }
        widths.push(w as usize);
    }
    let mut weights = Vec::with_capacity(layers);
    let entry = F::BYTE_WIDTH as usize;
    for l in 0..layers {
        let (rows, cols) = (widths[l + 1], widths[l]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf[..entry])?;
            data.push(F::from_bits_u64(u64::from_le_bytes(buf)));
        }
        let matrix = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Checkpoint(format!("layer {l} shape: {e}")))?;
        weights.push(matrix);
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after weight data".into()));
    }
    Mlp::from_weights(weights, activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_equal<F: Scalar>(a: &Mlp<F>, b: &Mlp<F>) -> bool {
        a.widths() == b.widths()
            && a.activation() == b.activation()
            && a.weights()
                .iter()
                .zip(b.weights())
                .all(|(x, y)| x.iter().zip(y.iter()).all(|(p, q)| p.to_bits_u64() == q.to_bits_u64()))
    }

    #[test]
    fn round_trip_is_bit_exact_in_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.snet");
        let m = Mlp::<f64>::init(&[7, 9, 4], Activation::HardTanh, 1.3, 42).unwrap();
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint::<f64>(&path).unwrap();
        assert!(bits_equal(&m, &loaded));
    }

    #[test]
    fn round_trip_is_bit_exact_in_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net32.snet");
        let m = Mlp::<f32>::init(&[5, 6, 3], Activation::Relu6, 1.0, 7).unwrap();
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint::<f32>(&path).unwrap();
        assert!(bits_equal(&m, &loaded));
    }

    #[test]
    fn scalar_width_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net32.snet");
        let m = Mlp::<f32>::init(&[5, 6, 3], Activation::Relu, 1.0, 7).unwrap();
        save_checkpoint(&m, &path).unwrap();
        match load_checkpoint::<f64>(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("4-byte")),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.snet");
        let m = Mlp::<f64>::init(&[4, 4, 2], Activation::Relu, 1.0, 1).unwrap();
        save_checkpoint(&m, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        std::fs::write(&path, &bad_version).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint(_))));

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Io(_))));

        let mut padded = good.clone();
        padded.push(0);
        std::fs::write(&path, &padded).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint(_))));
    }
}
