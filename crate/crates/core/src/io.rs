//! Field files, JSON sidecars and PGM image export.
//!
//! A field file is a 16-byte header (`b"SSF1"`, `u32` n, then eight reserved
//! zero bytes, little-endian) followed by `n^2` complex samples stored as `(f64 re, f64 im)`
//! in row-major order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, DOMAIN_HALF_WIDTH};

const MAGIC: &[u8; 4] = b"SSF1";
const HEADER_LEN: u64 = 16;

/// Byte length of a field file holding an `n x n` field.
pub fn field_file_len(n: usize) -> u64 {
    HEADER_LEN + 16 * (n as u64) * (n as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub domain: [f64; 2],
}

/// Path of the JSON sidecar belonging to a field file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `f` to `path` and its sidecar to `<path>.json`.
pub fn save_field(path: impl AsRef<Path>, f: &ComplexField) -> Result<()> {
    let path = path.as_ref();
    let n = f.grid().n();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&[0u8; 8])?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    let sidecar = Sidecar {
        n,
        domain: [-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH],
    };
    fs::write(sidecar_path(path), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

/// Reads a field file. The sidecar, if present, must agree with the header.
pub fn load_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let found = file.metadata()?.len();
    let mut r = BufReader::new(file);
    if found < HEADER_LEN {
        return Err(Error::SizeMismatch {
            expected: HEADER_LEN,
            found,
        });
    }
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic".to_string()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    if header[8..16].iter().any(|&b| b != 0) {
        return Err(Error::Format("reserved header bytes are not zero".to_string()));
    }
    let grid = Grid2D::new(n).map_err(|_| Error::Format(format!("invalid grid size {n}")))?;
    let expected = field_file_len(n);
    if found != expected {
        return Err(Error::SizeMismatch { expected, found });
    }
    let sc = sidecar_path(path);
    if sc.exists() {
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(&sc)?)?;
        if side.n != n {
            return Err(Error::Format(format!(
                "sidecar says n = {}, header says n = {n}",
                side.n
            )));
        }
    }
    let mut buf = vec![0u8; 16 * n * n];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    ComplexField::from_values(grid, values)
}

/// Writes an 8-bit binary PGM of `values` (row-major `n x n`), min-max scaled.
pub fn save_pgm(path: impl AsRef<Path>, values: &[f64], n: usize) -> Result<()> {
    if values.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "image needs {} values, got {}",
            n * n,
            values.len()
        )));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{n} {n}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// PGM of the real part of a field.
pub fn save_field_pgm(path: impl AsRef<Path>, f: &ComplexField) -> Result<()> {
    save_pgm(path, &f.real_values(), f.grid().n())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ssf");
        let f = ComplexField::random(Grid2D::new(32).unwrap(), 3);
        save_field(&p, &f).unwrap();
        let g = load_field(&p).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn file_length_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ssf");
        let f = ComplexField::zeros(Grid2D::new(128).unwrap());
        save_field(&p, &f).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 16 + 2 * 8 * 128 * 128);
        let side: Sidecar =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(side, Sidecar { n: 128, domain: [-1.0, 1.0] });
    }

    #[test]
    fn truncated_file_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ssf");
        save_field(&p, &ComplexField::random(Grid2D::new(16).unwrap(), 1)).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_field(&p), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ssf");
        fs::write(&p, [0u8; 32]).unwrap();
        assert!(matches!(load_field(&p), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_header_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.pgm");
        let vals: Vec<f64> = (0..16 * 16).map(|i| i as f64).collect();
        save_pgm(&p, &vals, 16).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = b"P5\n16 16\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 256);
        assert_eq!(px[0], 0);
        assert_eq!(px[255], 255);
    }
}
