//! CMJF binary field dumps.
//!
//! Little-endian layout: magic `CMJF`, `u32` version, `u32` Nx, Ny, Nz,
//! `f64` Lx, Ly, Lz, `f64` origin ×3, then the eight partial arrays in
//! storage order, each x-fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::jet::JetScalarField;

pub const MAGIC: &[u8; 4] = b"CMJF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 4 + 6 * 8;

pub fn write_jets<W: Write>(mut w: W, field: &JetScalarField) -> std::io::Result<()> {
    let g = field.grid();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    for n in g.dims {
        header.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in g.lengths.iter().chain(g.origin.iter()) {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(g.len() * 8);
    for slot in 0..8 {
        buf.clear();
        for c in field.coeffs() {
            buf.extend_from_slice(&c[slot].to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

/// Parse a dump; `Err(msg)` describes malformed content.
pub fn read_jets<R: Read>(mut r: R) -> std::io::Result<std::result::Result<JetScalarField, String>> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Ok(Err("bad magic, not a CMJF file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Ok(Err(format!("unsupported CMJF version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let lengths = [f64_at(20), f64_at(28), f64_at(36)];
    let origin = [f64_at(44), f64_at(52), f64_at(60)];
    let grid = match GridSpec::new(dims, lengths, origin) {
        Ok(g) => g,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let n = grid.len();
    let mut coeffs = vec![[0.0; 8]; n];
    let mut buf = vec![0u8; n * 8];
    for slot in 0..8 {
        r.read_exact(&mut buf)?;
        for (c, b) in coeffs.iter_mut().zip(buf.chunks_exact(8)) {
            c[slot] = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Ok(Err("trailing bytes after field data".into()));
    }
    Ok(JetScalarField::from_coeffs(grid, coeffs).map_err(|e| e.to_string()))
}

pub fn save_field(path: &Path, field: &JetScalarField) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jets(BufWriter::new(f), field).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: &Path) -> Result<JetScalarField> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    match read_jets(BufReader::new(f)) {
        Ok(Ok(field)) => Ok(field),
        Ok(Err(msg)) => Err(Error::Format {
            path: path.into(),
            msg,
        }),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::Format {
            path: path.into(),
            msg: "truncated CMJF file".into(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Write a flat array of little-endian `f64`.
pub fn save_f64s(path: &Path, data: &[f64]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for v in data {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format {
            path: path.into(),
            msg: "length is not a multiple of 8".into(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}
