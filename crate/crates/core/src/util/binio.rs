//! Little-endian binary files used by the graph, partition and checkpoint formats.
//!
//! * float32 matrix: `u32 rows`, `u32 cols`, then `rows * cols` f32 values row-major.
//! * float64 tensor: same header, f64 values.
//! * u64 / u32 / i32 arrays: raw values, no header; length comes from the manifest.
//! * masks: one byte per entry, `0` or `1`.
//! * id lists: newline-delimited UTF-8 strings in integer order.
//!
//! Every writer returns a [`FileDigest`] (byte length + CRC32) for manifests.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub bytes: u64,
    pub crc32: u32,
}

struct DigestWriter {
    out: BufWriter<File>,
    hasher: crc32fast::Hasher,
    bytes: u64,
}

impl DigestWriter {
    fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out: BufWriter::with_capacity(1 << 20, file),
            hasher: crc32fast::Hasher::new(),
            bytes: 0,
        })
    }

    fn put(&mut self, path: &Path, buf: &[u8]) -> Result<()> {
        self.hasher.update(buf);
        self.bytes += buf.len() as u64;
        self.out.write_all(buf).map_err(|e| Error::io(path, e))
    }

    fn finish(mut self, path: &Path) -> Result<FileDigest> {
        self.out.flush().map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            bytes: self.bytes,
            crc32: self.hasher.finalize(),
        })
    }
}

fn write_values<T: Copy, const N: usize>(
    path: &Path,
    header: &[u8],
    values: &[T],
    to_le: impl Fn(T) -> [u8; N],
) -> Result<FileDigest> {
    let mut w = DigestWriter::create(path)?;
    w.put(path, header)?;
    let mut buf = Vec::with_capacity(N * 8192);
    for chunk in values.chunks(8192) {
        buf.clear();
        for &v in chunk {
            buf.extend_from_slice(&to_le(v));
        }
        w.put(path, &buf)?;
    }
    w.finish(path)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn decode<T, const N: usize>(path: &Path, bytes: &[u8], from_le: impl Fn([u8; N]) -> T) -> Result<Vec<T>> {
    if bytes.len() % N != 0 {
        return Err(Error::Shape(format!(
            "{}: {} bytes is not a multiple of {N}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(N)
        .map(|c| from_le(c.try_into().expect("exact chunk")))
        .collect())
}

fn matrix_header(rows: usize, cols: usize) -> Result<[u8; 8]> {
    let r = u32::try_from(rows).map_err(|_| Error::Shape(format!("{rows} rows exceeds u32")))?;
    let c = u32::try_from(cols).map_err(|_| Error::Shape(format!("{cols} cols exceeds u32")))?;
    let mut h = [0u8; 8];
    h[..4].copy_from_slice(&r.to_le_bytes());
    h[4..].copy_from_slice(&c.to_le_bytes());
    Ok(h)
}

fn split_header(path: &Path, bytes: &[u8], width: usize) -> Result<(usize, usize, usize)> {
    if bytes.len() < 8 {
        return Err(Error::Shape(format!("{}: truncated header", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + rows * cols * width;
    if bytes.len() != expected {
        return Err(Error::Shape(format!(
            "{}: header says {rows}x{cols} ({expected} bytes) but file has {}",
            path.display(),
            bytes.len()
        )));
    }
    Ok((rows, cols, 8))
}

pub fn write_f32_matrix(path: &Path, rows: usize, cols: usize, data: &[f32]) -> Result<FileDigest> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!("{rows}x{cols} matrix with {} values", data.len())));
    }
    write_values(path, &matrix_header(rows, cols)?, data, f32::to_le_bytes)
}

pub fn read_f32_matrix(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = read_all(path)?;
    let (rows, cols, off) = split_header(path, &bytes, 4)?;
    Ok((rows, cols, decode(path, &bytes[off..], f32::from_le_bytes)?))
}

pub fn write_f64_tensor(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<FileDigest> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!("{rows}x{cols} tensor with {} values", data.len())));
    }
    write_values(path, &matrix_header(rows, cols)?, data, f64::to_le_bytes)
}

pub fn read_f64_tensor(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read_all(path)?;
    let (rows, cols, off) = split_header(path, &bytes, 8)?;
    Ok((rows, cols, decode(path, &bytes[off..], f64::from_le_bytes)?))
}

pub fn write_u64s(path: &Path, data: &[u64]) -> Result<FileDigest> {
    write_values(path, &[], data, u64::to_le_bytes)
}

pub fn read_u64s(path: &Path) -> Result<Vec<u64>> {
    decode(path, &read_all(path)?, u64::from_le_bytes)
}

pub fn write_u32s(path: &Path, data: &[u32]) -> Result<FileDigest> {
    write_values(path, &[], data, u32::to_le_bytes)
}

pub fn read_u32s(path: &Path) -> Result<Vec<u32>> {
    decode(path, &read_all(path)?, u32::from_le_bytes)
}

pub fn write_i32s(path: &Path, data: &[i32]) -> Result<FileDigest> {
    write_values(path, &[], data, i32::to_le_bytes)
}

pub fn read_i32s(path: &Path) -> Result<Vec<i32>> {
    decode(path, &read_all(path)?, i32::from_le_bytes)
}

pub fn write_mask(path: &Path, mask: &[bool]) -> Result<FileDigest> {
    write_values(path, &[], mask, |b| [u8::from(b)])
}

pub fn read_mask(path: &Path) -> Result<Vec<bool>> {
    read_all(path)?
        .into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Shape(format!("{}: mask byte {other}", path.display()))),
        })
        .collect()
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: impl IntoIterator<Item = S>) -> Result<FileDigest> {
    let mut w = DigestWriter::create(path)?;
    for line in lines {
        let line = line.as_ref();
        if line.contains('\n') {
            return Err(Error::invalid(format!("id {line:?} contains a newline")));
        }
        w.put(path, line.as_bytes())?;
        w.put(path, b"\n")?;
    }
    w.finish(path)
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Digest of an existing file, for checking it against a manifest entry.
pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = read_all(path)?;
    Ok(FileDigest {
        bytes: bytes.len() as u64,
        crc32: crc32fast::hash(&bytes),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
