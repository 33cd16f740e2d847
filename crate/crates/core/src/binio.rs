//! Little-endian primitives shared by the on-disk formats.

use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Reader that turns short reads into [`Error::Truncated`].
pub(crate) struct LeReader<R> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> LeReader<R> {
    pub fn new(inner: R, path: &Path) -> Self {
        LeReader {
            inner,
            path: path.to_path_buf(),
        }
    }

    pub fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    pub fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::Truncated(format!(
                    "{} ended while reading {what}",
                    self.path.display()
                ))
            } else {
                Error::io(&self.path, e)
            }
        })
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    pub fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes(what)?))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(what)?))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    /// Reads in bounded chunks so a corrupt length hits end-of-file before
    /// it can force a huge allocation.
    pub fn f32_vec(&mut self, len: usize, what: &str) -> Result<Vec<f32>> {
        const CHUNK: usize = 1 << 14;
        let mut out = Vec::with_capacity(len.min(CHUNK));
        let mut raw = [0u8; 4 * CHUNK];
        let mut left = len;
        while left > 0 {
            let n = left.min(CHUNK);
            self.fill(&mut raw[..4 * n], what)?;
            out.extend(
                raw[..4 * n]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
            left -= n;
        }
        Ok(out)
    }

    /// Same as [`Self::f32_vec`] for i8 blobs.
    pub fn i8_vec(&mut self, len: usize, what: &str) -> Result<Vec<i8>> {
        const CHUNK: usize = 1 << 16;
        let mut out = Vec::with_capacity(len.min(CHUNK));
        let mut raw = [0u8; CHUNK];
        let mut left = len;
        while left > 0 {
            let n = left.min(CHUNK);
            self.fill(&mut raw[..n], what)?;
            out.extend(raw[..n].iter().map(|&b| b as i8));
            left -= n;
        }
        Ok(out)
    }

    pub fn i32_vec(&mut self, len: usize, what: &str) -> Result<Vec<i32>> {
        let mut out = Vec::with_capacity(len.min(1 << 14));
        for _ in 0..len {
            out.push(self.i32(what)?);
        }
        Ok(out)
    }

    pub fn expect_magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.bytes::<4>("magic")?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    /// Fails unless the stream is exhausted.
    pub fn expect_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Corrupt(format!(
                "{} has trailing bytes",
                self.path.display()
            ))),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}

/// Growable little-endian byte buffer.
#[derive(Default)]
pub(crate) struct LeWriter {
    pub buf: Vec<u8>,
}

impl LeWriter {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32_slice(&mut self, v: &[f32]) {
        self.buf.reserve(v.len() * 4);
        for x in v {
            self.f32(*x);
        }
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
}

/// Writes `bytes` followed by their CRC-32.
pub(crate) fn write_with_crc(path: &Path, mut bytes: Vec<u8>) -> Result<()> {
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    write_file(path, &bytes)
}

/// Reads and decodes a file laid out as magic, u32 version, body, CRC-32
/// of everything before the checksum.
///
/// Magic and version are checked first so a foreign or newer file is
/// reported as such. A body that runs out of bytes is `Truncated`; any other
/// inconsistency in a file whose checksum does not match is `Checksum`.
pub(crate) fn read_checked<T>(
    path: &Path,
    magic: [u8; 4],
    version: u32,
    parse: impl FnOnce(&mut LeReader<&[u8]>) -> Result<T>,
) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = LeReader::new(&bytes[..], path);
    r.expect_magic(magic)?;
    let found = r.u32("version")?;
    if found != version {
        return Err(Error::UnsupportedVersion(found));
    }
    let split = bytes.len().saturating_sub(4);
    let stored = (bytes.len() >= 12).then(|| {
        u32::from_le_bytes([
            bytes[split],
            bytes[split + 1],
            bytes[split + 2],
            bytes[split + 3],
        ])
    });
    let computed = crc32fast::hash(&bytes[..split]);
    let checksum_err = Error::Checksum {
        stored: stored.unwrap_or(0),
        computed,
    };
    let crc_ok = stored == Some(computed);
    match parse(&mut r) {
        Err(e @ Error::Truncated(_)) => Err(e),
        Err(_) if !crc_ok => Err(checksum_err),
        Err(e) => Err(e),
        Ok(value) => match r.inner.len() {
            n if n < 4 => Err(Error::Truncated(format!(
                "{} ends inside the checksum",
                path.display()
            ))),
            4 if crc_ok => Ok(value),
            _ if !crc_ok => Err(checksum_err),
            _ => Err(Error::Corrupt(format!(
                "{} has trailing bytes",
                path.display()
            ))),
        },
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}
