//! Checksummed little-endian container shared by feature shards and score
//! tables.
//!
//! Layout:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `ICONFEAT`                       |
//! | 8      | 4    | version (1)                            |
//! | 12     | 4    | dtype (1 = binary32, 2 = binary64)     |
//! | 16     | 4    | dim                                    |
//! | 20     | 4    | reserved (0)                           |
//! | 24     | 8    | count                                  |
//! | 32     | ..   | payload, `count * dim` values row-major |
//! | end-8  | 8    | FNV-1a 64 of the payload bytes         |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"ICONFEAT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 32;
pub const CHECKSUM_LEN: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

impl Dtype {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn width(self) -> u64 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// FNV-1a, 64-bit variant.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Fnv1a64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        Fnv1a64(Self::OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self::new()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(bytes);
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub dtype: Dtype,
    pub dim: u32,
    pub count: u64,
}

impl Header {
    pub fn payload_len(&self) -> u64 {
        self.count * u64::from(self.dim) * self.dtype.width()
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.payload_len() + CHECKSUM_LEN
    }

    pub fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..8].copy_from_slice(&MAGIC);
        out[8..12].copy_from_slice(&VERSION.to_le_bytes());
        out[12..16].copy_from_slice(&self.dtype.code().to_le_bytes());
        out[16..20].copy_from_slice(&self.dim.to_le_bytes());
        out[20..24].copy_from_slice(&0u32.to_le_bytes());
        out[24..32].copy_from_slice(&self.count.to_le_bytes());
        out
    }

    /// Parses and validates a header, requiring the given dtype.
    pub fn decode(bytes: &[u8; HEADER_LEN as usize], expected: Dtype) -> Result<Self> {
        let mut magic = [0u8; 8];
        magic.copy_from_slice(&bytes[0..8]);
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dtype_code = u32_at(12);
        if dtype_code != expected.code() {
            return Err(Error::UnsupportedDtype {
                found: dtype_code,
                expected: expected.code(),
            });
        }
        let dim = u32_at(16);
        if dim == 0 {
            return Err(Error::InvalidHeader("dim must be at least 1".into()));
        }
        let reserved = u32_at(20);
        if reserved != 0 {
            return Err(Error::InvalidHeader(format!(
                "reserved field is {reserved}, expected 0"
            )));
        }
        let count = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
        count
            .checked_mul(u64::from(dim))
            .and_then(|n| n.checked_mul(expected.width()))
            .ok_or_else(|| Error::InvalidHeader("payload size overflows u64".into()))?;
        Ok(Header {
            dtype: expected,
            dim,
            count,
        })
    }
}

/// Writes a complete container. `payload` must hold exactly
/// `header.payload_len()` bytes.
pub fn write_container(path: &Path, header: Header, payload: &[u8]) -> Result<()> {
    debug_assert_eq!(payload.len() as u64, header.payload_len());
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&header.encode()).map_err(io)?;
    w.write_all(payload).map_err(io)?;
    w.write_all(&fnv1a64(payload).to_le_bytes()).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(())
}

/// Reads and fully verifies a container, returning its header and payload.
pub fn read_container(path: &Path, expected: Dtype) -> Result<(Header, Vec<u8>)> {
    let mut reader = ContainerReader::open(path, expected)?;
    let mut payload = vec![0u8; reader.header.payload_len() as usize];
    reader.read_payload(&mut payload)?;
    let stored = reader.read_checksum()?;
    let computed = fnv1a64(&payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    Ok((reader.header, payload))
}

/// Sequential access to a container whose header and length have been
/// validated.
#[derive(Debug)]
pub struct ContainerReader {
    path: PathBuf,
    file: BufReader<File>,
    pub header: Header,
}

impl ContainerReader {
    pub fn open(path: &Path, expected: Dtype) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let file = File::open(path).map_err(io)?;
        let actual_len = file.metadata().map_err(io)?.len();
        let mut file = BufReader::new(file);
        if actual_len < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN + CHECKSUM_LEN,
                found: actual_len,
            });
        }
        let mut raw = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut raw).map_err(io)?;
        let header = Header::decode(&raw, expected)?;
        let expected_len = header.file_len();
        if actual_len < expected_len {
            return Err(Error::Truncated {
                expected: expected_len,
                found: actual_len,
            });
        }
        if actual_len > expected_len {
            return Err(Error::InvalidHeader(format!(
                "{} trailing bytes after checksum",
                actual_len - expected_len
            )));
        }
        Ok(ContainerReader {
            path: path.to_path_buf(),
            file,
            header,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_payload(&mut self, buf: &mut [u8]) -> Result<()> {
        self.file
            .read_exact(buf)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn read_checksum(&mut self) -> Result<u64> {
        let mut raw = [0u8; 8];
        self.file
            .read_exact(&mut raw)
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(u64::from_le_bytes(raw))
    }

    /// Streams the payload through the checksum and rewinds to the start of
    /// the payload.
    pub fn verify(&mut self) -> Result<()> {
        self.rewind_payload()?;
        let mut hasher = Fnv1a64::new();
        let mut remaining = self.header.payload_len();
        let mut buf = vec![0u8; 1 << 16];
        while remaining > 0 {
            let take = remaining.min(buf.len() as u64) as usize;
            self.read_payload(&mut buf[..take])?;
            hasher.update(&buf[..take]);
            remaining -= take as u64;
        }
        let stored = self.read_checksum()?;
        let computed = hasher.finish();
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        self.rewind_payload()
    }

    pub fn rewind_payload(&mut self) -> Result<()> {
        self.file
            .seek(SeekFrom::Start(HEADER_LEN))
            .map(|_| ())
            .map_err(|e| Error::io(&self.path, e))
    }
}
