//! On-disk formats: the row-oriented EVT event container and the columnar
//! NTU ntuple, plus canonical JSON for their headers.

pub mod evt;
pub mod ntu;
mod schema_json;

use std::io::{self, Read};

use hepskim_core::codec::CodecError;
use hepskim_core::SchemaError;
use thiserror::Error;

pub use evt::{
    convert_evt, read_evt, scan_evt, write_evt, BlockInfo, EvtLayout, EvtReader, EvtSummary, EvtWriter, WriteOptions,
    DEFAULT_BLOCK_EVENTS,
};
pub use ntu::{read_ntu, scan_ntu, write_ntu, ColumnData, NtuColumns, NtuLayout, NtuWriter, DEFAULT_GROUP_ROWS};
pub use schema_json::{columns_from_json, columns_to_json, schema_from_json, schema_to_json};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("CRC mismatch in block {block}: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { block: usize, stored: u32, computed: u32 },
    #[error("truncated block {block}")]
    TruncatedBlock { block: usize },
    #[error("malformed block {block}: {reason}")]
    MalformedBlock { block: usize, reason: String },
    #[error("event {index} violates the schema: {source}")]
    SchemaViolation { index: u64, source: CodecError },
    #[error("row {row} does not match the column schema: {reason}")]
    ArityMismatch { row: u64, reason: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("footer mismatch: {0}")]
    FooterMismatch(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl StorageError {
    pub fn is_io(&self) -> bool {
        matches!(self, StorageError::Io(_))
    }
}

/// Byte counters maintained by readers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounters {
    /// Bytes pulled from the underlying storage.
    pub storage_bytes: u64,
    /// Block payload bytes after decompression.
    pub decoded_bytes: u64,
}

/// Reads until `buf` is full or EOF; returns the number of bytes read.
pub(crate) fn read_full(r: &mut impl io::Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

/// Reads a u32-length-prefixed header. Short reads are reported as a corrupt header.
pub(crate) fn read_header(r: &mut impl io::Read, magic: &'static str) -> Result<Vec<u8>, StorageError> {
    let mut m = [0u8; 4];
    let got = read_full(r, &mut m)?;
    if got < 4 || m != magic.as_bytes() {
        return Err(StorageError::BadMagic {
            expected: magic,
            found: String::from_utf8_lossy(&m[..got]).into_owned(),
        });
    }
    let mut len = [0u8; 4];
    if read_full(r, &mut len)? < 4 {
        return Err(StorageError::CorruptHeader("missing header length".into()));
    }
    let len = u32::from_le_bytes(len) as u64;
    let mut header = Vec::new();
    r.take(len).read_to_end(&mut header)?;
    if (header.len() as u64) < len {
        return Err(StorageError::CorruptHeader(format!(
            "header declares {len} bytes, file holds {}",
            header.len()
        )));
    }
    Ok(header)
}

pub(crate) fn write_header(w: &mut impl io::Write, magic: &str, header: &str) -> io::Result<u64> {
    let len = u32::try_from(header.len()).map_err(|_| io::Error::other("header longer than 4 GiB"))?;
    w.write_all(magic.as_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    Ok(8 + header.len() as u64)
}
