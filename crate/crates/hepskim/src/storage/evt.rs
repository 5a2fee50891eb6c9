//! EVT: a row-oriented event container.
//!
//! ```text
//! "EVT1" | u32 header_len | header (canonical schema JSON) | u8 flags
//! block*: u32 event_count | u32 payload_len | payload | u32 crc32(payload)
//! ```
//!
//! All integers are little-endian. Flag bit 0 marks per-block deflate
//! compression; the stored length and CRC then describe the compressed
//! payload. A file with no events has no blocks.

use std::borrow::Borrow;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use hepskim_core::codec::{decode_records, encode_value};
use hepskim_core::{Schema, Value};

use super::schema_json::{schema_from_json, schema_to_json};
use super::{read_full, read_header, write_header, ByteCounters, StorageError};

pub const MAGIC: &str = "EVT1";
pub const FLAG_DEFLATE: u8 = 0x01;
pub const DEFAULT_BLOCK_EVENTS: u32 = 4096;
/// Per-block framing: event count, payload length, CRC.
pub const BLOCK_OVERHEAD: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteOptions {
    pub compress: bool,
    /// Events per block; the last block may hold fewer.
    pub block_events: u32,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            compress: false,
            block_events: DEFAULT_BLOCK_EVENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvtSummary {
    pub events: u64,
    pub blocks: u64,
    pub bytes: u64,
}

pub struct EvtWriter<W: Write> {
    inner: W,
    schema: Schema,
    opts: WriteOptions,
    payload: Vec<u8>,
    pending: u32,
    summary: EvtSummary,
}

impl<W: Write> EvtWriter<W> {
    pub fn new(mut inner: W, schema: &Schema, opts: WriteOptions) -> Result<Self, StorageError> {
        if opts.block_events == 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "block_events must be at least 1").into());
        }
        let mut bytes = write_header(&mut inner, MAGIC, &schema_to_json(schema))?;
        inner.write_all(&[if opts.compress { FLAG_DEFLATE } else { 0 }])?;
        bytes += 1;
        Ok(EvtWriter {
            inner,
            schema: schema.clone(),
            opts,
            payload: Vec::new(),
            pending: 0,
            summary: EvtSummary {
                bytes,
                ..Default::default()
            },
        })
    }

    pub fn push(&mut self, event: &Value) -> Result<(), StorageError> {
        encode_value(self.schema.root(), event, &mut self.payload).map_err(|source| StorageError::SchemaViolation {
            index: self.summary.events,
            source,
        })?;
        self.pending += 1;
        self.summary.events += 1;
        if self.pending == self.opts.block_events {
            self.flush_block()?;
        }
        Ok(())
    }

    fn flush_block(&mut self) -> Result<(), StorageError> {
        if self.pending == 0 {
            return Ok(());
        }
        let compressed;
        let stored: &[u8] = if self.opts.compress {
            let mut enc = DeflateEncoder::new(Vec::with_capacity(self.payload.len() / 2), Compression::default());
            enc.write_all(&self.payload)?;
            compressed = enc.finish()?;
            &compressed
        } else {
            &self.payload
        };
        let len = u32::try_from(stored.len()).map_err(|_| io::Error::other("block payload exceeds 4 GiB"))?;
        self.inner.write_all(&self.pending.to_le_bytes())?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(stored)?;
        self.inner.write_all(&crc32fast::hash(stored).to_le_bytes())?;
        self.summary.bytes += BLOCK_OVERHEAD + stored.len() as u64;
        self.summary.blocks += 1;
        self.payload.clear();
        self.pending = 0;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(W, EvtSummary), StorageError> {
        self.flush_block()?;
        self.inner.flush()?;
        Ok((self.inner, self.summary))
    }
}

/// Writes `events` to a new file at `path`. A partially written file is removed on error.
pub fn write_evt<I>(path: &Path, schema: &Schema, events: I, opts: WriteOptions) -> Result<EvtSummary, StorageError>
where
    I: IntoIterator,
    I::Item: Borrow<Value>,
{
    let result = (|| {
        let mut w = EvtWriter::new(BufWriter::new(File::create(path)?), schema, opts)?;
        for e in events {
            w.push(e.borrow())?;
        }
        let (buf, summary) = w.finish()?;
        buf.into_inner().map_err(|e| e.into_error())?;
        Ok(summary)
    })();
    if result.is_err() {
        let _ = fs::remove_file(path);
    }
    result
}

/// Inflates (if needed) and decodes one block payload. Returns the events and
/// the decoded payload length.
pub fn decode_block(
    schema: &Schema,
    compressed: bool,
    block: usize,
    stored: &[u8],
    events: u32,
) -> Result<(Vec<Value>, u64), StorageError> {
    let malformed = |reason: String| StorageError::MalformedBlock { block, reason };
    let inflated;
    let payload = if compressed {
        let mut out = Vec::with_capacity(stored.len() * 3);
        DeflateDecoder::new(stored)
            .read_to_end(&mut out)
            .map_err(|e| malformed(format!("deflate: {e}")))?;
        inflated = out;
        &inflated[..]
    } else {
        stored
    };
    let values = decode_records(schema.root(), payload, events as usize).map_err(|e| malformed(e.to_string()))?;
    Ok((values, payload.len() as u64))
}

fn check_crc(block: usize, payload: &[u8], stored: u32) -> Result<(), StorageError> {
    let computed = crc32fast::hash(payload);
    if computed != stored {
        return Err(StorageError::CrcMismatch {
            block,
            stored,
            computed,
        });
    }
    Ok(())
}

struct Counting<R> {
    inner: R,
    bytes: u64,
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }
}

/// A CRC-checked block as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBlock {
    pub index: usize,
    pub events: u32,
    pub payload: Vec<u8>,
}

/// Sequential block-by-block reader.
pub struct EvtReader<R: Read> {
    inner: Counting<R>,
    schema: Schema,
    compressed: bool,
    next_block: usize,
    decoded_bytes: u64,
}

impl<R: Read> EvtReader<R> {
    pub fn new(inner: R) -> Result<Self, StorageError> {
        let mut inner = Counting { inner, bytes: 0 };
        let header = read_header(&mut inner, MAGIC)?;
        let schema = schema_from_json(&header)?;
        let mut flags = [0u8; 1];
        if read_full(&mut inner, &mut flags)? < 1 {
            return Err(StorageError::CorruptHeader("missing flags byte".into()));
        }
        if flags[0] & !FLAG_DEFLATE != 0 {
            return Err(StorageError::CorruptHeader(format!(
                "unknown flag bits {:#04x}",
                flags[0]
            )));
        }
        Ok(EvtReader {
            inner,
            schema,
            compressed: flags[0] & FLAG_DEFLATE != 0,
            next_block: 0,
            decoded_bytes: 0,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn is_compressed(&self) -> bool {
        self.compressed
    }

    pub fn counters(&self) -> ByteCounters {
        ByteCounters {
            storage_bytes: self.inner.bytes,
            decoded_bytes: self.decoded_bytes,
        }
    }

    /// Reads the next block and verifies its CRC without decoding it.
    pub fn next_raw_block(&mut self) -> Result<Option<RawBlock>, StorageError> {
        let index = self.next_block;
        let truncated = || StorageError::TruncatedBlock { block: index };
        let mut head = [0u8; 8];
        match read_full(&mut self.inner, &mut head)? {
            0 => return Ok(None),
            8 => {}
            _ => return Err(truncated()),
        }
        let events = u32::from_le_bytes(head[..4].try_into().unwrap());
        let len = u32::from_le_bytes(head[4..].try_into().unwrap()) as u64;
        let mut payload = Vec::new();
        (&mut self.inner).take(len).read_to_end(&mut payload)?;
        let mut crc = [0u8; 4];
        if (payload.len() as u64) < len || read_full(&mut self.inner, &mut crc)? < 4 {
            return Err(truncated());
        }
        check_crc(index, &payload, u32::from_le_bytes(crc))?;
        self.next_block += 1;
        Ok(Some(RawBlock { index, events, payload }))
    }

    pub fn next_block(&mut self) -> Result<Option<Vec<Value>>, StorageError> {
        let Some(raw) = self.next_raw_block()? else {
            return Ok(None);
        };
        let (values, decoded) = decode_block(&self.schema, self.compressed, raw.index, &raw.payload, raw.events)?;
        self.decoded_bytes += decoded;
        Ok(Some(values))
    }

    /// Lazily yields every event, block by block. Stops after the first error.
    pub fn events(self) -> Events<R> {
        Events {
            reader: self,
            current: Vec::new().into_iter(),
            failed: false,
        }
    }
}

pub struct Events<R: Read> {
    reader: EvtReader<R>,
    current: std::vec::IntoIter<Value>,
    failed: bool,
}

impl<R: Read> Events<R> {
    pub fn counters(&self) -> ByteCounters {
        self.reader.counters()
    }
}

impl<R: Read> Iterator for Events<R> {
    type Item = Result<Value, StorageError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(v) = self.current.next() {
                return Some(Ok(v));
            }
            if self.failed {
                return None;
            }
            match self.reader.next_block() {
                Ok(Some(block)) => self.current = block.into_iter(),
                Ok(None) => return None,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Opens an EVT file for sequential reading.
pub fn read_evt(path: &Path) -> Result<EvtReader<BufReader<File>>, StorageError> {
    EvtReader::new(BufReader::with_capacity(1 << 20, File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    /// Offset of the block's event-count field.
    pub offset: u64,
    pub events: u32,
    pub payload_bytes: u32,
}

impl BlockInfo {
    /// Bytes the block occupies on disk, framing included.
    pub fn stored_bytes(&self) -> u64 {
        BLOCK_OVERHEAD + self.payload_bytes as u64
    }

    pub fn end(&self) -> u64 {
        self.offset + self.stored_bytes()
    }
}

/// Block table of an EVT file, built by reading only block framing.
#[derive(Debug, Clone, PartialEq)]
pub struct EvtLayout {
    pub path: PathBuf,
    pub schema: Schema,
    pub compressed: bool,
    pub header_bytes: u64,
    pub file_bytes: u64,
    pub blocks: Vec<BlockInfo>,
}

impl EvtLayout {
    pub fn events(&self) -> u64 {
        self.blocks.iter().map(|b| b.events as u64).sum()
    }

    pub fn block_bytes(&self, range: Range<usize>) -> u64 {
        self.blocks[range].iter().map(BlockInfo::stored_bytes).sum()
    }

    /// Reads the contiguous bytes of a block range from an open file.
    pub fn read_range(&self, file: &mut File, range: Range<usize>) -> Result<Vec<u8>, StorageError> {
        if range.is_empty() {
            return Ok(Vec::new());
        }
        let start = self.blocks[range.start].offset;
        let end = self.blocks[range.end - 1].end();
        file.seek(SeekFrom::Start(start))?;
        let mut buf = vec![0u8; (end - start) as usize];
        if read_full(file, &mut buf)? < buf.len() {
            return Err(StorageError::TruncatedBlock { block: range.start });
        }
        Ok(buf)
    }

    /// Verifies and decodes bytes previously returned by [`EvtLayout::read_range`].
    pub fn decode_range(&self, range: Range<usize>, bytes: &[u8]) -> Result<(Vec<Value>, u64), StorageError> {
        let total: usize = self.blocks[range.clone()].iter().map(|b| b.events as usize).sum();
        let mut events = Vec::with_capacity(total);
        let mut decoded = 0;
        let mut pos = 0usize;
        for index in range {
            let info = self.blocks[index];
            let len = info.payload_bytes as usize;
            let frame = bytes
                .get(pos..pos + 12 + len)
                .ok_or(StorageError::TruncatedBlock { block: index })?;
            let payload = &frame[8..8 + len];
            let crc = u32::from_le_bytes(frame[8 + len..].try_into().unwrap());
            check_crc(index, payload, crc)?;
            let (mut values, n) = decode_block(&self.schema, self.compressed, index, payload, info.events)?;
            events.append(&mut values);
            decoded += n;
            pos += frame.len();
        }
        Ok((events, decoded))
    }
}

/// Builds the block table by walking block framing; payloads are skipped, not verified.
pub fn scan_evt(path: &Path) -> Result<EvtLayout, StorageError> {
    let mut file = BufReader::new(File::open(path)?);
    let file_bytes = file.get_ref().metadata()?.len();
    let header = read_header(&mut file, MAGIC)?;
    let schema = schema_from_json(&header)?;
    let mut flags = [0u8; 1];
    if read_full(&mut file, &mut flags)? < 1 {
        return Err(StorageError::CorruptHeader("missing flags byte".into()));
    }
    if flags[0] & !FLAG_DEFLATE != 0 {
        return Err(StorageError::CorruptHeader(format!(
            "unknown flag bits {:#04x}",
            flags[0]
        )));
    }
    let header_bytes = 8 + header.len() as u64 + 1;
    let mut blocks = Vec::new();
    let mut offset = header_bytes;
    while offset < file_bytes {
        let block = blocks.len();
        let mut head = [0u8; 8];
        if offset + BLOCK_OVERHEAD > file_bytes || read_full(&mut file, &mut head)? < 8 {
            return Err(StorageError::TruncatedBlock { block });
        }
        let info = BlockInfo {
            offset,
            events: u32::from_le_bytes(head[..4].try_into().unwrap()),
            payload_bytes: u32::from_le_bytes(head[4..].try_into().unwrap()),
        };
        if info.end() > file_bytes {
            return Err(StorageError::TruncatedBlock { block });
        }
        file.seek_relative(info.payload_bytes as i64 + 4)?;
        offset = info.end();
        blocks.push(info);
    }
    Ok(EvtLayout {
        path: path.to_path_buf(),
        schema,
        compressed: flags[0] & FLAG_DEFLATE != 0,
        header_bytes,
        file_bytes,
        blocks,
    })
}

/// Rewrites an EVT file with new block size and compression. Events are
/// decoded and re-encoded, so every CRC is recomputed. The output is written
/// beside its destination and renamed into place.
pub fn convert_evt(input: &Path, output: &Path, opts: WriteOptions) -> Result<EvtSummary, StorageError> {
    let mut reader = read_evt(input)?;
    let schema = reader.schema().clone();
    let tmp = output.with_extension("evt.partial");
    let result = (|| {
        let mut w = EvtWriter::new(BufWriter::new(File::create(&tmp)?), &schema, opts)?;
        while let Some(block) = reader.next_block()? {
            for e in &block {
                w.push(e)?;
            }
        }
        let (buf, summary) = w.finish()?;
        buf.into_inner().map_err(|e| e.into_error())?;
        fs::rename(&tmp, output)?;
        Ok(summary)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
