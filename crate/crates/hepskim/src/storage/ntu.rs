//! NTU: a columnar ntuple.
//!
//! ```text
//! "NTU1" | u32 header_len | header (canonical column JSON)
//! group*: u32 rows | column_0 values | column_1 values | ...
//! footer: u64 total_rows | u32 group_count
//! ```
//!
//! Each column within a group is a contiguous little-endian array of its
//! primitive kind (bools as single bytes), so a reader can seek straight to
//! the columns it needs.

use std::fs::{self, File};
use std::io::{self, BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use hepskim_core::codec::decode_scalar;
use hepskim_core::{Column, PrimitiveKind, Scalar};

use super::schema_json::{columns_from_json, columns_to_json};
use super::{read_full, read_header, write_header, StorageError};

pub const MAGIC: &str = "NTU1";
pub const DEFAULT_GROUP_ROWS: u32 = 65_536;
pub const FOOTER_BYTES: u64 = 12;

/// One column's values.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    F64(Vec<f64>),
    F32(Vec<f32>),
    I64(Vec<i64>),
    I32(Vec<i32>),
    Bool(Vec<bool>),
}

impl ColumnData {
    pub fn new(kind: PrimitiveKind) -> Self {
        match kind {
            PrimitiveKind::F64 => ColumnData::F64(Vec::new()),
            PrimitiveKind::F32 => ColumnData::F32(Vec::new()),
            PrimitiveKind::I64 => ColumnData::I64(Vec::new()),
            PrimitiveKind::I32 => ColumnData::I32(Vec::new()),
            PrimitiveKind::Bool => ColumnData::Bool(Vec::new()),
        }
    }

    pub fn kind(&self) -> PrimitiveKind {
        match self {
            ColumnData::F64(_) => PrimitiveKind::F64,
            ColumnData::F32(_) => PrimitiveKind::F32,
            ColumnData::I64(_) => PrimitiveKind::I64,
            ColumnData::I32(_) => PrimitiveKind::I32,
            ColumnData::Bool(_) => PrimitiveKind::Bool,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::F64(v) => v.len(),
            ColumnData::F32(v) => v.len(),
            ColumnData::I64(v) => v.len(),
            ColumnData::I32(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a scalar of the column's kind; returns false on a kind mismatch.
    pub fn push(&mut self, s: Scalar) -> bool {
        match (self, s) {
            (ColumnData::F64(v), Scalar::F64(x)) => v.push(x),
            (ColumnData::F32(v), Scalar::F32(x)) => v.push(x),
            (ColumnData::I64(v), Scalar::I64(x)) => v.push(x),
            (ColumnData::I32(v), Scalar::I32(x)) => v.push(x),
            (ColumnData::Bool(v), Scalar::Bool(x)) => v.push(x),
            _ => return false,
        }
        true
    }

    pub fn get(&self, i: usize) -> Option<Scalar> {
        Some(match self {
            ColumnData::F64(v) => Scalar::F64(*v.get(i)?),
            ColumnData::F32(v) => Scalar::F32(*v.get(i)?),
            ColumnData::I64(v) => Scalar::I64(*v.get(i)?),
            ColumnData::I32(v) => Scalar::I32(*v.get(i)?),
            ColumnData::Bool(v) => Scalar::Bool(*v.get(i)?),
        })
    }

    /// Values widened to f64, as used for histogramming.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            ColumnData::F64(v) => v.clone(),
            ColumnData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            ColumnData::I64(v) => v.iter().map(|&x| x as f64).collect(),
            ColumnData::I32(v) => v.iter().map(|&x| x as f64).collect(),
            ColumnData::Bool(v) => v.iter().map(|&x| x as u8 as f64).collect(),
        }
    }

    fn clear(&mut self) {
        match self {
            ColumnData::F64(v) => v.clear(),
            ColumnData::F32(v) => v.clear(),
            ColumnData::I64(v) => v.clear(),
            ColumnData::I32(v) => v.clear(),
            ColumnData::Bool(v) => v.clear(),
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            ColumnData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ColumnData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ColumnData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ColumnData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ColumnData::Bool(v) => out.extend(v.iter().map(|&b| b as u8)),
        }
    }

    fn extend_from_bytes(&mut self, mut bytes: &[u8], rows: usize) -> Result<(), String> {
        for _ in 0..rows {
            let s = decode_scalar(self.kind(), &mut bytes).map_err(|e| e.to_string())?;
            self.push(s);
        }
        Ok(())
    }
}

/// Streaming NTU writer. Rows are buffered column-wise and flushed every `group_rows` rows.
pub struct NtuWriter<W: Write> {
    inner: W,
    columns: Vec<Column>,
    group_rows: u32,
    buffers: Vec<ColumnData>,
    pending: u32,
    total_rows: u64,
    groups: u32,
    scratch: Vec<u8>,
    bytes: u64,
}

impl<W: Write> NtuWriter<W> {
    pub fn new(mut inner: W, columns: &[Column], group_rows: u32) -> Result<Self, StorageError> {
        if group_rows == 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "group_rows must be at least 1").into());
        }
        let bytes = write_header(&mut inner, MAGIC, &columns_to_json(columns))?;
        Ok(NtuWriter {
            inner,
            buffers: columns.iter().map(|c| ColumnData::new(c.kind)).collect(),
            columns: columns.to_vec(),
            group_rows,
            pending: 0,
            total_rows: 0,
            groups: 0,
            scratch: Vec::new(),
            bytes,
        })
    }

    pub fn push_row(&mut self, row: &[Scalar]) -> Result<(), StorageError> {
        let mismatch = |reason: String| StorageError::ArityMismatch {
            row: self.total_rows,
            reason,
        };
        if row.len() != self.columns.len() {
            return Err(mismatch(format!(
                "{} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some((c, s)) = self.columns.iter().zip(row).find(|(c, s)| c.kind != s.kind()) {
            return Err(mismatch(format!(
                "column `{}` is {}, value is {}",
                c.name,
                c.kind,
                s.kind()
            )));
        }
        for (buf, s) in self.buffers.iter_mut().zip(row) {
            buf.push(*s);
        }
        self.pending += 1;
        self.total_rows += 1;
        if self.pending == self.group_rows {
            self.flush_group()?;
        }
        Ok(())
    }

    fn flush_group(&mut self) -> Result<(), StorageError> {
        if self.pending == 0 {
            return Ok(());
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.pending.to_le_bytes());
        for buf in &mut self.buffers {
            buf.encode(&mut self.scratch);
            buf.clear();
        }
        self.inner.write_all(&self.scratch)?;
        self.bytes += self.scratch.len() as u64;
        self.groups += 1;
        self.pending = 0;
        Ok(())
    }

    /// Flushes the last group and writes the footer. Returns the sink and the bytes written.
    pub fn finish(mut self) -> Result<(W, u64), StorageError> {
        self.flush_group()?;
        self.inner.write_all(&self.total_rows.to_le_bytes())?;
        self.inner.write_all(&self.groups.to_le_bytes())?;
        self.inner.flush()?;
        Ok((self.inner, self.bytes + FOOTER_BYTES))
    }
}

/// Writes rows to a new NTU file; a partial file is removed on error.
/// Returns the number of bytes written.
pub fn write_ntu<'a, I>(path: &Path, columns: &[Column], rows: I, group_rows: u32) -> Result<u64, StorageError>
where
    I: IntoIterator<Item = &'a [Scalar]>,
{
    let result = (|| {
        let mut w = NtuWriter::new(BufWriter::new(File::create(path)?), columns, group_rows)?;
        for row in rows {
            w.push_row(row)?;
        }
        let (buf, bytes) = w.finish()?;
        buf.into_inner().map_err(|e| e.into_error())?;
        Ok(bytes)
    })();
    if result.is_err() {
        let _ = fs::remove_file(path);
    }
    result
}

/// Group table of an NTU file.
#[derive(Debug, Clone, PartialEq)]
pub struct NtuLayout {
    pub columns: Vec<Column>,
    pub header_bytes: u64,
    pub file_bytes: u64,
    /// (offset of the group's row count, rows) per group.
    pub groups: Vec<(u64, u32)>,
    pub total_rows: u64,
}

impl NtuLayout {
    fn row_width(&self) -> u64 {
        self.columns.iter().map(|c| c.kind.width() as u64).sum()
    }
}

fn read_u32_at(file: &mut File, at: u64) -> Result<Option<u32>, StorageError> {
    file.seek(SeekFrom::Start(at))?;
    let mut b = [0u8; 4];
    Ok((read_full(file, &mut b)? == 4).then(|| u32::from_le_bytes(b)))
}

/// Reads header, footer and group row counts; returns the layout and the bytes read.
fn layout(file: &mut File) -> Result<(NtuLayout, u64), StorageError> {
    let file_bytes = file.metadata()?.len();
    let header = read_header(file, MAGIC)?;
    let columns = columns_from_json(&header)?;
    let header_bytes = 8 + header.len() as u64;
    let mismatch = StorageError::FooterMismatch;
    if file_bytes < header_bytes + FOOTER_BYTES {
        return Err(mismatch("file too short for a footer".into()));
    }
    let end = file_bytes - FOOTER_BYTES;
    file.seek(SeekFrom::Start(end))?;
    let mut footer = [0u8; 12];
    read_full(file, &mut footer)?;
    let total_rows = u64::from_le_bytes(footer[..8].try_into().unwrap());
    let group_count = u32::from_le_bytes(footer[8..].try_into().unwrap());
    let mut read = header_bytes + FOOTER_BYTES;
    let mut lay = NtuLayout {
        columns,
        header_bytes,
        file_bytes,
        groups: Vec::new(),
        total_rows,
    };
    let width = lay.row_width();
    let mut pos = header_bytes;
    while pos < end {
        let rows = read_u32_at(file, pos)?.ok_or_else(|| mismatch("truncated group header".into()))?;
        read += 4;
        lay.groups.push((pos, rows));
        pos += 4 + rows as u64 * width;
        if pos > end {
            return Err(mismatch(format!("group {} runs past the footer", lay.groups.len() - 1)));
        }
    }
    let sum: u64 = lay.groups.iter().map(|g| g.1 as u64).sum();
    if sum != total_rows || lay.groups.len() as u64 != group_count as u64 {
        return Err(mismatch(format!(
            "groups hold {sum} rows in {} groups, footer says {total_rows} rows in {group_count} groups",
            lay.groups.len()
        )));
    }
    Ok((lay, read))
}

pub fn scan_ntu(path: &Path) -> Result<NtuLayout, StorageError> {
    Ok(layout(&mut File::open(path)?)?.0)
}

/// Columns read back from an NTU file.
#[derive(Debug, Clone, PartialEq)]
pub struct NtuColumns {
    pub columns: Vec<(Column, ColumnData)>,
    pub rows: u64,
    /// Rows per group, in file order.
    pub group_rows: Vec<u32>,
    pub storage_bytes: u64,
}

impl NtuColumns {
    pub fn get(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|(c, _)| c.name == name).map(|(_, d)| d)
    }

    pub fn row(&self, i: usize) -> Option<Vec<Scalar>> {
        self.columns.iter().map(|(_, d)| d.get(i)).collect()
    }
}

/// Reads the named columns (all columns for `None`), seeking past the rest.
pub fn read_ntu(path: &Path, subset: Option<&[&str]>) -> Result<NtuColumns, StorageError> {
    let mut file = File::open(path)?;
    let (lay, mut storage_bytes) = layout(&mut file)?;
    let wanted: Vec<usize> = match subset {
        None => (0..lay.columns.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                lay.columns
                    .iter()
                    .position(|c| c.name == *n)
                    .ok_or_else(|| StorageError::UnknownColumn(n.to_string()))
            })
            .collect::<Result<_, _>>()?,
    };
    let mut data: Vec<ColumnData> = wanted.iter().map(|&i| ColumnData::new(lay.columns[i].kind)).collect();
    let mut buf = Vec::new();
    for &(offset, rows) in &lay.groups {
        let mut col_offset = offset + 4;
        let mut starts = Vec::with_capacity(lay.columns.len());
        for c in &lay.columns {
            starts.push(col_offset);
            col_offset += rows as u64 * c.kind.width() as u64;
        }
        for (slot, &ci) in wanted.iter().enumerate() {
            let len = rows as usize * lay.columns[ci].kind.width();
            buf.resize(len, 0);
            file.seek(SeekFrom::Start(starts[ci]))?;
            if read_full(&mut file, &mut buf)? < len {
                return Err(StorageError::FooterMismatch("column data truncated".into()));
            }
            storage_bytes += len as u64;
            data[slot]
                .extend_from_bytes(&buf, rows as usize)
                .map_err(|e| StorageError::FooterMismatch(format!("column `{}`: {e}", lay.columns[ci].name)))?;
        }
    }
    Ok(NtuColumns {
        columns: wanted.iter().map(|&i| lay.columns[i].clone()).zip(data).collect(),
        rows: lay.total_rows,
        group_rows: lay.groups.iter().map(|g| g.1).collect(),
        storage_bytes,
    })
}
