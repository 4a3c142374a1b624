//! On-disk columnar tables.
//!
//! A table directory holds `schema.json` plus one `<column>.pcol` slot file
//! per column:
//!
//! ```text
//! "PCOL" | version u32 = 1 | type tag u32 (0 = int32, 1 = varchar)
//!        | slot_width u32 | row_count u64 | row_count * slot_width bytes
//! ```
//!
//! All integers are little-endian. Varchar slots are zero padded. Reads go
//! through a shared LRU cache of 32 KiB pages.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use posrec_core::types::encode_slot;
use posrec_core::{check_positions, ColumnData, ColumnSource, ColumnType, Error, TableSchema, Value};

use crate::error::{PosrecError, Result};

pub const PAGE_SIZE: usize = 32 * 1024;
pub const DEFAULT_CACHE_PAGES: usize = 4096;
pub const SCHEMA_FILE: &str = "schema.json";
const MAGIC: &[u8; 4] = b"PCOL";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 24;

static NEXT_FILE_ID: AtomicU32 = AtomicU32::new(0);

type Page = Arc<[u8]>;

/// Fixed-size pages keyed by (file id, page number), evicted LRU.
#[derive(Debug)]
pub struct PageCache {
    pages: Mutex<LruCache<(u32, u64), Page>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl PageCache {
    pub fn new(capacity: usize) -> Result<Self> {
        let cap = NonZeroUsize::new(capacity)
            .ok_or_else(|| PosrecError::Usage("page cache capacity must be at least 1".into()))?;
        Ok(PageCache { pages: Mutex::new(LruCache::new(cap)), capacity, hits: AtomicU64::new(0), misses: AtomicU64::new(0) })
    }

    pub fn shared_default() -> Arc<Self> {
        Arc::new(Self::new(DEFAULT_CACHE_PAGES).expect("non-zero default"))
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident(&self) -> usize {
        self.lock().len()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn clear(&self) {
        self.lock().clear();
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LruCache<(u32, u64), Page>> {
        // Pages are immutable, so a poisoned cache is still consistent.
        self.pages.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn get(&self, file: &ColumnFile, page: u64) -> Result<Page> {
        let key = (file.id, page);
        if let Some(p) = self.lock().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(p.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let loaded = file.read_page(page)?;
        self.lock().put(key, loaded.clone());
        Ok(loaded)
    }
}

#[derive(Debug)]
struct ColumnFile {
    id: u32,
    path: PathBuf,
    file: Mutex<File>,
    ty: ColumnType,
    width: usize,
    rows: u64,
}

impl ColumnFile {
    fn open(path: &Path, expected: ColumnType) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| PosrecError::io(path, e))?;
        let mut header = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut header).map_err(|e| PosrecError::io(path, e))?;
        let bad = |message: String| PosrecError::Format { path: path.to_path_buf(), message };
        if &header[0..4] != MAGIC {
            return Err(bad("not a PCOL column file".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
        let (version, tag, width) = (u32_at(4), u32_at(8), u32_at(12));
        let rows = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        if tag != type_tag(expected) || width as usize != expected.slot_width() {
            return Err(bad(format!("header (tag {tag}, width {width}) does not match schema type {expected}")));
        }
        let len = file.metadata().map_err(|e| PosrecError::io(path, e))?.len();
        if len != HEADER_LEN + rows * width as u64 {
            return Err(bad(format!("{len} bytes on disk, header promises {rows} slots of {width}")));
        }
        Ok(ColumnFile {
            id: NEXT_FILE_ID.fetch_add(1, Ordering::Relaxed),
            path: path.to_path_buf(),
            file: Mutex::new(file),
            ty: expected,
            width: width as usize,
            rows,
        })
    }

    fn payload_len(&self) -> u64 {
        self.rows * self.width as u64
    }

    fn read_page(&self, page: u64) -> Result<Page> {
        let start = page * PAGE_SIZE as u64;
        let len = (self.payload_len() - start).min(PAGE_SIZE as u64) as usize;
        let mut buf = vec![0u8; len];
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.seek(SeekFrom::Start(HEADER_LEN + start)).map_err(|e| PosrecError::io(&self.path, e))?;
        f.read_exact(&mut buf).map_err(|e| PosrecError::io(&self.path, e))?;
        Ok(buf.into())
    }
}

fn type_tag(ty: ColumnType) -> u32 {
    match ty {
        ColumnType::Int32 => 0,
        ColumnType::Varchar { .. } => 1,
    }
}

pub fn column_path(dir: &Path, column: &str) -> PathBuf {
    dir.join(format!("{column}.pcol"))
}

/// Writes `data` as a column slot file.
pub fn write_column(path: &Path, data: &ColumnData) -> Result<()> {
    let io = |e| PosrecError::io(path, e);
    let ty = data.column_type();
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = Vec::with_capacity(HEADER_LEN as usize);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&type_tag(ty).to_le_bytes());
    header.extend_from_slice(&(ty.slot_width() as u32).to_le_bytes());
    header.extend_from_slice(&(data.len() as u64).to_le_bytes());
    w.write_all(&header).map_err(io)?;
    match data {
        ColumnData::Int32(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes()).map_err(io)?;
            }
        }
        ColumnData::Varchar { bytes, .. } => w.write_all(bytes).map_err(io)?,
    }
    w.flush().map_err(io)
}

pub fn read_schema(dir: &Path) -> Result<TableSchema> {
    read_schema_file(&dir.join(SCHEMA_FILE))
}

pub fn read_schema_file(path: &Path) -> Result<TableSchema> {
    let path = path.to_path_buf();
    let text = fs::read_to_string(&path).map_err(|e| PosrecError::io(&path, e))?;
    let schema: TableSchema = serde_json::from_str(&text)
        .map_err(|e| PosrecError::Format { path: path.clone(), message: e.to_string() })?;
    schema.validate()?;
    Ok(schema)
}

pub fn write_schema(dir: &Path, schema: &TableSchema) -> Result<()> {
    let path = dir.join(SCHEMA_FILE);
    let text = serde_json::to_string_pretty(schema).map_err(|e| PosrecError::Json(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| PosrecError::io(&path, e))
}

/// An immutable table backed by column slot files.
#[derive(Debug)]
pub struct ColumnTable {
    dir: PathBuf,
    schema: TableSchema,
    rows: usize,
    columns: Vec<ColumnFile>,
    cache: Arc<PageCache>,
    values_read: Vec<AtomicU64>,
}

impl ColumnTable {
    /// Opens the table stored in `dir`; every column file must exist and
    /// hold the same number of rows.
    pub fn open(dir: &Path, cache: Arc<PageCache>) -> Result<Self> {
        let schema = read_schema(dir)?;
        let columns = schema
            .columns
            .iter()
            .map(|f| ColumnFile::open(&column_path(dir, &f.name), f.ty))
            .collect::<Result<Vec<_>>>()?;
        let rows = columns.first().map_or(0, |c| c.rows);
        if let Some(c) = columns.iter().find(|c| c.rows != rows) {
            return Err(PosrecError::Format {
                path: c.path.clone(),
                message: format!("{} rows, other columns have {rows}", c.rows),
            });
        }
        let values_read = columns.iter().map(|_| AtomicU64::new(0)).collect();
        Ok(ColumnTable { dir: dir.to_path_buf(), schema, rows: rows as usize, columns, cache, values_read })
    }

    /// Clears the page cache and opens fresh file handles.
    pub fn reopen_cold(&self) -> Result<Self> {
        self.cache.clear();
        Self::open(&self.dir, self.cache.clone())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn cache(&self) -> &Arc<PageCache> {
        &self.cache
    }

    /// Values read from `column` through this handle since it was opened.
    pub fn values_read(&self, column: &str) -> Result<u64> {
        let (i, _) = self.schema.column(column)?;
        Ok(self.values_read[i].load(Ordering::Relaxed))
    }

    pub fn read_slots(&self, column: &str, positions: &[u32]) -> Result<Vec<Value>> {
        let (i, f) = self.schema.column(column)?;
        let mut out = ColumnData::with_capacity(f.ty, positions.len());
        self.read_into(i, positions, &mut out)?;
        Ok((0..out.len()).map(|r| out.value(r)).collect())
    }

    fn read_column(&self, column: usize, positions: &[u32], out: &mut ColumnData) -> Result<()> {
        let file = &self.columns[column];
        let width = file.width;
        let mut current: Option<(u64, Page)> = None;
        let mut slot = vec![0u8; width];
        for &p in positions {
            let mut offset = p as u64 * width as u64;
            let mut filled = 0;
            // A slot may straddle a page boundary.
            while filled < width {
                let page_no = offset / PAGE_SIZE as u64;
                let page = match &current {
                    Some((n, page)) if *n == page_no => page.clone(),
                    _ => {
                        let page = self.cache.get(file, page_no)?;
                        current = Some((page_no, page.clone()));
                        page
                    }
                };
                let in_page = (offset % PAGE_SIZE as u64) as usize;
                let take = (width - filled).min(page.len() - in_page);
                slot[filled..filled + take].copy_from_slice(&page[in_page..in_page + take]);
                filled += take;
                offset += take as u64;
            }
            match out {
                ColumnData::Int32(v) => v.push(i32::from_le_bytes(slot[..4].try_into().expect("4 bytes"))),
                ColumnData::Varchar { width: w, bytes } if *w == width => bytes.extend_from_slice(&slot),
                ColumnData::Varchar { .. } => unreachable!("output checked against the column type"),
            }
        }
        Ok(())
    }
}

impl ColumnSource for ColumnTable {
    fn schema(&self) -> &TableSchema {
        &self.schema
    }

    fn row_count(&self) -> usize {
        self.rows
    }

    fn read_into(&self, column: usize, positions: &[u32], out: &mut ColumnData) -> posrec_core::Result<()> {
        let file = self.columns.get(column).ok_or_else(|| Error::UnknownColumn(format!("#{column}")))?;
        if out.column_type() != file.ty {
            return Err(Error::SchemaMismatch(format!(
                "reading {} column `{}` into a {} buffer",
                file.ty,
                self.schema.columns[column].name,
                out.column_type()
            )));
        }
        check_positions(positions, self.rows)?;
        self.read_column(column, positions, out).map_err(|e| Error::Storage(e.to_string()))?;
        self.values_read[column].fetch_add(positions.len() as u64, Ordering::Relaxed);
        Ok(())
    }
}

/// Parses `csv_path` against `schema` and writes the table into `out_dir`.
pub fn load_csv(csv_path: &Path, schema: &TableSchema, out_dir: &Path) -> Result<ColumnTable> {
    load_csv_with_cache(csv_path, schema, out_dir, PageCache::shared_default())
}

pub fn load_csv_with_cache(
    csv_path: &Path,
    schema: &TableSchema,
    out_dir: &Path,
    cache: Arc<PageCache>,
) -> Result<ColumnTable> {
    schema.validate()?;
    let columns = read_csv_columns(csv_path, schema)?;
    fs::create_dir_all(out_dir).map_err(|e| PosrecError::io(out_dir, e))?;
    for (f, data) in schema.columns.iter().zip(&columns) {
        write_column(&column_path(out_dir, &f.name), data)?;
    }
    write_schema(out_dir, schema)?;
    ColumnTable::open(out_dir, cache)
}

fn read_csv_columns(csv_path: &Path, schema: &TableSchema) -> Result<Vec<ColumnData>> {
    let csv_err = |e: csv::Error| PosrecError::Format { path: csv_path.to_path_buf(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(csv_path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = schema.columns.iter().map(|f| f.name.as_str()).collect();
    if header.iter().collect::<Vec<_>>() != names {
        return Err(Error::SchemaMismatch(format!("CSV header {:?} differs from schema columns {names:?}", header))
            .into());
    }
    let mut columns: Vec<ColumnData> = schema.columns.iter().map(|f| ColumnData::new(f.ty)).collect();
    let mut record = csv::StringRecord::new();
    let mut line = 1;
    while reader.read_record(&mut record).map_err(csv_err)? {
        line += 1;
        if record.len() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "line {line}: {} fields, schema has {} columns",
                record.len(),
                columns.len()
            ))
            .into());
        }
        for ((field, col), f) in record.iter().zip(&mut columns).zip(&schema.columns) {
            push_field(col, field).map_err(|e| match e {
                Error::ValueOverflow(m) => Error::ValueOverflow(format!("line {line}, column `{}`: {m}", f.name)),
                Error::SchemaMismatch(m) => Error::SchemaMismatch(format!("line {line}, column `{}`: {m}", f.name)),
                other => other,
            })?;
        }
    }
    Ok(columns)
}

fn push_field(col: &mut ColumnData, field: &str) -> posrec_core::Result<()> {
    match col {
        ColumnData::Int32(v) => {
            v.push(parse_int(field)?);
            Ok(())
        }
        ColumnData::Varchar { width, bytes } => {
            let start = bytes.len();
            bytes.resize(start + *width, 0);
            let res = encode_slot(field, &mut bytes[start..]);
            if res.is_err() {
                bytes.truncate(start);
            }
            res
        }
    }
}

fn parse_int(field: &str) -> posrec_core::Result<i32> {
    match field.parse::<i64>() {
        Ok(x) => i32::try_from(x).map_err(|_| Error::ValueOverflow(format!("{x} does not fit in int32"))),
        Err(_) if !field.is_empty() && field.trim_start_matches('-').bytes().all(|b| b.is_ascii_digit()) => {
            Err(Error::ValueOverflow(format!("{field} does not fit in int32")))
        }
        Err(_) => Err(Error::SchemaMismatch(format!("`{field}` is not an integer"))),
    }
}
