//! Atomic CSV and JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Write `bytes` to a temporary file next to `path`, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Render rows as CSV in memory. `None` fields become empty cells.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = Option<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        let fields: Vec<String> = row.into_iter().map(Option::unwrap_or_default).collect();
        w.write_record(&fields)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = Option<String>>,
{
    write_atomic(path, &csv_bytes(header, rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// `out.csv` -> `out.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("json")
}

/// `out.csv` -> `out_r{index}.csv`.
pub fn indexed_path(output: &Path, index: usize) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match output.extension() {
        Some(ext) => format!("{stem}_r{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_r{index}"),
    };
    output.with_file_name(name)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> Option<String> {
    Some(v.to_string())
}
