//! Deterministic text formatting shared by the CSV and JSON writers.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;

/// Shortest round-trip scientific representation; identical inputs always
/// format to identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

/// Opens `path` for buffered writing, creating parent directories.
pub fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    use std::io::Write;
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Finite values pass through; infinities become `None` so they serialize
/// as JSON `null`.
pub fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
