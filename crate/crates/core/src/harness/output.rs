//! CSV and JSON artifacts. CSV floats carry 17 significant digits; JSON uses the shortest
//! representation that round-trips.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::SweepRow;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    let mut s = SweepRow::HEADER.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.values().iter().map(|&v| fmt_float(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `contents` to `dir/name`, creating `dir`.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
