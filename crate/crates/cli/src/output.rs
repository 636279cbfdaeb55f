//! Atomic artifact writes and the metrics CSV.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use intentplan::sim::Metrics;
use serde::Serialize;
use tempfile::NamedTempFile;

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Header and one line per record.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub const METRICS_HEADER: [&str; 9] =
    ["scenario", "seed", "model", "prediction_ms", "mhd_m", "smoothness", "jerkiness", "min_distance_m", "efficiency"];

/// Metrics table with the fixed column order.
pub fn emit_csv(rows: &[Metrics], path: &Path) -> Result<()> {
    write_atomic(path, &csv_bytes(&METRICS_HEADER, rows)?)
}

/// Parses a file written by [`emit_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<Metrics>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> Metrics {
        Metrics {
            scenario: "blocking".into(),
            seed: 3,
            model: "iplanner-ni".into(),
            prediction_ms: Some(12.5),
            mhd_m: 0.0421,
            smoothness: 0.0153,
            jerkiness: 0.1,
            min_distance_m: 0.1567,
            efficiency: 0.8421052631578947,
        }
    }

    #[test]
    fn zero_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        emit_csv(&[], &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "scenario,seed,model,prediction_ms,mhd_m,smoothness,jerkiness,min_distance_m,efficiency\n"
        );
    }

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut b = row();
        b.prediction_ms = None;
        b.model = "itomp".into();
        emit_csv(&[row(), b.clone()], &p).unwrap();
        assert_eq!(read_metrics_csv(&p).unwrap(), vec![row(), b]);
    }

    #[test]
    fn unwritable_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[row()], &dir.path().join("missing").join("m.csv")).is_err());
    }
}
