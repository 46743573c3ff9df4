//! CSV and JSON artifact emission.
//!
//! Every run writes per-series CSV files (header row, one row per grid node)
//! and a single `summary.json` whose header echoes the resolved config and
//! seed, so each emitted number traces back to its inputs. Nothing
//! time-dependent is written: rerunning with the same config and seed
//! reproduces the artifacts byte for byte.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::{HarnessError, Result};

/// One CSV column: a name and one value per grid node.
pub struct Column {
    pub name: &'static str,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: &'static str, values: Vec<f64>) -> Self {
        Self { name, values }
    }
}

/// Write `<dir>/<name>` with a header row and one row per node.
pub fn write_series_csv(dir: &Path, name: &str, columns: &[Column]) -> Result<PathBuf> {
    assert!(!columns.is_empty());
    let rows = columns[0].values.len();
    assert!(columns.iter().all(|c| c.values.len() == rows));

    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| HarnessError::Numeric(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(columns.iter().map(|c| c.name))
        .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    let mut record = Vec::with_capacity(columns.len());
    for r in 0..rows {
        record.clear();
        for c in columns {
            record.push(format_float(c.values[r]));
        }
        w.write_record(&record).map_err(|e| HarnessError::Numeric(e.to_string()))?;
    }
    w.flush()?;
    Ok(path)
}

/// Shortest roundtrip decimal form; infinities and NaN are spelled out.
fn format_float(v: f64) -> String {
    if v.is_finite() {
        let mut buf = ryu_format(v);
        // trim the ".0" ryu puts on integral values to keep columns compact
        if buf.ends_with(".0") {
            buf.truncate(buf.len() - 2);
        }
        buf
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn ryu_format(v: f64) -> String {
    // serde_json's float path is ryu; going through it keeps CSV and JSON
    // representations of the same number identical
    serde_json::to_string(&v).expect("finite float serializes")
}

/// Write `<dir>/summary.json`, pretty-printed with a trailing newline.
pub fn write_summary_json(dir: &Path, summary: &Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| HarnessError::Numeric(format!("summary serialization: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Reject non-finite headline metrics before they reach an artifact.
pub fn ensure_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(HarnessError::Numeric(format!("{name} is not finite ({v})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("decomp-report-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn csv_layout_is_stable() {
        let dir = tmp_dir("layout");
        let cols = vec![
            Column::new("t", vec![0.0, 0.5, 1.0]),
            Column::new("value", vec![1.25, -3.0e-7, 2.0]),
        ];
        let path = write_series_csv(&dir, "series.csv", &cols).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,value\n0,1.25\n0.5,-3e-7\n1,2\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rewrites_are_byte_identical() {
        let dir = tmp_dir("rewrite");
        let cols = vec![Column::new("t", vec![0.1, 0.2]), Column::new("v", vec![1.0 / 3.0, 2.0 / 3.0])];
        let p1 = write_series_csv(&dir, "a.csv", &cols).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let p2 = write_series_csv(&dir, "a.csv", &cols).unwrap();
        assert_eq!(b1, std::fs::read(&p2).unwrap());

        let summary = serde_json::json!({"config": {"seed": 42}, "metric": 0.1 + 0.2});
        let j1 = std::fs::read(write_summary_json(&dir, &summary).unwrap()).unwrap();
        let j2 = std::fs::read(write_summary_json(&dir, &summary).unwrap()).unwrap();
        assert_eq!(j1, j2);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn non_finite_metrics_are_rejected() {
        assert!(ensure_finite("ok", 1.0).is_ok());
        assert!(ensure_finite("bad", f64::NAN).is_err());
        assert!(ensure_finite("bad", f64::INFINITY).is_err());
    }
}
