//! CSV export/import of sample matrices with a `key=value` sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Header row `x1,…,xp` followed by one row per sample. Values are written
/// with Rust's shortest round-trip formatting so a reload is bit-exact.
pub fn matrix_to_csv(m: &Tensor) -> String {
    let mut s = String::new();
    let header: Vec<String> = (1..=m.cols()).map(|j| format!("x{j}")).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for r in m.iter_rows() {
        for (j, v) in r.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v}").expect("string write");
        }
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<Tensor> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("empty csv".into()))?;
    let cols = header.split(',').count();
    let mut data = Vec::new();
    let mut rows = 0;
    for (ln, line) in lines.enumerate() {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols {
            return Err(Error::Dimension(format!(
                "csv row {} has {} fields, header has {cols}",
                ln + 1,
                vals.len()
            )));
        }
        for v in vals {
            data.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("csv row {}: {e}", ln + 1)))?,
            );
        }
        rows += 1;
    }
    Tensor::from_vec(rows, cols, data)
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes `m` to `path` and `meta` to `<path>.meta`.
pub fn save_samples(path: &Path, m: &Tensor, meta: &BTreeMap<String, String>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    let mut side = String::new();
    for (k, v) in meta {
        writeln!(side, "{k}={v}").expect("string write");
    }
    fs::write(sidecar_path(path), side)?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<(Tensor, BTreeMap<String, String>)> {
    let m = matrix_from_csv(&fs::read_to_string(path)?)?;
    let side = sidecar_path(path);
    let mut meta = BTreeMap::new();
    if side.exists() {
        for line in fs::read_to_string(side)?.lines() {
            if let Some((k, v)) = line.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
    }
    Ok((m, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = Tensor::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 12345.678]]).unwrap();
        let text = matrix_to_csv(&m);
        assert!(text.starts_with("x1,x2\n"));
        assert_eq!(matrix_from_csv(&text).unwrap(), m);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matrix_from_csv("x1,x2\n1,2\n3\n").is_err());
    }

    #[test]
    fn sidecar_is_written_next_to_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "42".to_string());
        save_samples(&path, &Tensor::zeros(2, 3), &meta).unwrap();
        let (m, back) = load_samples(&path).unwrap();
        assert_eq!(m.shape(), [2, 3]);
        assert_eq!(back["seed"], "42");
    }
}
