//! CSV traces. Every float is written with 17 significant digits and
//! non-finite values are refused.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const GAP_EXPERIMENT_HEADER: [&str; 7] = ["m", "seed", "gap1", "gap2", "qerr1", "qerr2", "nodes"];
pub const DISCOUNTED_HEADER: [&str; 4] = ["iter", "delta", "v1_s0", "v2_s0"];
pub const FINITE_HEADER: [&str; 4] = ["t", "state", "value1", "value2"];

/// One CSV cell.
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct TraceWriter {
    path: PathBuf,
    columns: usize,
    writer: csv::Writer<File>,
}

impl TraceWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer.write_record(header).map_err(|e| csv_error(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            columns: header.len(),
            writer,
        })
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<(), CliError> {
        assert_eq!(cells.len(), self.columns, "trace row width");
        let mut record = Vec::with_capacity(cells.len());
        for cell in cells {
            record.push(match cell {
                Cell::Int(v) => v.to_string(),
                Cell::Text(v) => v,
                Cell::Float(v) if v.is_finite() => format_float(v),
                Cell::Float(v) => {
                    return Err(CliError::NonFinite {
                        path: self.path.clone(),
                        value: v,
                    })
                }
            });
        }
        self.writer.write_record(&record).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = format_float(1.0 / 3.0);
        assert_eq!(s, "3.3333333333333331e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn writes_header_and_rejects_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = TraceWriter::create(&path, &FINITE_HEADER).unwrap();
        w.row(vec![0usize.into(), 1usize.into(), 0.5.into(), (-2.0).into()]).unwrap();
        assert!(matches!(
            w.row(vec![0usize.into(), 1usize.into(), f64::NAN.into(), 0.0.into()]),
            Err(CliError::NonFinite { .. })
        ));
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "t,state,value1,value2\n0,1,5.0000000000000000e-1,-2.0000000000000000e0\n"
        );
    }
}
