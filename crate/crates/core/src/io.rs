//! Delimited-text input and output.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{EcapError, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub columns: Matrix<f64>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.as_ref()?.iter().position(|h| h == name)
    }

    /// Splits off one column as the response.
    pub fn split_column(&self, j: usize) -> (Vec<f64>, Table) {
        let keep: Vec<usize> = (0..self.columns.cols()).filter(|&k| k != j).collect();
        let header = self.header.as_ref().map(|h| keep.iter().map(|&k| h[k].clone()).collect());
        (self.columns.col(j).to_vec(), Table { header, columns: self.columns.select_columns(&keep) })
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EcapError {
    EcapError::Io(format!("{}: {e}", path.display()))
}

/// Parses comma-separated numbers. Every row must have the same number of
/// fields as the first; a mismatch is reported with its 1-based line.
pub fn read_table<R: Read>(reader: R, has_header: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            EcapError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(EcapError::Parse { line, message: format!("expected {w} fields, found {}", record.len()) });
            }
            _ => {}
        }
        if has_header && header.is_none() {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<f64>().map_err(|_| EcapError::Parse { line, message: format!("field {} is not a number: {f:?}", k + 1) })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let w = width.unwrap_or(0);
    if rows.is_empty() || w == 0 {
        return Err(EcapError::Parse { line: 0, message: "no data rows".into() });
    }
    let columns = Matrix::from_fn(rows.len(), w, |i, j| rows[i][j]);
    Ok(Table { header, columns })
}

pub fn read_table_path(path: &Path, has_header: bool) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_table(file, has_header)
}

/// A response file: a single column of numbers.
pub fn read_vector_path(path: &Path, has_header: bool) -> Result<Vec<f64>> {
    let t = read_table_path(path, has_header)?;
    if t.columns.cols() != 1 {
        return Err(EcapError::DimensionMismatch(format!("{}: expected one column, found {}", path.display(), t.columns.cols())));
    }
    Ok(t.columns.col(0).to_vec())
}

pub fn write_vector<W: Write>(mut w: W, name: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{name}")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Writes rows of already-formatted fields, comma separated.
pub fn write_rows<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| EcapError::Io(e.to_string());
    wtr.write_record(header).map_err(err)?;
    for r in rows {
        wtr.write_record(r).map_err(err)?;
    }
    wtr.flush().map_err(|e| EcapError::Io(e.to_string()))?;
    Ok(())
}
