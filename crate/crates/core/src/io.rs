//! CSV interchange for data matrices, labels and membership tables.
//!
//! Data files are plain comma-separated numbers, one observation per row.
//! A leading row whose fields are all non-numeric is taken as a header.
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! matrix written here reads back bit-for-bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

/// A parsed data file: the matrix plus its column names.
#[derive(Debug, Clone)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub data: Matrix,
}

pub fn read_data_csv(path: impl AsRef<Path>) -> Result<DataTable> {
    read_data(File::open(path)?)
}

/// Parse a numeric table. Row and column numbers in errors are 1-based and
/// refer to lines of the input (a header counts as line 1).
pub fn read_data<R: Read>(reader: R) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut columns: Option<Vec<String>> = None;
    let mut values = Vec::new();
    let mut width = None;
    let mut nrows = 0;

    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if idx == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            columns = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        nrows += 1;
    }

    if nrows == 0 {
        return Err(Error::Data("no data rows".into()));
    }
    let ncols = width.unwrap_or(0);
    let columns = columns.unwrap_or_else(|| default_columns("x", ncols));
    Ok(DataTable {
        columns,
        data: Matrix::from_row_slice(nrows, ncols, &values),
    })
}

pub fn default_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}{j}")).collect()
}

pub fn write_matrix_csv(path: impl AsRef<Path>, columns: &[String], data: &Matrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_matrix(&mut out, columns, data)?;
    out.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(out: W, columns: &[String], data: &Matrix) -> Result<()> {
    if columns.len() != data.ncols() {
        return Err(Error::Dimension(format!(
            "{} column names for {} columns",
            columns.len(),
            data.ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    let mut row = Vec::with_capacity(data.ncols());
    for i in 0..data.nrows() {
        row.clear();
        row.extend(data.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Ground-truth labels with probe flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    pub labels: Vec<usize>,
    pub special: Vec<bool>,
}

impl LabelTable {
    pub fn special_indices(&self) -> Vec<usize> {
        self.special
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[usize], special: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "label", "special"])?;
    let mut flags = vec![false; labels.len()];
    for &i in special {
        if i >= labels.len() {
            return Err(Error::InvalidArgument(format!(
                "special index {i} out of range"
            )));
        }
        flags[i] = true;
    }
    for (i, (&l, &s)) in labels.iter().zip(&flags).enumerate() {
        w.write_record([i.to_string(), l.to_string(), u8::from(s).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a labels file written by [`write_labels_csv`]. The `special`
/// column is optional.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<LabelTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let label_col = find("label").ok_or_else(|| Error::Parse {
        row: 1,
        column: 0,
        message: "missing `label` column".into(),
    })?;
    let special_col = find("special");

    let mut labels = Vec::new();
    let mut special = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize| -> Result<usize> {
            let raw = record.get(col).unwrap_or("");
            raw.parse().map_err(|_| Error::Parse {
                row: line,
                column: col + 1,
                message: format!("not a non-negative integer: {raw:?}"),
            })
        };
        labels.push(field(label_col)?);
        special.push(match special_col {
            Some(c) => field(c)? != 0,
            None => false,
        });
    }
    Ok(LabelTable { labels, special })
}
