use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Reads a rectangular numeric CSV. Positions in errors are 1-based file
/// line and column numbers.
pub fn read_csv_from<R: Read>(reader: R, has_header: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::CsvFormat(e.to_string()))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Csv {
                row: line,
                col: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row: line,
                col: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row: line,
                    col: j + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    match cols {
        None | Some(0) => Err(Error::CsvFormat("no data rows".into())),
        Some(c) => DataMatrix::new(rows, c, values),
    }
}

pub fn read_csv_matrix(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    read_csv_from(File::open(path)?, has_header)
}

/// Writes every value with 17 significant digits so that reading it back
/// reproduces the same bits.
pub fn write_csv_to<W: Write>(m: &DataMatrix, writer: W, header: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| Error::CsvFormat(e.to_string());
    if let Some(h) = header {
        if h.len() != m.cols() {
            return Err(Error::mismatch("csv header", (1, h.len()), m.shape()));
        }
        wtr.write_record(h).map_err(io)?;
    }
    for row in m.iter_rows() {
        wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_matrix(
    m: &DataMatrix,
    path: impl AsRef<Path>,
    header: Option<&[String]>,
) -> Result<()> {
    write_csv_to(m, File::create(path)?, header)
}
