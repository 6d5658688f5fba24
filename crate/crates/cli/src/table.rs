//! CSV dialect: comma separated, header row first, UTF-8, `.` decimal point.
//! Numbers are written in Rust's shortest form that parses back to the same
//! `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use mcpca_core::data::{Cell, RawTable};
use mcpca_core::linalg::Matrix;

pub fn read_raw<R: Read>(reader: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(Cell::parse).collect());
    }
    Ok(RawTable {
        header: Some(header),
        rows,
    })
}

pub fn read_raw_path(path: &Path) -> Result<RawTable> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_raw(file).with_context(|| format!("malformed CSV in {}", path.display()))
}

/// Reads an all-numeric CSV into a matrix.
pub fn read_matrix_path(path: &Path) -> Result<Matrix> {
    let raw = read_raw_path(path)?;
    let rows = raw
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|c| c.as_number().with_context(|| format!("non-numeric cell in row {}", i + 1)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(&rows)?)
}

pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

pub fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Number(x) => format_number(*x),
        Cell::Text(s) => s.clone(),
    }
}

pub fn write_rows<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(out: W, header: &[String], m: &Matrix) -> Result<()> {
    write_rows(out, header, (0..m.rows()).map(|i| m.row(i).iter().map(|&x| format_number(x)).collect()))
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.0, f64::MIN_POSITIVE] {
            assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn reads_mixed_cells() {
        let raw = read_raw("a, b\n1, x\n2.5 ,y\n".as_bytes()).unwrap();
        assert_eq!(raw.header.unwrap(), vec!["a", "b"]);
        assert_eq!(raw.rows[1], vec![Cell::Number(2.5), Cell::Text("y".into())]);
    }
}
