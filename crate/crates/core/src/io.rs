//! CSV and JSON persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{GflsrError, Result};
use crate::linalg::Matrix;
use crate::model::Dataset;

/// Shortest decimal that parses back to the same f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A numeric table with a header row.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(GflsrError::Load(format!("{}: header required", path.display())));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(GflsrError::Load(format!(
                "{}: row {} has {} cells, expected {}",
                path.display(),
                r + 1,
                rec.len(),
                header.len()
            )));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                GflsrError::Load(format!(
                    "{}: non-numeric cell {:?} at row {}, column {}",
                    path.display(),
                    cell,
                    r + 1,
                    c + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok((
        header,
        Matrix::from_row_slice(rows, values.len() / rows.max(1), &values),
    ))
}

pub fn write_table(path: &Path, header: &[String], m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format_f64(*x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset with columns x1..xp then y1..yq. Columns are assigned by
/// their name prefix.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (header, m) = read_table(path)?;
    let xs: Vec<usize> = (0..header.len()).filter(|&j| header[j].starts_with('x')).collect();
    let ys: Vec<usize> = (0..header.len()).filter(|&j| header[j].starts_with('y')).collect();
    if xs.is_empty() || ys.is_empty() || xs.len() + ys.len() != header.len() {
        return Err(GflsrError::Load(format!(
            "{}: columns must be named x1..xp and y1..yq",
            path.display()
        )));
    }
    Dataset::from_raw(&m.select_columns(xs.iter()), &m.select_columns(ys.iter()))
}

pub fn dataset_header(p: usize, q: usize) -> Vec<String> {
    (1..=p)
        .map(|j| format!("x{j}"))
        .chain((1..=q).map(|j| format!("y{j}")))
        .collect()
}

/// Writes the uncentred data.
pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let (x, y) = (data.raw_x(), data.raw_y());
    let mut m = Matrix::zeros(data.n(), data.p() + data.q());
    m.columns_mut(0, data.p()).copy_from(&x);
    m.columns_mut(data.p(), data.q()).copy_from(&y);
    write_table(path, &dataset_header(data.p(), data.q()), &m)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
