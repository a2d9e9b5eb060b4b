//! LUT text format: UTF-8, comma-delimited, one header row, one sample per
//! row. Reals are written with 17 significant digits.

use super::Dataset;
use crate::error::{usage, Error, Result};
use crate::Matrix;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_lut(path: &Path, feature_columns: &[String], target_columns: &[String]) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_lut(file, feature_columns, target_columns)
}

/// Parses a LUT, keeping only the named columns in the order given.
pub fn read_lut<R: Read>(reader: R, feature_columns: &[String], target_columns: &[String]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let locate = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("LUT has no column named '{name}'")))
    };
    let feat_idx = feature_columns.iter().map(locate).collect::<Result<Vec<_>>>()?;
    let targ_idx = target_columns.iter().map(locate).collect::<Result<Vec<_>>>()?;
    if feat_idx.is_empty() {
        return Err(usage("no feature columns selected"));
    }

    let mut feats: Vec<f64> = Vec::new();
    let mut targs: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let cell = |c: usize| -> Result<f64> {
            let raw = record
                .get(c)
                .ok_or_else(|| Error::Data(format!("line {line}: missing column '{}'", headers[c])))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::Data(format!("line {line}, column '{}': cannot parse '{raw}'", headers[c])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}, column '{}': non-finite value '{raw}'", headers[c])));
            }
            Ok(v)
        };
        for &c in &feat_idx {
            feats.push(cell(c)?);
        }
        for &c in &targ_idx {
            targs.push(cell(c)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("LUT has no data rows".into()));
    }
    let (d, t) = (feat_idx.len(), targ_idx.len());
    let features = Matrix::from_fn(n, d, |i, j| feats[i * d + j]);
    let targets = Matrix::from_fn(n, t, |i, j| targs[i * t + j]);
    Dataset::new(features, targets, feature_columns.to_vec(), target_columns.to_vec())
}

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_lut(path: &Path, ds: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_lut(&mut w, ds).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes band columns then target columns.
pub fn write_lut<W: Write>(w: &mut W, ds: &Dataset) -> std::io::Result<()> {
    let header: Vec<&str> = ds.band_names().iter().chain(ds.target_names()).map(String::as_str).collect();
    writeln!(w, "{}", header.join(","))?;
    let (f, t) = (ds.features(), ds.targets());
    let mut line = String::new();
    for i in 0..ds.n_samples() {
        line.clear();
        let cells = (0..f.ncols()).map(|j| f[(i, j)]).chain((0..t.ncols()).map(|j| t[(i, j)]));
        for (k, v) in cells.enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&fmt_real(v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
