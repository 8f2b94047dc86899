//! Dataset CSV reading and writing.
//!
//! Files are comma-separated with a header row. A final column named
//! `label` holds integer ground-truth labels and is optional.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use copmix::data::DataMatrix;

use crate::usage;

pub struct Dataset {
    pub names: Vec<String>,
    pub x: DataMatrix,
    pub labels: Option<Vec<usize>>,
}

fn parse_label(s: &str, line: u64) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| usage(format!("line {line}: label `{s}` is not a non-negative integer")))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?
        .clone();
    let mut names: Vec<String> = header.iter().map(str::to_string).collect();
    let has_label = names.last().is_some_and(|n| n.eq_ignore_ascii_case("label"));
    if has_label {
        names.pop();
    }
    if names.is_empty() {
        return Err(usage(format!("{}: no feature columns in header", path.display())));
    }
    let d = names.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                usage(format!("line {line}, column `{}`: `{field}` is not a number", names[j]))
            })?;
            if !v.is_finite() {
                return Err(usage(format!("line {line}, column `{}`: non-finite value", names[j])));
            }
            data.push(v);
        }
        if has_label {
            labels.push(parse_label(&record[d], line)?);
        }
    }
    if data.is_empty() {
        return Err(usage(format!("{}: no data rows", path.display())));
    }
    let x = DataMatrix::new(data, d)?;
    Ok(Dataset {
        names,
        x,
        labels: has_label.then_some(labels),
    })
}

pub fn write_dataset(path: &Path, x: &DataMatrix, labels: Option<&[usize]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in x.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `label` column of a labels file (or its only column).
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let col = match header.iter().position(|h| h.eq_ignore_ascii_case("label")) {
        Some(c) => c,
        None if header.len() == 1 => 0,
        None => return Err(usage(format!("{}: no `label` column", path.display()))),
    };
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        out.push(parse_label(&record[col], line)?);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["label"])?;
    for l in labels {
        w.write_record([l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
