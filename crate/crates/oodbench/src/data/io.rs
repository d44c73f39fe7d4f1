//! Ingestion of external datasets: feature CSVs and raw 8-bit images.

use std::path::Path;

use crate::data::{LabeledSample, OodLabel};
use crate::error::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn schema_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

fn parse_label(raw: &str) -> Option<OodLabel> {
    match raw.trim() {
        "in" => Some(OodLabel::In),
        "out" => Some(OodLabel::Out),
        _ => None,
    }
}

/// Loads labeled feature vectors from a CSV file.
///
/// Expected header: `f0,...,f{d-1},task_class,ood_label`, optionally with a
/// `partition_tag` column before `ood_label`. When the tag column is absent
/// every sample is tagged with the file stem. Rows are returned in file
/// order; values must already lie in `[0,1]`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => schema_err(path, "header", format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| schema_err(path, "header", e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 {
        return Err(schema_err(path, "header", "expected f0..f{d-1},task_class,ood_label"));
    }
    let has_tag = cols[cols.len() - 2] == "partition_tag";
    let d = cols.len() - if has_tag { 3 } else { 2 };
    if d == 0 {
        return Err(schema_err(path, "header", "no feature columns"));
    }
    for (i, col) in cols[..d].iter().enumerate() {
        if *col != format!("f{i}") {
            return Err(schema_err(path, "header", format!("column {i} is {col:?}, expected f{i}")));
        }
    }
    if cols[d] != "task_class" || cols[cols.len() - 1] != "ood_label" {
        return Err(schema_err(path, "header", "expected task_class and ood_label columns"));
    }

    let default_tag = file_stem(path);
    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = format!("row {}", row_idx + 2);
        let record = record.map_err(|e| schema_err(path, &row, e.to_string()))?;
        if record.len() != cols.len() {
            return Err(schema_err(
                path,
                &row,
                format!("expected {} fields, got {}", cols.len(), record.len()),
            ));
        }
        let mut input = Vec::with_capacity(d);
        for (i, raw) in record.iter().take(d).enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| schema_err(path, &row, format!("f{i} is not a number: {raw:?}")))?;
            input.push(v);
        }
        let task_class: i32 = record[d]
            .parse()
            .map_err(|_| schema_err(path, &row, format!("bad task_class {:?}", &record[d])))?;
        let tag = if has_tag { record[d + 1].to_string() } else { default_tag.clone() };
        let label_raw = &record[record.len() - 1];
        let label = parse_label(label_raw)
            .ok_or_else(|| schema_err(path, &row, format!("bad ood_label {label_raw:?}")))?;
        let sample = LabeledSample::new(samples.len() as u64, input, task_class, tag, label)
            .map_err(|e| schema_err(path, &row, e.to_string()))?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Loads raw unsigned 8-bit grayscale records of `width × height` bytes each,
/// scaled to `[0,1]`, with labels taken from the sidecar CSV at
/// `<path>.labels.csv` (columns `index,task_class,ood_label`, one row per
/// record in record order).
pub fn load_raw_u8(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    if width == 0 || height == 0 {
        return Err(Error::BadArgument("width and height must be positive".into()));
    }
    let record_len = width * height;
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() % record_len != 0 {
        return Err(schema_err(
            path,
            format!("byte {}", bytes.len() / record_len * record_len),
            format!("{} bytes is not a multiple of {record_len}", bytes.len()),
        ));
    }
    let n_records = bytes.len() / record_len;

    let sidecar = path.with_file_name(format!(
        "{}.labels.csv",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&sidecar)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(&sidecar, io),
            other => schema_err(&sidecar, "header", format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| schema_err(&sidecar, "header", e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["index", "task_class", "ood_label"] {
        return Err(schema_err(&sidecar, "header", "expected index,task_class,ood_label"));
    }

    let tag = file_stem(path);
    let mut samples = Vec::with_capacity(n_records);
    for (row_idx, record) in reader.records().enumerate() {
        let row = format!("row {}", row_idx + 2);
        let record = record.map_err(|e| schema_err(&sidecar, &row, e.to_string()))?;
        if record.len() != 3 {
            return Err(schema_err(&sidecar, &row, "expected 3 fields"));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| schema_err(&sidecar, &row, format!("bad index {:?}", &record[0])))?;
        if index != row_idx {
            return Err(schema_err(
                &sidecar,
                &row,
                format!("index {index} out of order, expected {row_idx}"),
            ));
        }
        if index >= n_records {
            return Err(schema_err(
                &sidecar,
                &row,
                format!("index {index} beyond the {n_records} records in the data file"),
            ));
        }
        let task_class: i32 = record[1]
            .parse()
            .map_err(|_| schema_err(&sidecar, &row, format!("bad task_class {:?}", &record[1])))?;
        let label = parse_label(&record[2])
            .ok_or_else(|| schema_err(&sidecar, &row, format!("bad ood_label {:?}", &record[2])))?;
        let input: Vec<f64> = bytes[index * record_len..(index + 1) * record_len]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        samples.push(LabeledSample::new(index as u64, input, task_class, tag.clone(), label)?);
    }
    if samples.len() != n_records {
        return Err(schema_err(
            &sidecar,
            format!("row {}", samples.len() + 2),
            format!("{} label rows for {n_records} records", samples.len()),
        ));
    }
    Ok(samples)
}
