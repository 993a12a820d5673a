//! CSV ingestion and output of panels and transformation codes.
//!
//! Row and column numbers in ingestion errors are 1-based file coordinates
//! (the header is row 1, the date column is column 1).

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::{Panel, TransformCode};

/// First field of the optional row carrying transformation codes.
pub const CODE_ROW_SENTINEL: &str = "transform";

fn ingest(row: usize, column: usize, reason: impl Into<String>) -> Error {
    Error::Ingest { row, column, reason: reason.into() }
}

/// ISO-8601 dates; `M/D/YYYY` is accepted as well for FRED-style files.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

fn parse_code(s: &str, row: usize, column: usize) -> Result<TransformCode> {
    let v: f64 = s.trim().parse().map_err(|_| ingest(row, column, format!("transformation code '{s}' is not a number")))?;
    if v.fract() != 0.0 || !(1.0..=7.0).contains(&v) {
        return Err(ingest(row, column, format!("unknown transformation code '{s}' (expected 1..7)")));
    }
    TransformCode::new(v as u8)
}

/// Parse a panel from CSV text. Returns the codes of a sentinel row when present.
pub fn parse_panel_csv(text: &str) -> Result<(Panel, Option<Vec<TransformCode>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(ingest(1, 1, "empty file")),
    };
    if header.len() < 2 {
        return Err(ingest(1, 1, "header needs a date column and at least one series"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashMap::new();
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(ingest(1, j + 2, "empty series name"));
        }
        if let Some(first) = seen.insert(name.as_str(), j + 2) {
            return Err(ingest(1, j + 2, format!("duplicate series name '{name}' (first in column {first})")));
        }
    }
    let n = names.len();
    let mut codes = None;
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(ingest(row, rec.len().min(n + 1), format!("expected {} fields, found {}", n + 1, rec.len())));
        }
        let first = &rec[0];
        if first.to_ascii_lowercase().starts_with(CODE_ROW_SENTINEL) {
            if codes.is_some() || !dates.is_empty() {
                return Err(ingest(row, 1, "the transformation-code row must directly follow the header"));
            }
            codes = Some((1..=n).map(|j| parse_code(&rec[j], row, j + 1)).collect::<Result<Vec<_>>>()?);
            continue;
        }
        let date = parse_date(first).ok_or_else(|| ingest(row, 1, format!("'{first}' is not an ISO-8601 date")))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(ingest(row, 1, format!("date {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        for j in 1..=n {
            let cell = &rec[j];
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
                f64::NAN
            } else {
                let v: f64 = cell.parse().map_err(|_| ingest(row, j + 1, format!("'{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(ingest(row, j + 1, "non-finite value"));
                }
                v
            };
            data.push(v);
        }
    }
    let t = dates.len();
    if t == 0 {
        return Err(ingest(2, 1, "no observations"));
    }
    let values = DMatrix::from_row_slice(t, n, &data);
    // data rows start below the header and the optional code row
    let offset = 2 + usize::from(codes.is_some());
    for j in 0..n {
        let col = values.column(j);
        let start = col.iter().position(|v| !v.is_nan()).ok_or_else(|| ingest(offset, j + 2, format!("series '{}' has no observations", names[j])))?;
        if let Some(gap) = (start..t).find(|&i| col[i].is_nan()) {
            return Err(ingest(offset + gap, j + 2, format!("interior missing value in '{}'", names[j])));
        }
    }
    Ok((Panel::new(values, names, dates)?, codes))
}

/// Two-column codes file `name,code`; an optional header row is skipped.
pub fn parse_codes_csv(text: &str, names: &[String]) -> Result<Vec<TransformCode>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut map: HashMap<String, TransformCode> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        if rec.len() != 2 {
            return Err(ingest(row, 1, format!("expected 2 fields (name, code), found {}", rec.len())));
        }
        if row == 1 && rec[1].parse::<f64>().is_err() {
            continue;
        }
        let code = parse_code(&rec[1], row, 2)?;
        if map.insert(rec[0].to_string(), code).is_some() {
            return Err(ingest(row, 1, format!("duplicate code for '{}'", &rec[0])));
        }
    }
    names
        .iter()
        .map(|nm| map.get(nm).copied().ok_or_else(|| Error::Config(format!("codes file has no entry for series '{nm}'"))))
        .collect()
}

/// Read a panel and its codes: a separate codes file takes precedence over a sentinel row.
pub fn ingest_csv(path: &Path, codes_path: Option<&Path>) -> Result<(Panel, Option<Vec<TransformCode>>)> {
    let (panel, row_codes) = parse_panel_csv(&std::fs::read_to_string(path)?)?;
    let codes = match codes_path {
        Some(p) => Some(parse_codes_csv(&std::fs::read_to_string(p)?, panel.names())?),
        None => row_codes,
    };
    Ok((panel, codes))
}

/// CSV text of a panel with ISO dates; missing values are empty cells and
/// numbers use the shortest exactly round-tripping representation.
pub fn panel_to_csv(panel: &Panel, codes: Option<&[TransformCode]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    w.write_record(&header)?;
    if let Some(c) = codes {
        let mut rec = vec![CODE_ROW_SENTINEL.to_string()];
        rec.extend(c.iter().map(|c| c.code().to_string()));
        w.write_record(&rec)?;
    }
    for (i, d) in panel.dates().iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend((0..panel.nseries()).map(|j| {
            let v = panel.values()[(i, j)];
            if v.is_nan() { String::new() } else { format!("{v}") }
        }));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
