//! JSON ⇄ CSV detection conversion.
//!
//! The CSV layout is a flat, diff-friendly mirror of the detection JSON:
//! corner coordinates instead of `[x, y, w, h]`, one row per detection,
//! header `image_id,x1,y1,x2,y2,score,category_id,model_id`, LF endings.
//! Conversions read and write pixel coordinates verbatim; no annotation set
//! is consulted. The `model_id` column is left empty by [`json_to_csv`]
//! (plain detection files carry no model name) and ignored by
//! [`csv_to_json`].

use std::path::Path;

use crate::error::{Error, Result};

use super::{read_file, record_error, to_pretty_json, write_bytes, RawDetection, RawId};

/// Column layout shared by both converters.
pub const CSV_HEADER: [&str; 8] = [
    "image_id",
    "x1",
    "y1",
    "x2",
    "y2",
    "score",
    "category_id",
    "model_id",
];

/// Shortest representation that parses back to the same value.
fn format_coord(v: f64) -> String {
    format!("{v}")
}

/// Scores are rounded to six decimal places before printing; the result is
/// the shortest string for the rounded value, so `0.8639` stays `0.8639`.
/// Exact for every score with at most six decimal digits.
pub(crate) fn format_score(s: f64) -> String {
    format!("{}", (s * 1e6).round() / 1e6)
}

fn check_record(path: &Path, index: usize, bbox: [f64; 4], score: f64) -> Result<()> {
    if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
        return Err(record_error(
            path,
            index,
            format!("score {score} outside [0, 1]"),
        ));
    }
    if bbox.iter().any(|v| !v.is_finite()) || bbox[2] <= 0.0 || bbox[3] <= 0.0 {
        return Err(record_error(
            path,
            index,
            format!(
                "degenerate box [{}, {}, {}, {}]",
                bbox[0], bbox[1], bbox[2], bbox[3]
            ),
        ));
    }
    Ok(())
}

/// Convert a detection JSON file to CSV. Returns the number of data rows
/// written; row order equals input order.
pub fn json_to_csv(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<usize> {
    let input = input.as_ref();
    let output = output.as_ref();
    let raw: Vec<RawDetection> =
        serde_json::from_str(&read_file(input)?).map_err(|e| super::parse_error(input, e))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(CSV_HEADER)
        .expect("in-memory CSV writes cannot fail");
    for (i, det) in raw.iter().enumerate() {
        check_record(input, i, det.bbox, det.score)?;
        let [x, y, w, h] = det.bbox;
        let image_id = match &det.image_id {
            RawId::Num(n) => n.to_string(),
            RawId::Text(s) => s.clone(),
        };
        writer
            .write_record([
                image_id,
                format_coord(x),
                format_coord(y),
                format_coord(x + w),
                format_coord(y + h),
                format_score(det.score),
                det.category_id.to_string(),
                String::new(),
            ])
            .expect("in-memory CSV writes cannot fail");
    }
    let bytes = writer
        .into_inner()
        .expect("in-memory CSV writer cannot be poisoned");
    write_bytes(output, &bytes)?;
    Ok(raw.len())
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    index: usize,
    name: &str,
    value: &str,
) -> Result<T> {
    value
        .parse()
        .map_err(|_| record_error(path, index, format!("bad {name} value {value:?}")))
}

/// Convert a CSV detection file back to JSON. Returns the number of records
/// written. The header must match [`CSV_HEADER`] exactly.
pub fn csv_to_json(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<usize> {
    let input = input.as_ref();
    let output = output.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(input)
        .map_err(|e| Error::Parse {
            path: input.to_path_buf(),
            detail: e.to_string(),
        })?;
    let header = reader.headers().map_err(|e| Error::Parse {
        path: input.to_path_buf(),
        detail: e.to_string(),
    })?;
    if header != CSV_HEADER.as_slice() {
        return Err(Error::Parse {
            path: input.to_path_buf(),
            detail: format!("unexpected header {header:?}"),
        });
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| record_error(input, i, e.to_string()))?;
        if row.len() != CSV_HEADER.len() {
            return Err(record_error(
                input,
                i,
                format!("expected {} fields, got {}", CSV_HEADER.len(), row.len()),
            ));
        }
        let x1: f64 = parse_field(input, i, "x1", &row[1])?;
        let y1: f64 = parse_field(input, i, "y1", &row[2])?;
        let x2: f64 = parse_field(input, i, "x2", &row[3])?;
        let y2: f64 = parse_field(input, i, "y2", &row[4])?;
        let score: f64 = parse_field(input, i, "score", &row[5])?;
        let category_id: i64 = parse_field(input, i, "category_id", &row[6])?;
        let bbox = [x1, y1, x2 - x1, y2 - y1];
        check_record(input, i, bbox, score)?;
        records.push(RawDetection {
            image_id: RawId::from_string(&row[0]),
            category_id,
            bbox,
            score,
        });
    }
    write_bytes(output, &to_pretty_json(&records))?;
    Ok(records.len())
}
