// SPDX-License-Identifier: Apache-2.0

//! CSV ingestion and export.
//!
//! UTF-8, comma separated, LF line endings, one header row of feature names.
//! An optional label column holds `0` (normal) or `1` (anomaly). Boolean cells
//! may be written as `true`/`false` and are encoded as `1.0`/`0.0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::{FeatureMatrix, Label, LabeledSet};
use crate::error::{Error, Result};

/// Name of the label column written by [`write_csv`].
pub const LABEL_COLUMN: &str = "label";

pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<LabeledSet> {
    let file = File::open(path)?;
    read_csv(BufReader::new(file), label_column)
}

/// Reads a labeled set from any reader. Without `label_column` every sample
/// is labeled normal.
pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>) -> Result<LabeledSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }

    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MalformedCsv(format!("label column {name:?} not found")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::MalformedCsv("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        for (j, cell) in record.iter().enumerate() {
            let row = line + 2;
            if Some(j) == label_idx {
                labels.push(parse_label(cell).ok_or_else(|| {
                    Error::MalformedCsv(format!("row {row}: bad label {cell:?}"))
                })?);
            } else {
                values.push(parse_cell(cell).ok_or_else(|| {
                    Error::MalformedCsv(format!("row {row}, column {}: bad value {cell:?}", j + 1))
                })?);
            }
        }
        if label_idx.is_none() {
            labels.push(Label::Normal);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile);
    }

    let n = labels.len();
    let features = FeatureMatrix::new(n, feature_names.len(), values, feature_names)?;
    LabeledSet::new(features, labels, vec![None; n])
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    match cell {
        "true" | "TRUE" | "True" => return Some(1.0),
        "false" | "FALSE" | "False" => return Some(0.0),
        _ => {}
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_label(cell: &str) -> Option<Label> {
    match parse_cell(cell)? {
        0.0 => Some(Label::Normal),
        1.0 => Some(Label::Anomaly),
        _ => None,
    }
}

fn csv_error(err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::Io(_) => match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::MalformedCsv(err.to_string()),
    }
}

pub fn write_csv(set: &LabeledSet, path: impl AsRef<Path>, with_labels: bool) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    write_csv_to(set, &mut out, with_labels)?;
    out.flush()?;
    Ok(())
}

/// Values are written in shortest round-trip form, so reading the file back
/// reproduces every `f64` exactly.
pub fn write_csv_to<W: Write>(set: &LabeledSet, writer: W, with_labels: bool) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);

    let mut header: Vec<&str> = set.features.feature_names().iter().map(String::as_str).collect();
    if with_labels {
        header.push(LABEL_COLUMN);
    }
    wtr.write_record(&header).map_err(csv_error)?;

    let mut cells: Vec<String> = Vec::with_capacity(header.len());
    for (row, label) in set.features.rows().zip(&set.labels) {
        cells.clear();
        cells.extend(row.iter().map(|v| format!("{v}")));
        if with_labels {
            cells.push(label.as_bit().to_string());
        }
        wtr.write_record(&cells).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_labels_are_normal() {
        let set = read_csv("a,b\n0,1\n1,0\n".as_bytes(), None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.features.n_features(), 2);
        assert!(set.labels.iter().all(|&l| l == Label::Normal));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let err = read_csv("a,b\n0,1\n1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)), "{err:?}");
    }

    #[test]
    fn unparseable_cell_is_malformed() {
        let err = read_csv("a,b\n0,x\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)));
        let err = read_csv("a,b\n0,NaN\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(read_csv("".as_bytes(), None), Err(Error::EmptyFile)));
        assert!(matches!(read_csv("a,b\n".as_bytes(), None), Err(Error::EmptyFile)));
    }

    #[test]
    fn booleans_and_labels() {
        let set = read_csv("a,b,label\ntrue,0.5,1\nfalse,2,0\n".as_bytes(), Some("label")).unwrap();
        assert_eq!(set.features.values(), &[1.0, 0.5, 0.0, 2.0]);
        assert_eq!(set.labels, vec![Label::Anomaly, Label::Normal]);
        assert_eq!(set.features.feature_names(), &["a".to_string(), "b".to_string()]);

        let err = read_csv("a,label\n1,2\n".as_bytes(), Some("label")).unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)));
        let err = read_csv("a,b\n1,2\n".as_bytes(), Some("label")).unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)));
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            rows in prop::collection::vec(prop::collection::vec(-1e12f64..1e12, 3), 1..20),
            bits in prop::collection::vec(any::<bool>(), 20),
        ) {
            let features = FeatureMatrix::from_rows(&rows).unwrap();
            let labels: Vec<Label> = bits[..rows.len()]
                .iter()
                .map(|&b| if b { Label::Anomaly } else { Label::Normal })
                .collect();
            let set = LabeledSet::new(features, labels, vec![None; rows.len()]).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&set, &mut buf, true).unwrap();
            prop_assert!(!buf.contains(&b'\r'));
            let back = read_csv(buf.as_slice(), Some(LABEL_COLUMN)).unwrap();
            prop_assert_eq!(back, set);
        }
    }
}
