//! CSV ingestion.
//!
//! All inputs are header-bearing CSV. Feature files may carry an `id`
//! column (synthesized from the 0-based row index otherwise); labeled
//! files carry a `label` column; signal streams use the fixed column set
//! `timestamp,pamp,danger,safe,antigens` with antigen ids `;`-delimited.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::dca::SignalFrame;
use crate::representation::RawRecord;
use crate::{Error, Result};

/// Column treated as the record identity rather than a feature.
pub const ID_COLUMN: &str = "id";
/// Column treated as the class label rather than a feature.
pub const LABEL_COLUMN: &str = "label";

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    // Flexible so short/long rows reach our own length check, which names
    // the offending line.
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn row_context(path: &Path, record: &csv::StringRecord, row: usize) -> String {
    match record.position() {
        Some(pos) => format!("{} line {}", path.display(), pos.line()),
        None => format!("{} row {}", path.display(), row),
    }
}

/// Read feature records. The `id` column, when present, becomes the record
/// identity; every other column is a feature.
pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    Ok(read_feature_rows(path, false)?.0)
}

/// Read feature records plus a required `label` column.
pub fn read_labeled_records(path: &Path) -> Result<(Vec<RawRecord>, Vec<bool>)> {
    let (records, labels) = read_feature_rows(path, true)?;
    Ok((records, labels.expect("labels required")))
}

type FeatureRows = (Vec<RawRecord>, Option<Vec<bool>>);

fn read_feature_rows(path: &Path, want_labels: bool) -> Result<FeatureRows> {
    let mut reader = open_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let id_idx = headers.iter().position(|h| h == ID_COLUMN);
    let label_idx = headers.iter().position(|h| h == LABEL_COLUMN);
    if want_labels && label_idx.is_none() {
        return Err(Error::Input(format!(
            "{}: missing required `{LABEL_COLUMN}` column",
            path.display()
        )));
    }

    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(Error::Input(format!(
                "{}: expected {} fields, found {}",
                row_context(path, &record, row),
                headers.len(),
                record.len()
            )));
        }
        let id = match id_idx {
            Some(i) => record[i].to_string(),
            None => row.to_string(),
        };
        if want_labels {
            let raw = &record[label_idx.expect("checked above")];
            let label = parse_label(raw).ok_or_else(|| {
                Error::Input(format!(
                    "{}: unrecognized label `{raw}`",
                    row_context(path, &record, row)
                ))
            })?;
            labels.push(label);
        }
        let fields: Vec<(String, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != id_idx && Some(*i) != label_idx)
            .map(|(i, h)| (h.clone(), record[i].to_string()))
            .collect();
        records.push(RawRecord::new(id, fields));
    }
    Ok((records, want_labels.then_some(labels)))
}

fn parse_label(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "anomaly" | "anomalous" | "nonself" | "attack" | "1" | "true" => Some(true),
        "normal" | "self" | "benign" | "0" | "false" => Some(false),
        _ => None,
    }
}

/// Read an `id,label` ground-truth file into an id -> is-anomalous map.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let mut reader = open_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let id_idx = headers
        .iter()
        .position(|h| h == ID_COLUMN)
        .ok_or_else(|| Error::Input(format!("{}: missing `{ID_COLUMN}` column", path.display())))?;
    let label_idx = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::Input(format!("{}: missing `{LABEL_COLUMN}` column", path.display())))?;

    let mut labels = BTreeMap::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let raw = &record[label_idx];
        let label = parse_label(raw).ok_or_else(|| {
            Error::Input(format!(
                "{}: unrecognized label `{raw}`",
                row_context(path, &record, row)
            ))
        })?;
        labels.insert(record[id_idx].to_string(), label);
    }
    Ok(labels)
}

/// Read a signal stream: `timestamp,pamp,danger,safe,antigens`, antigen
/// ids `;`-delimited. Timestamps must strictly increase.
pub fn read_signal_frames(path: &Path) -> Result<Vec<SignalFrame>> {
    let mut reader = open_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("{}: missing `{name}` column", path.display())))
    };
    let ts_idx = col("timestamp")?;
    let pamp_idx = col("pamp")?;
    let danger_idx = col("danger")?;
    let safe_idx = col("safe")?;
    let antigens_idx = col("antigens")?;

    let mut frames: Vec<SignalFrame> = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let context = row_context(path, &record, row);
        let parse_f64 = |idx: usize, name: &str| -> Result<f64> {
            record[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("{context}: bad {name} `{}`", &record[idx])))
        };
        let timestamp: u64 = record[ts_idx]
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{context}: bad timestamp `{}`", &record[ts_idx])))?;
        let active: BTreeSet<String> = record[antigens_idx]
            .split(';')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string())
            .collect();
        let frame = SignalFrame::new(
            timestamp,
            parse_f64(pamp_idx, "pamp")?,
            parse_f64(danger_idx, "danger")?,
            parse_f64(safe_idx, "safe")?,
            active,
        )
        .map_err(|e| Error::Input(format!("{context}: {e}")))?;
        if let Some(prev) = frames.last() {
            if frame.timestamp <= prev.timestamp {
                return Err(Error::Input(format!(
                    "{context}: timestamp {} does not increase past {}",
                    frame.timestamp, prev.timestamp
                )));
            }
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn reads_records_with_id_column() {
        let file = write_temp("id,x,proto\na1,0.5,tcp\na2,0.7,udp\n");
        let records = read_records(file.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, "a1");
        assert_eq!(records[0].fields, vec![
            ("x".to_string(), "0.5".to_string()),
            ("proto".to_string(), "tcp".to_string()),
        ]);
    }

    #[test]
    fn synthesizes_row_index_ids() {
        let file = write_temp("x\n1.0\n2.0\n");
        let records = read_records(file.path()).unwrap();
        assert_eq!(records[0].id, "0");
        assert_eq!(records[1].id, "1");
    }

    #[test]
    fn malformed_row_names_line() {
        let file = write_temp("id,x,y\na,1,2\nb,3\n");
        match read_records(file.path()) {
            Err(Error::Input(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn labeled_records_split_label_out() {
        let file = write_temp("id,x,label\na,1,normal\nb,2,anomaly\n");
        let (records, labels) = read_labeled_records(file.path()).unwrap();
        assert_eq!(labels, vec![false, true]);
        assert!(records[0].fields.iter().all(|(n, _)| n != "label"));
    }

    #[test]
    fn bad_label_is_named() {
        let file = write_temp("id,x,label\na,1,wat\n");
        match read_labeled_records(file.path()) {
            Err(Error::Input(msg)) => assert!(msg.contains("wat"), "{msg}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn reads_signal_frames() {
        let file = write_temp(
            "timestamp,pamp,danger,safe,antigens\n0,1.0,0.5,0.0,a;b\n1,0.0,0.0,1.0,\n",
        );
        let frames = read_signal_frames(file.path()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].active_antigens.len(), 2);
        assert!(frames[1].active_antigens.is_empty());
    }

    #[test]
    fn non_monotonic_timestamp_names_line() {
        let file = write_temp(
            "timestamp,pamp,danger,safe,antigens\n5,0,0,1,a\n5,0,0,1,b\n",
        );
        match read_signal_frames(file.path()) {
            Err(Error::Input(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn reads_label_map() {
        let file = write_temp("id,label\nt0,normal\nt1,anomaly\n");
        let labels = read_labels(file.path()).unwrap();
        assert!(!labels["t0"]);
        assert!(labels["t1"]);
    }
}
