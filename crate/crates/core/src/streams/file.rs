//! Ingestion of precomputed classifier outputs.
//!
//! * JSONL: one object per line, `{"probs": [..K floats..], "label": int}`.
//! * CSV: `K` probability columns followed by the label column. No header
//!   unless requested.
//!
//! Every record is validated as a probability vector with a label in range,
//! and all records must agree on `K`. Errors carry the 1-based line number.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::scalar::Scalar;
use crate::scores::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    Jsonl,
    Csv,
}

impl StreamFormat {
    /// Guesses the format from a `.jsonl`/`.json`/`.csv` extension.
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => input_err(format!("unknown stream format '{other}'")),
        }
    }
}

/// A labelled softmax record.
pub type Record<F> = (ProbVector<F>, usize);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    probs: Vec<f64>,
    label: usize,
}

/// Reads a whole stream file.
pub fn load_stream<F: Scalar>(
    path: &Path,
    format: StreamFormat,
    csv_header: bool,
) -> Result<Vec<Record<F>>> {
    let file = std::fs::File::open(path)?;
    read_stream(file, format, csv_header)
}

pub fn read_stream<F: Scalar, R: Read>(
    reader: R,
    format: StreamFormat,
    csv_header: bool,
) -> Result<Vec<Record<F>>> {
    let mut checker = RecordChecker::default();
    match format {
        StreamFormat::Jsonl => {
            for (idx, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = idx + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                checker.push(line_no, rec.probs, rec.label)?;
            }
        }
        StreamFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(csv_header)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(reader);
            for row in rdr.records() {
                let row = row.map_err(|e| Error::Parse {
                    line: e.position().map_or(0, |p| p.line() as usize),
                    msg: e.to_string(),
                })?;
                let line_no = row.position().map_or(0, |p| p.line() as usize);
                if row.iter().all(str::is_empty) {
                    continue;
                }
                let (probs, label) = parse_csv_row(&row, line_no)?;
                checker.push(line_no, probs, label)?;
            }
        }
    }
    if checker.records.is_empty() {
        return input_err("stream file contains no records");
    }
    Ok(checker.records)
}

/// Writes records in `format`; [`read_stream`] reads them back unchanged.
pub fn write_stream<F: Scalar, W: Write>(
    writer: W,
    records: &[Record<F>],
    format: StreamFormat,
) -> Result<()> {
    let as_f64 = |p: &ProbVector<F>| -> Vec<f64> {
        p.as_slice().iter().map(|x| x.to_f64().expect("finite probability")).collect()
    };
    match format {
        StreamFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(writer);
            for (probs, label) in records {
                let rec = JsonRecord { probs: as_f64(probs), label: *label };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        StreamFormat::Csv => {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
            for (probs, label) in records {
                let mut row: Vec<String> = as_f64(probs).iter().map(f64::to_string).collect();
                row.push(label.to_string());
                w.write_record(&row).map_err(|e| Error::Input(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_csv_row(row: &csv::StringRecord, line: usize) -> Result<(Vec<f64>, usize)> {
    let parse_err = |msg: String| Error::Parse { line, msg };
    if row.len() < 3 {
        return Err(parse_err(format!(
            "expected at least 2 probability columns and a label, got {} fields",
            row.len()
        )));
    }
    let k = row.len() - 1;
    let probs = row
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, f)| {
            f.parse::<f64>()
                .map_err(|e| parse_err(format!("column {}: '{f}': {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_field = &row[k];
    let label = label_field
        .parse::<usize>()
        .map_err(|e| parse_err(format!("label '{label_field}': {e}")))?;
    Ok((probs, label))
}

#[derive(Default)]
struct RecordChecker<F> {
    num_classes: Option<usize>,
    records: Vec<Record<F>>,
}

impl<F: Scalar> RecordChecker<F> {
    fn push(&mut self, line: usize, probs: Vec<f64>, label: usize) -> Result<()> {
        let invalid = |msg: String| Error::Validation { line, msg };
        let k = probs.len();
        if let Some(expected) = self.num_classes {
            if k != expected {
                return Err(invalid(format!("expected {expected} classes, got {k}")));
            }
        }
        if label >= k {
            return Err(invalid(format!("label {label} out of range for {k} classes")));
        }
        let pv = ProbVector::new(probs.into_iter().map(F::lit).collect())
            .map_err(|e| invalid(e.to_string()))?;
        self.num_classes = Some(k);
        self.records.push((pv, label));
        Ok(())
    }
}
