use std::fs::File;
use std::path::Path;

use rescluster::Dataset;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: cannot parse '{field}' as a number")]
    Parse { line: u64, field: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRows { line: u64, expected: usize, found: usize },
    #[error("no data rows")]
    EmptyFile,
    #[error("{0}")]
    Invalid(String),
}

/// Reads a rectangular numeric table, one observation per row.
/// Line numbers in errors are 1-based and count the header.
pub fn ingest_csv(path: &Path, delimiter: u8, has_header: bool) -> Result<Dataset, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    ingest_reader(file, delimiter, has_header)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, delimiter: u8, has_header: bool) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Invalid(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v = field.parse::<f64>().map_err(|_| IngestError::Parse { line, field: field.to_string() })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(IngestError::RaggedRows { line, expected: first.len(), found: row.len() });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Dataset::from_rows(&rows).map_err(|e| IngestError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_plain_table() {
        let d = ingest_reader("0,5\n5,0\n-5,0".as_bytes(), b',', false).unwrap();
        assert_eq!((d.n(), d.dim()), (3, 2));
        assert_eq!(d.points()[(2, 0)], -5.0);
    }

    #[test]
    fn skips_header() {
        let d = ingest_reader("f1,f2\n1,2\n3,4\n".as_bytes(), b',', true).unwrap();
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = ingest_reader("1,2\n3,4\n5\n".as_bytes(), b',', false).unwrap_err();
        assert_eq!(err, IngestError::RaggedRows { line: 3, expected: 2, found: 1 });
        let err = ingest_reader("a,b\n1,2\n3\n".as_bytes(), b',', true).unwrap_err();
        assert_eq!(err, IngestError::RaggedRows { line: 3, expected: 2, found: 1 });
    }

    #[test]
    fn parse_and_empty_errors() {
        assert_eq!(
            ingest_reader("1,2\n3,x\n".as_bytes(), b',', false).unwrap_err(),
            IngestError::Parse { line: 2, field: "x".into() }
        );
        assert_eq!(ingest_reader("".as_bytes(), b',', false).unwrap_err(), IngestError::EmptyFile);
        assert_eq!(ingest_reader("h1,h2\n".as_bytes(), b',', true).unwrap_err(), IngestError::EmptyFile);
    }

    #[test]
    fn other_delimiters() {
        let d = ingest_reader("1;2;3\n4;5;6\n".as_bytes(), b';', false).unwrap();
        assert_eq!((d.n(), d.dim()), (2, 3));
    }
}
