//! Bulk record parsing for JSONL and CSV input.
//!
//! Both formats use the citizen column names exactly. CSV files must carry
//! the full header in schema order; anything else is rejected up front so
//! a renamed column can't silently drop data.

use std::io::{BufRead, Read};

use super::schema::CitizenRecord;

/// One parsed input line. `line` is 1-based and counts physical lines
/// (the CSV header is line 1).
#[derive(Debug, Clone, PartialEq)]
pub struct IngestLine {
    pub line: usize,
    pub record: Result<CitizenRecord, String>,
}

/// Parses JSONL. Blank lines are skipped and not counted as records.
pub fn parse_jsonl(reader: impl BufRead) -> Result<Vec<IngestLine>, std::io::Error> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(IngestLine {
            line: idx + 1,
            record: serde_json::from_str::<CitizenRecord>(&line).map_err(|e| e.to_string()),
        });
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum CsvHeaderError {
    #[error("csv header must be exactly the citizen columns in order; {0}")]
    Mismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub fn parse_csv(reader: impl Read) -> Result<Vec<IngestLine>, CsvHeaderError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != CitizenRecord::COLUMNS {
        let detail = match got.iter().zip(CitizenRecord::COLUMNS).position(|(g, e)| g != e) {
            Some(i) => format!("column {} is {:?}, expected {:?}", i + 1, got[i], CitizenRecord::COLUMNS[i]),
            None => format!("{} columns, expected {}", got.len(), CitizenRecord::COLUMNS.len()),
        };
        return Err(CsvHeaderError::Mismatch(detail));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != CitizenRecord::COLUMNS.len() {
            out.push(IngestLine {
                line,
                record: Err(format!("{} fields, expected {}", row.len(), CitizenRecord::COLUMNS.len())),
            });
            continue;
        }
        let mut record = CitizenRecord::default();
        let mut result = Ok(());
        for (col, value) in CitizenRecord::COLUMNS.iter().zip(row.iter()) {
            if *col == "DID" {
                continue;
            }
            if let Err(e) = record.set_field(col, value) {
                result = Err(e.to_string());
                break;
            }
        }
        out.push(IngestLine { line, record: result.map(|_| record) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        CitizenRecord::COLUMNS.join(",")
    }

    fn csv_row(nid: &str, name: &str) -> String {
        CitizenRecord::COLUMNS
            .iter()
            .map(|c| match *c {
                "National_ID" => nid.to_string(),
                "English_name" => name.to_string(),
                _ => String::new(),
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    #[test]
    fn jsonl_reports_line_numbers() {
        let input = "{\"National_ID\":\"2615481234567\"}\n\n{\"National_ID\":\"12\"}\n";
        let lines = parse_jsonl(input.as_bytes()).unwrap();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].record.is_ok());
        assert_eq!(lines[1].line, 3);
        assert!(lines[1].record.is_err());
    }

    #[test]
    fn csv_parses_rows() {
        let input = format!("{}\n{}\n{}\n", header(), csv_row("2615481234567", "A"), csv_row("bad", "B"));
        let lines = parse_csv(input.as_bytes()).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].line, 2);
        assert_eq!(lines[0].record.as_ref().unwrap().english_name, "A");
        assert_eq!(lines[1].line, 3);
        assert!(lines[1].record.as_ref().unwrap_err().contains("National_ID"));
    }

    #[test]
    fn csv_rejects_unknown_or_reordered_headers() {
        let bad = header().replace("Phone", "Mobile");
        let err = parse_csv(format!("{bad}\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("Mobile"));
        let short = CitizenRecord::COLUMNS[..5].join(",");
        assert!(parse_csv(format!("{short}\n").as_bytes()).is_err());
    }

    #[test]
    fn empty_inputs() {
        assert!(parse_jsonl("".as_bytes()).unwrap().is_empty());
        assert!(parse_csv("".as_bytes()).unwrap().is_empty());
    }
}
