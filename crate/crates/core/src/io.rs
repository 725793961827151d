//! Plain-text artifact formats: square labelled matrices and partitions.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Square matrix as CSV: a header `ticker,A,B,...` then one row per ticker.
pub fn matrix_to_csv(tickers: &[String], values: &[Vec<f64>]) -> String {
    let mut out = String::from("ticker");
    for t in tickers {
        out.push(',');
        out.push_str(t);
    }
    out.push('\n');
    for (t, row) in tickers.iter().zip(values) {
        out.push_str(t);
        for v in row {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

/// Inverse of [`matrix_to_csv`]. Row labels must repeat the header order.
pub fn parse_matrix_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut records = csv_reader(bytes).into_records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty matrix file")),
    };
    if header.get(0) != Some("ticker") {
        return Err(parse_err(1, "first header cell must be `ticker`"));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if tickers.is_empty() {
        return Err(parse_err(1, "matrix has no columns"));
    }
    let mut values = Vec::with_capacity(tickers.len());
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != tickers.len() + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", tickers.len() + 1, rec.len())));
        }
        match tickers.get(i) {
            Some(t) if rec.get(0) == Some(t.as_str()) => {}
            _ => return Err(parse_err(line, "row label does not match the header order")),
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(line, format!("invalid number `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    if values.len() != tickers.len() {
        return Err(parse_err(
            values.len() + 2,
            format!("expected {} rows, found {}", tickers.len(), values.len()),
        ));
    }
    Ok((tickers, values))
}

/// Partition as CSV lines `ticker,label` under a header.
pub fn partition_to_csv(tickers: &[String], labels: &[usize]) -> String {
    let mut out = String::from("ticker,label\n");
    for (t, l) in tickers.iter().zip(labels) {
        writeln!(out, "{t},{l}").expect("writing to a String");
    }
    out
}

pub fn parse_partition_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut records = csv_reader(bytes).into_records();
    match records.next() {
        Some(Ok(h)) if h.len() == 2 && &h[0] == "ticker" && &h[1] == "label" => {}
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        _ => return Err(parse_err(1, "header must be `ticker,label`")),
    }
    let mut tickers = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(line, "expected `ticker,label`"));
        }
        let label = rec[1]
            .parse::<usize>()
            .map_err(|_| parse_err(line, format!("invalid label `{}`", &rec[1])))?;
        tickers.push(rec[0].to_string());
        labels.push(label);
    }
    Ok((tickers, labels))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write through a temporary sibling and rename, so readers never observe a
/// half-written artifact.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let t = vec!["A".to_string(), "B".to_string()];
        let v = vec![vec![0.0, 0.1 + 0.2], vec![0.1 + 0.2, 0.0]];
        let (t2, v2) = parse_matrix_csv(matrix_to_csv(&t, &v).as_bytes()).unwrap();
        assert_eq!(t, t2);
        assert_eq!(v, v2);
    }

    #[test]
    fn matrix_errors_carry_lines() {
        let bad = b"ticker,A,B\nA,0,1\nB,1,x\n";
        match parse_matrix_csv(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_matrix_csv(b"ticker,A,B\nA,0,1\n").is_err());
        assert!(parse_matrix_csv(b"ticker,A,B\nB,0,1\nA,1,0\n").is_err());
        assert!(parse_matrix_csv(b"").is_err());
    }

    #[test]
    fn partition_round_trip() {
        let t = vec!["X".to_string(), "Y".to_string(), "Z".to_string()];
        let l = vec![0, 1, 0];
        assert_eq!(parse_partition_csv(partition_to_csv(&t, &l).as_bytes()).unwrap(), (t, l));
        assert!(parse_partition_csv(b"ticker,label\nX,-1\n").is_err());
    }
}
