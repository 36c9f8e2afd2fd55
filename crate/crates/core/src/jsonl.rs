//! JSON-lines reading and writing with line-numbered errors.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses one value per non-blank line. Line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|e| JsonlError::Line { line: i + 1, message: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| JsonlError::Line { line: i + 1, message: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl_string<T: Serialize>(items: &[T]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, items).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_the_bad_line() {
        let text = "1\n2\n\n{oops\n";
        match parse_jsonl::<serde_json::Value>(text) {
            Err(JsonlError::Line { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let items = vec![vec![1, 2], vec![3]];
        let s = to_jsonl_string(&items);
        assert_eq!(parse_jsonl::<Vec<i32>>(&s).unwrap(), items);
    }
}
