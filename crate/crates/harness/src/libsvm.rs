//! LIBSVM text format: `label index:value index:value ...` per line, with
//! 1-based strictly increasing indices and `#` comments.

use std::fmt;
use std::io::{self, BufRead, Write};

use snewton_core::SparseDataset;

#[derive(Debug)]
pub enum ParseError {
    Io(io::Error),
    /// Malformed content, with the 1-based line number.
    Syntax { line: usize, message: String },
    Dataset(snewton_core::Error),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Io(e) => write!(f, "read error: {e}"),
            ParseError::Syntax { line, message } => write!(f, "{message} at line {line}"),
            ParseError::Dataset(e) => write!(f, "invalid dataset: {e}"),
        }
    }
}

impl std::error::Error for ParseError {}

impl From<io::Error> for ParseError {
    fn from(e: io::Error) -> Self {
        ParseError::Io(e)
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| syntax(line, format!("invalid {what} '{tok}'")))?;
    if !v.is_finite() {
        return Err(syntax(line, format!("non-finite {what} '{tok}'")));
    }
    Ok(v)
}

/// Parses one line. Returns `None` for blank and comment-only lines.
fn parse_line(text: &str, line: usize) -> Result<Option<(f64, Vec<(usize, f64)>)>, ParseError> {
    let body = text.split('#').next().unwrap_or("");
    let mut tokens = body.split_whitespace();
    let Some(label) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_number(label, line, "label")?;
    let mut pairs = Vec::new();
    let mut prev = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| syntax(line, format!("missing ':' in '{tok}'")))?;
        let idx: i64 = idx
            .parse()
            .map_err(|_| syntax(line, format!("invalid index '{idx}'")))?;
        if idx < 1 {
            return Err(syntax(line, format!("index < 1 ('{idx}')")));
        }
        let idx = idx as usize;
        if idx <= prev {
            return Err(syntax(line, "indices not strictly increasing"));
        }
        prev = idx;
        pairs.push((idx, parse_number(val, line, "value")?));
    }
    Ok(Some((label, pairs)))
}

/// Reads a whole dataset. `dim` overrides the feature count, which otherwise
/// is the largest index present.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<SparseDataset, ParseError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some((label, pairs)) = parse_line(&line?, i + 1)? {
            labels.push(label);
            rows.push(pairs);
        }
    }
    SparseDataset::new(rows, labels, dim).map_err(ParseError::Dataset)
}

pub fn parse_libsvm_str(text: &str, dim: Option<usize>) -> Result<SparseDataset, ParseError> {
    parse_libsvm(text.as_bytes(), dim)
}

pub fn read_libsvm_file(path: &std::path::Path, dim: Option<usize>) -> Result<SparseDataset, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_libsvm(io::BufReader::new(file), dim)
}

/// Writes `data` so that [`parse_libsvm`] reproduces it exactly (floats use
/// the shortest round-trip representation).
pub fn write_libsvm<W: Write>(data: &SparseDataset, mut out: W) -> io::Result<()> {
    for (row, label) in data.rows().iter().zip(data.labels()) {
        write!(out, "{label}")?;
        for (idx, val) in row {
            write!(out, " {idx}:{val}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
