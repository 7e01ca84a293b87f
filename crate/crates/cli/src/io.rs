//! Embedding and label file formats.
//!
//! Text embeddings hold one sample per line with comma-separated numbers.
//! Binary embeddings start with a 16-byte header
//!
//! ```text
//! 0..4    magic "EMB1"
//! 4..8    row count, u32 little-endian
//! 8..12   dimensionality, u32 little-endian
//! 12..16  reserved, zero
//! ```
//!
//! followed by `rows * dim` row-major `f64` little-endian values.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use equirank_core::{EmbeddingMatrix, LabelVector};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingFormat {
    #[default]
    Text,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(EmbeddingFormat::Text),
            "binary" => Ok(EmbeddingFormat::Binary),
            other => Err(format!(
                "unknown embedding format {other:?} (expected text or binary)"
            )),
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    match format {
        EmbeddingFormat::Text => {
            let text = String::from_utf8(bytes).map_err(|_| CliError::Format {
                path: path.into(),
                message: "embedding file is not UTF-8 text".into(),
            })?;
            parse_text_embeddings(&text, path)
        }
        EmbeddingFormat::Binary => decode_binary_embeddings(&bytes, path),
    }
}

pub fn parse_text_embeddings(text: &str, path: &Path) -> Result<EmbeddingMatrix> {
    let parse_err = |line: usize, message: String| CliError::Parse {
        path: path.into(),
        line,
        message,
    };
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.trim().is_empty() {
        return Err(CliError::Format {
            path: path.into(),
            message: "no samples".into(),
        });
    }
    let mut dim = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            return Err(parse_err(line_no, "empty line".into()));
        }
        let mut count = 0;
        for (f, field) in line.split(',').enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(parse_err(line_no, format!("empty field {}", f + 1)));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value {field:?}")));
            }
            values.push(v);
            count += 1;
        }
        match dim {
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(parse_err(line_no, format!("expected {d} values, found {count}")));
            }
            Some(_) => {}
        }
        rows += 1;
    }
    Ok(EmbeddingMatrix::new(rows, dim.unwrap_or(0), values)?)
}

pub fn decode_binary_embeddings(bytes: &[u8], path: &Path) -> Result<EmbeddingMatrix> {
    let bad = |message: String| CliError::Format {
        path: path.into(),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("file shorter than the {HEADER_LEN}-byte header")));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic, expected \"EMB1\"".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes[12..16] != [0; 4] {
        return Err(bad("reserved header bytes must be zero".into()));
    }
    if rows == 0 || dim == 0 {
        return Err(bad(format!("empty matrix {rows}x{dim}")));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("header dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(bad(format!(
            "payload has {} bytes, header promises {rows}x{dim} values ({expected} bytes)",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(bad(format!(
            "non-finite value at row {}, column {}",
            pos / dim,
            pos % dim
        )));
    }
    Ok(EmbeddingMatrix::new(rows, dim, values)?)
}

pub fn encode_binary_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.values().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_text_embeddings(m: &EmbeddingMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_embeddings(path: &Path, m: &EmbeddingMatrix, format: EmbeddingFormat) -> Result<()> {
    match format {
        EmbeddingFormat::Text => write_atomic(path, encode_text_embeddings(m).as_bytes()),
        EmbeddingFormat::Binary => write_atomic(path, &encode_binary_embeddings(m)),
    }
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_labels(&text, path)
}

/// One label token per line. Surrounding whitespace is trimmed.
pub fn parse_labels(text: &str, path: &Path) -> Result<LabelVector> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(CliError::Format {
            path: path.into(),
            message: "label file is empty".into(),
        });
    }
    let mut labels = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let token = line.trim();
        if token.is_empty() {
            return Err(CliError::Parse {
                path: path.into(),
                line: i + 1,
                message: "empty label".into(),
            });
        }
        labels.push(token.to_owned());
    }
    Ok(LabelVector::new(labels))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
