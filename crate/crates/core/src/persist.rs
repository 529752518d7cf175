//! Shared plumbing for the versioned text formats: every file ends with a
//! `sha256 <hex>` line covering all bytes before it.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format version: expected `{expected}`, found `{found}`")]
    VersionMismatch { expected: String, found: String },
    #[error("checksum mismatch{}", .0.as_ref().map(|p| format!(" in {}", p.display())).unwrap_or_default())]
    ChecksumMismatch(Option<PathBuf>),
    #[error("malformed file: {0}")]
    Malformed(String),
}

const CHECKSUM_TAG: &str = "sha256 ";

pub fn digest_hex(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Appends the checksum line.
pub fn seal(mut body: String) -> String {
    if !body.ends_with('\n') {
        body.push('\n');
    }
    let sum = digest_hex(&body);
    body.push_str(CHECKSUM_TAG);
    body.push_str(&sum);
    body.push('\n');
    body
}

/// Verifies and strips the trailing checksum line.
pub fn unseal(text: &str) -> Result<&str, PersistError> {
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    let split = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let (body, last) = trimmed.split_at(split);
    match last.strip_prefix(CHECKSUM_TAG) {
        Some(sum) if sum == digest_hex(body) => Ok(body),
        _ => Err(PersistError::ChecksumMismatch(None)),
    }
}

/// Checks `<magic> <version> ...` on the first line and returns the
/// remaining header fields.
pub fn check_header<'a>(
    line: Option<&'a str>,
    magic: &str,
    version: &str,
) -> Result<Vec<&'a str>, PersistError> {
    let line = line.ok_or_else(|| PersistError::Malformed("empty file".into()))?;
    let mut fields = line.split_whitespace();
    if fields.next() != Some(magic) {
        return Err(PersistError::Malformed(format!(
            "expected `{magic}` header"
        )));
    }
    match fields.next() {
        Some(v) if v == version => Ok(fields.collect()),
        found => Err(PersistError::VersionMismatch {
            expected: version.to_string(),
            found: found.unwrap_or("").to_string(),
        }),
    }
}

pub fn parse_field<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T, PersistError> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| PersistError::Malformed(format!("bad or missing {what}")))
}

/// Parses a whitespace-separated row of `expected` reals.
pub fn parse_reals(
    line: Option<&str>,
    expected: usize,
    what: &str,
) -> Result<Vec<f64>, PersistError> {
    let line = line.ok_or_else(|| PersistError::Malformed(format!("missing {what}")))?;
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PersistError::Malformed(format!("{what}: {e}")))?;
    if values.len() != expected {
        return Err(PersistError::Malformed(format!(
            "{what}: expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

/// 17 significant digits; parses back to the same `f64`.
pub fn push_reals(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

/// Reads and verifies a sealed file; checksum errors carry the path.
pub fn read_sealed(path: &Path) -> Result<String, PersistError> {
    let text = std::fs::read_to_string(path).map_err(|source| PersistError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), PersistError> {
    std::fs::write(path, contents).map_err(|source| PersistError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seal_then_unseal() {
        let sealed = seal("a b\nc\n".to_string());
        assert_eq!(unseal(&sealed).unwrap(), "a b\nc\n");
    }

    #[test]
    fn tampering_detected() {
        let sealed = seal("x 1\ny 2\n".to_string());
        let tampered = sealed.replace("y 2", "y 3");
        assert!(matches!(
            unseal(&tampered),
            Err(PersistError::ChecksumMismatch(_))
        ));
        let truncated = &sealed[..sealed.len() - 10];
        assert!(matches!(
            unseal(truncated),
            Err(PersistError::ChecksumMismatch(_))
        ));
    }

    #[test]
    fn reals_survive_formatting() {
        let values = [0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0];
        let mut s = String::new();
        push_reals(&mut s, &values);
        assert_eq!(parse_reals(Some(s.trim_end()), 5, "row").unwrap(), values);
    }

    #[test]
    fn header_version() {
        assert_eq!(
            check_header(Some("DHBN-CB v1 3 4"), "DHBN-CB", "v1").unwrap(),
            vec!["3", "4"]
        );
        assert!(matches!(
            check_header(Some("DHBN-CB v2 3 4"), "DHBN-CB", "v1"),
            Err(PersistError::VersionMismatch { .. })
        ));
        assert!(matches!(
            check_header(Some("OTHER v1"), "DHBN-CB", "v1"),
            Err(PersistError::Malformed(_))
        ));
    }
}
