//! The `MINUTIAE v1` text format.
//!
//! ```text
//! MINUTIAE v1 2
//! 10 20 90 E
//! 311 48 270 B
//! ```
//!
//! One header line carrying the record count, then one `<x> <y> <angle> <E|B>`
//! line per minutia, single-space separated, LF terminated.

use std::fmt::Write as _;

use super::{FingerprintTemplate, Minutia, MinutiaKind, MinutiaeError};

const MAGIC: &str = "MINUTIAE";
const VERSION: &str = "v1";

pub fn parse_template(text: &str) -> Result<FingerprintTemplate, MinutiaeError> {
    let mut lines = text.split('\n').map(|l| l.trim_end());
    let header = lines.next().unwrap_or_default();
    let declared = parse_header(header)?;
    if declared == 0 {
        return Err(MinutiaeError::EmptyTemplate);
    }

    let body: Vec<&str> = lines.collect();
    // Trailing blank lines are tolerated; blank lines in the middle are not.
    let used = body
        .iter()
        .rposition(|l| !l.is_empty())
        .map_or(0, |i| i + 1);
    if used != declared {
        return Err(MinutiaeError::CountMismatch {
            declared,
            found: used,
        });
    }

    let minutiae = body[..used]
        .iter()
        .enumerate()
        .map(|(i, line)| parse_record(i + 2, line))
        .collect::<Result<Vec<_>, _>>()?;
    FingerprintTemplate::new(minutiae)
}

fn parse_header(line: &str) -> Result<usize, MinutiaeError> {
    let malformed = || MinutiaeError::MalformedHeader(line.to_owned());
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) || parts.next() != Some(VERSION) {
        return Err(malformed());
    }
    let count = parts.next().ok_or_else(malformed)?;
    if parts.next().is_some() || !is_decimal(count) {
        return Err(malformed());
    }
    count.parse().map_err(|_| malformed())
}

fn parse_record(line_no: usize, line: &str) -> Result<Minutia, MinutiaeError> {
    let malformed = |reason: &str| MinutiaeError::MalformedRecord {
        line: line_no,
        reason: reason.to_owned(),
    };
    let fields: Vec<&str> = line.split(' ').collect();
    let [x, y, angle, kind] = fields[..] else {
        return Err(malformed("expected four single-space separated fields"));
    };
    let int = |s: &str, what: &str| -> Result<u16, MinutiaeError> {
        if !is_decimal(s) {
            return Err(malformed(&format!("{what} is not a decimal integer")));
        }
        // Values too large for u16 are necessarily out of range.
        Ok(s.parse::<u16>().unwrap_or(u16::MAX))
    };
    let kind = MinutiaKind::from_letter(kind).ok_or_else(|| malformed("kind must be E or B"))?;
    Minutia::new(int(x, "x")?, int(y, "y")?, int(angle, "angle")?, kind)
}

fn is_decimal(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

pub fn serialize_template(t: &FingerprintTemplate) -> String {
    let mut out = String::with_capacity(16 + t.len() * 14);
    let _ = writeln!(out, "{MAGIC} {VERSION} {}", t.len());
    for m in t.minutiae() {
        let _ = writeln!(out, "{m}");
    }
    out
}
