//! Line-of-coordinates annotation files.
//!
//! One instance per line: `x1,y1,x2,y2,...` with non-negative integers, at
//! least three points, optionally followed by `,#ignore`. Blank lines are
//! skipped. Line and column numbers in errors are 1-based.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::TextPolygon;

pub const IGNORE_FLAG: &str = "#ignore";

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub polygon: TextPolygon,
    /// "Don't care" region.
    pub ignore: bool,
}

impl Annotation {
    pub fn new(polygon: TextPolygon) -> Self {
        Self {
            polygon,
            ignore: false,
        }
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_line(text: &str, line: usize) -> Result<Annotation> {
    let mut coords = Vec::new();
    let mut ignore = false;
    let mut column = 1;
    let tokens: Vec<&str> = text.split(',').collect();
    for (k, raw) in tokens.iter().enumerate() {
        let tok = raw.trim_matches(|c| c == ' ' || c == '\t');
        let col = column + (raw.len() - raw.trim_start_matches([' ', '\t']).len());
        if tok == IGNORE_FLAG && k == tokens.len() - 1 && k > 0 {
            ignore = true;
        } else if tok.is_empty() {
            return Err(parse_err(line, col, "empty field"));
        } else if !tok.bytes().all(|b| b.is_ascii_digit()) {
            let what = if tok.starts_with('-') {
                "negative coordinate"
            } else {
                "not an integer"
            };
            return Err(parse_err(line, col, format!("{what}: `{tok}`")));
        } else {
            let v: u32 = tok
                .parse()
                .map_err(|_| parse_err(line, col, format!("coordinate out of range: `{tok}`")))?;
            coords.push(v as f64);
        }
        column += raw.len() + 1;
    }
    if coords.len() % 2 != 0 {
        return Err(parse_err(
            line,
            1,
            format!("odd coordinate count {}", coords.len()),
        ));
    }
    if coords.len() < 6 {
        return Err(parse_err(
            line,
            1,
            format!("{} points, need at least 3", coords.len() / 2),
        ));
    }
    let pts: Vec<(f64, f64)> = coords.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let polygon = TextPolygon::from_coords(&pts).map_err(|e| parse_err(line, 1, e.to_string()))?;
    Ok(Annotation { polygon, ignore })
}

pub fn parse_annotations_str(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, k + 1)?);
    }
    Ok(out)
}

/// Parses raw bytes; invalid UTF-8 is reported at its position.
pub fn parse_annotations_bytes(bytes: &[u8]) -> Result<Vec<Annotation>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_annotations_str(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
            let column =
                good.len() - good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
            Err(parse_err(line, column, "invalid UTF-8"))
        }
    }
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_bytes(&bytes)
}

/// One line per annotation. Coordinates are rounded to the nearest
/// integer and clamped at 0.
pub fn format_annotations(anns: &[Annotation]) -> String {
    let mut s = String::new();
    for a in anns {
        let coords: Vec<String> = a
            .polygon
            .vertices()
            .iter()
            .flat_map(|p| [p.x, p.y])
            .map(|v| format!("{}", v.round().max(0.0) as u64))
            .collect();
        s.push_str(&coords.join(","));
        if a.ignore {
            s.push(',');
            s.push_str(IGNORE_FLAG);
        }
        s.push('\n');
    }
    s
}

pub fn write_annotations(path: impl AsRef<Path>, anns: &[Annotation]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_annotations(anns)).map_err(|e| Error::io(path, e))
}
