//! `TMAP` named-tensor files.
//!
//! ```text
//! "TMAP"  u16 version  u16 section_count
//! per section:
//!   u16 name_len  name (UTF-8)  u8 rank (1..=4)  u32 dims[rank]
//!   f64 payload[product(dims)]
//! ```
//! All integers and floats little-endian, payload row-major. The file ends
//! exactly after the last payload.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"TMAP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::MapFormat(msg.into())
}

pub fn encode_map(sections: &[(String, Grid)]) -> Result<Vec<u8>> {
    let count = u16::try_from(sections.len())
        .map_err(|_| fmt_err(format!("{} sections, at most 65535", sections.len())))?;
    let payload: usize = sections
        .iter()
        .map(|(n, g)| 2 + n.len() + 1 + 4 * g.rank() + 8 * g.len())
        .sum();
    let mut out = Vec::with_capacity(HEADER_LEN + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (k, (name, grid)) in sections.iter().enumerate() {
        if sections[..k].iter().any(|(n, _)| n == name) {
            return Err(fmt_err(format!("duplicate section `{name}`")));
        }
        let len = u16::try_from(name.len())
            .map_err(|_| fmt_err(format!("section name of {} bytes is too long", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(grid.rank() as u8);
        for &d in grid.shape() {
            let d = u32::try_from(d)
                .map_err(|_| fmt_err(format!("section `{name}`: extent {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in grid.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                fmt_err(format!(
                    "truncated at byte {}: {what} needs {n} bytes, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_map(bytes: &[u8]) -> Result<Vec<(String, Grid)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(fmt_err("bad magic, expected `TMAP`"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let count = r.u16("section count")?;
    let mut sections: Vec<(String, Grid)> = Vec::with_capacity(count as usize);
    for k in 0..count {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| fmt_err(format!("section {k}: name is not UTF-8")))?
            .to_string();
        if sections.iter().any(|(n, _)| *n == name) {
            return Err(fmt_err(format!("duplicate section `{name}`")));
        }
        let rank = r.u8("rank")? as usize;
        if !(1..=4).contains(&rank) {
            return Err(fmt_err(format!(
                "section `{name}`: rank {rank} outside 1..=4"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(8).map(|_| n))
            .ok_or_else(|| fmt_err(format!("section `{name}`: dims {shape:?} overflow")))?;
        let payload = r.take(n * 8, "payload")?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        sections.push((name, Grid::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(fmt_err(format!(
            "{} trailing bytes after last section",
            bytes.len() - r.pos
        )));
    }
    Ok(sections)
}

pub fn write_map(path: impl AsRef<Path>, sections: &[(String, Grid)]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_map(sections)?).map_err(|e| Error::io(path, e))
}

pub fn read_map(path: impl AsRef<Path>) -> Result<Vec<(String, Grid)>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_map(&bytes)
}
