//! Reading and writing fields and masks.
//!
//! JSON documents carry the grid header and the row-major values:
//! `{"dim": 1, "half_width": 2.0, "points_per_axis": 64, "values": [...]}`
//! (masks use `"members"` with booleans). The binary layout is a 4-byte
//! magic (`CPXF` or `CPXM`), the dimension as `u32`, the half-width as `f64`
//! and the node count per axis as `u64`, followed by the values as `f64` or
//! one byte per node, all little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Mask};

const FIELD_MAGIC: &[u8; 4] = b"CPXF";
const MASK_MAGIC: &[u8; 4] = b"CPXM";
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Serialize, Deserialize)]
struct FieldDoc {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MaskDoc {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    members: Vec<bool>,
}

/// On-disk encoding, chosen from the file extension by [`Format::from_path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Binary,
}

impl Format {
    /// `.json` is JSON, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Binary,
        }
    }
}

pub fn field_to_json(f: &Field) -> Result<String> {
    let g = f.grid();
    Ok(serde_json::to_string(&FieldDoc {
        dim: g.dim(),
        half_width: g.half_width(),
        points_per_axis: g.points_per_axis(),
        values: f.values().to_vec(),
    })?)
}

pub fn field_from_json(s: &str) -> Result<Field> {
    let doc: FieldDoc = serde_json::from_str(s)?;
    Field::new(Grid::new(doc.dim, doc.half_width, doc.points_per_axis)?, doc.values)
}

pub fn mask_to_json(m: &Mask) -> Result<String> {
    let g = m.grid();
    Ok(serde_json::to_string(&MaskDoc {
        dim: g.dim(),
        half_width: g.half_width(),
        points_per_axis: g.points_per_axis(),
        members: m.members().to_vec(),
    })?)
}

pub fn mask_from_json(s: &str) -> Result<Mask> {
    let doc: MaskDoc = serde_json::from_str(s)?;
    Mask::new(Grid::new(doc.dim, doc.half_width, doc.points_per_axis)?, doc.members)
}

fn header(magic: &[u8; 4], g: &Grid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&(g.points_per_axis() as u64).to_le_bytes());
    out
}

fn read_header<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(Grid, &'a [u8])> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != magic {
        return Err(Error::Format(format!("missing {} header", String::from_utf8_lossy(magic))));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let half_width = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    Ok((Grid::new(dim, half_width, n)?, &bytes[HEADER_LEN..]))
}

pub fn field_to_bytes(f: &Field) -> Vec<u8> {
    let mut out = header(FIELD_MAGIC, f.grid());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<Field> {
    let (grid, body) = read_header(bytes, FIELD_MAGIC)?;
    if body.len() != 8 * grid.len() {
        return Err(Error::Format(format!("expected {} values, found {} bytes", grid.len(), body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Field::new(grid, values)
}

pub fn mask_to_bytes(m: &Mask) -> Vec<u8> {
    let mut out = header(MASK_MAGIC, m.grid());
    out.extend(m.members().iter().map(|&b| b as u8));
    out
}

pub fn mask_from_bytes(bytes: &[u8]) -> Result<Mask> {
    let (grid, body) = read_header(bytes, MASK_MAGIC)?;
    if body.len() != grid.len() {
        return Err(Error::Format(format!("expected {} members, found {} bytes", grid.len(), body.len())));
    }
    let members = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("mask byte {other} is neither 0 nor 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::new(grid, members)
}

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    match Format::from_path(path) {
        Format::Json => std::fs::write(path, field_to_json(f)?)?,
        Format::Binary => std::fs::write(path, field_to_bytes(f))?,
    }
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    match Format::from_path(path) {
        Format::Json => field_from_json(&std::fs::read_to_string(path)?),
        Format::Binary => field_from_bytes(&std::fs::read(path)?),
    }
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    match Format::from_path(path) {
        Format::Json => std::fs::write(path, mask_to_json(m)?)?,
        Format::Binary => std::fs::write(path, mask_to_bytes(m))?,
    }
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    match Format::from_path(path) {
        Format::Json => mask_from_json(&std::fs::read_to_string(path)?),
        Format::Binary => mask_from_bytes(&std::fs::read(path)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_input() {
        assert!(field_from_bytes(b"CPXF").is_err());
        assert!(mask_from_bytes(&field_to_bytes(&Field::zeros(Grid::new(1, 1.0, 8).unwrap()))).is_err());
        let mut b = mask_to_bytes(&Mask::full(Grid::new(1, 1.0, 8).unwrap()));
        b[HEADER_LEN] = 7;
        assert!(mask_from_bytes(&b).is_err());
        assert!(field_from_json(r#"{"dim":1,"half_width":1.0,"points_per_axis":8,"values":[1.0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn round_trips(vals in proptest::collection::vec(-1e6f64..1e6, 64)) {
            let g = Grid::new(2, 1.5, 8).unwrap();
            let f = Field::new(g, vals.clone()).unwrap();
            prop_assert_eq!(field_from_bytes(&field_to_bytes(&f)).unwrap(), f.clone());
            prop_assert_eq!(field_from_json(&field_to_json(&f).unwrap()).unwrap(), f.clone());
            let m = f.superlevel(0.0);
            prop_assert_eq!(mask_from_bytes(&mask_to_bytes(&m)).unwrap(), m.clone());
            prop_assert_eq!(mask_from_json(&mask_to_json(&m).unwrap()).unwrap(), m);
        }
    }
}
