//! `LGT1` logit tables and `SUB1` subset lists.
//!
//! ```text
//! LGT1: b"LGT1" | rows: u32 | classes: u32 | alignment: u8 (0 point, 1 face) | rows*classes f32
//! SUB1: b"SUB1" | k: u32 | count: u32 | count * (center: u32 | k * member: u32)
//! ```

use std::path::Path;

use crate::error::{Error, Result};

const LOGIT_MAGIC: &[u8; 4] = b"LGT1";
const SUBSET_MAGIC: &[u8; 4] = b"SUB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    Point = 0,
    Face = 1,
}

/// Row-major matrix of per-point or per-face class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable {
    class_count: usize,
    alignment: Alignment,
    values: Vec<f32>,
}

impl LogitTable {
    pub fn new(class_count: usize, alignment: Alignment, values: Vec<f32>) -> Result<Self> {
        if class_count == 0 {
            if !values.is_empty() {
                return Err(Error::ShapeMismatch(
                    "values present with zero classes".into(),
                ));
            }
        } else if !values.len().is_multiple_of(class_count) {
            return Err(Error::ShapeMismatch(format!(
                "{} values is not a multiple of {class_count} classes",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite logit in row {}",
                i / class_count.max(1)
            )));
        }
        Ok(Self {
            class_count,
            alignment,
            values,
        })
    }

    pub fn zeros(rows: usize, class_count: usize, alignment: Alignment) -> Self {
        Self {
            class_count,
            alignment,
            values: vec![0.0; rows * class_count],
        }
    }

    pub fn rows(&self) -> usize {
        self.values.len().checked_div(self.class_count).unwrap_or(0)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn alignment(&self) -> Alignment {
        self.alignment
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.class_count..(i + 1) * self.class_count]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.values[i * self.class_count..(i + 1) * self.class_count]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subset {
    pub center: u32,
    pub members: Vec<u32>,
}

/// Fixed-size point index sets: training draws or inference tiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetList {
    k: usize,
    subsets: Vec<Subset>,
}

impl SubsetList {
    pub fn new(k: usize, subsets: Vec<Subset>) -> Result<Self> {
        for (i, s) in subsets.iter().enumerate() {
            if s.members.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "subset {i} has {} members, expected {k}",
                    s.members.len()
                )));
            }
        }
        Ok(Self { k, subsets })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Fails when any index is `>= point_count`.
    pub fn check_indices(&self, point_count: usize) -> Result<()> {
        for (i, s) in self.subsets.iter().enumerate() {
            let bad = std::iter::once(&s.center)
                .chain(&s.members)
                .find(|&&m| m as usize >= point_count);
            if let Some(m) = bad {
                return Err(Error::ShapeMismatch(format!(
                    "subset {i} references point {m}, cloud has {point_count} points"
                )));
            }
        }
        Ok(())
    }
}

fn check_count(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::ShapeMismatch(format!("{what} {n} exceeds u32")))
}

pub fn encode_logits(table: &LogitTable) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(13 + 4 * table.values.len());
    buf.extend_from_slice(LOGIT_MAGIC);
    buf.extend_from_slice(&check_count(table.rows(), "row count")?.to_le_bytes());
    buf.extend_from_slice(&check_count(table.class_count, "class count")?.to_le_bytes());
    buf.push(table.alignment as u8);
    for v in &table.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_logits(bytes: &[u8], path: &Path) -> Result<LogitTable> {
    if bytes.len() < 13 || &bytes[..4] != LOGIT_MAGIC {
        return Err(Error::format(path, "bad LGT1 magic"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let classes = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let alignment = match bytes[12] {
        0 => Alignment::Point,
        1 => Alignment::Face,
        other => return Err(Error::format(path, format!("bad alignment flag {other}"))),
    };
    let expected = rows
        .checked_mul(classes)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header sizes overflow"))?;
    let payload = &bytes[13..];
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "truncated payload: {} bytes for {rows}x{classes} table, expected {expected}",
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if classes == 0 {
        // a zero-width table carries no rows in memory
        return Ok(LogitTable::zeros(0, 0, alignment));
    }
    LogitTable::new(classes, alignment, values).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_logits(table: &LogitTable, path: &Path) -> Result<()> {
    std::fs::write(path, encode_logits(table)?).map_err(|e| Error::io(path, e))
}

pub fn load_logits(path: &Path) -> Result<LogitTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_logits(&bytes, path)
}

pub fn encode_subsets(list: &SubsetList) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(12 + 4 * list.len() * (list.k + 1));
    buf.extend_from_slice(SUBSET_MAGIC);
    buf.extend_from_slice(&check_count(list.k, "k")?.to_le_bytes());
    buf.extend_from_slice(&check_count(list.len(), "subset count")?.to_le_bytes());
    for s in &list.subsets {
        buf.extend_from_slice(&s.center.to_le_bytes());
        for m in &s.members {
            buf.extend_from_slice(&m.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_subsets(bytes: &[u8], path: &Path) -> Result<SubsetList> {
    if bytes.len() < 12 || &bytes[..4] != SUBSET_MAGIC {
        return Err(Error::format(path, "bad SUB1 magic"));
    }
    let k = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let record = 4 * (k + 1);
    let payload = &bytes[12..];
    if Some(payload.len()) != record.checked_mul(count) {
        return Err(Error::format(
            path,
            format!(
                "member count mismatch: {} payload bytes for {count} subsets of k={k}",
                payload.len()
            ),
        ));
    }
    let mut words = payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()));
    let subsets = (0..count)
        .map(|_| {
            let center = words.next().unwrap();
            let members = words.by_ref().take(k).collect();
            Subset { center, members }
        })
        .collect();
    SubsetList::new(k, subsets)
}

pub fn write_subsets(list: &SubsetList, path: &Path) -> Result<()> {
    std::fs::write(path, encode_subsets(list)?).map_err(|e| Error::io(path, e))
}

pub fn load_subsets(path: &Path) -> Result<SubsetList> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_subsets(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn empty_logits_are_header_only() {
        let t = LogitTable::zeros(0, 7, Alignment::Point);
        let bytes = encode_logits(&t).unwrap();
        assert_eq!(bytes.len(), 13);
        assert_eq!(decode_logits(&bytes, p()).unwrap(), t);
    }

    #[test]
    fn small_logit_roundtrip() {
        let t = LogitTable::new(3, Alignment::Face, vec![1.0, -2.5, 3.0, 0.0, 1e-7, 9.0]).unwrap();
        let back = decode_logits(&encode_logits(&t).unwrap(), p()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows(), 2);
        assert_eq!(back.row(1), &[0.0, 1e-7, 9.0]);
    }

    #[test]
    fn logit_errors() {
        assert!(matches!(
            decode_logits(b"LGT2\0\0\0\0\0\0\0\0\0", p()),
            Err(Error::Format { .. })
        ));
        let t = LogitTable::new(2, Alignment::Point, vec![1.0, 2.0]).unwrap();
        let bytes = encode_logits(&t).unwrap();
        let err = decode_logits(&bytes[..bytes.len() - 1], p()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn subset_layout() {
        let empty = SubsetList::new(16, vec![]).unwrap();
        assert_eq!(encode_subsets(&empty).unwrap().len(), 12);

        let one = SubsetList::new(
            4,
            vec![Subset {
                center: 7,
                members: vec![7, 1, 2, 3],
            }],
        )
        .unwrap();
        let bytes = encode_subsets(&one).unwrap();
        assert_eq!(bytes.len(), 12 + 4 + 16);
        assert_eq!(decode_subsets(&bytes, p()).unwrap(), one);
    }

    #[test]
    fn subset_errors() {
        assert!(SubsetList::new(
            3,
            vec![Subset {
                center: 0,
                members: vec![0]
            }]
        )
        .is_err());
        let one = SubsetList::new(
            2,
            vec![Subset {
                center: 0,
                members: vec![0, 1],
            }],
        )
        .unwrap();
        let bytes = encode_subsets(&one).unwrap();
        let err = decode_subsets(&bytes[..bytes.len() - 4], p()).unwrap_err();
        assert!(err.to_string().contains("member count mismatch"), "{err}");
        assert!(decode_subsets(b"SUBX\0\0\0\0\0\0\0\0", p()).is_err());
        assert!(one.check_indices(1).is_err());
        assert!(one.check_indices(2).is_ok());
    }
}
