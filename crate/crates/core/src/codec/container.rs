//! The `.lfc` container.
//!
//! Fixed 64-byte little-endian header:
//!
//! | offset | size | field                                |
//! |--------|------|--------------------------------------|
//! | 0      | 4    | magic `LFLC`                         |
//! | 4      | 2    | container version                    |
//! | 6      | 1    | pattern id (0 = c2, 1 = h2, 2 = custom) |
//! | 7      | 1    | codec id                             |
//! | 8      | 1    | angular rows                         |
//! | 9      | 1    | angular cols                         |
//! | 10     | 2    | view height                          |
//! | 12     | 2    | view width                           |
//! | 14     | 2    | rank                                 |
//! | 16     | 1    | qp                                   |
//! | 17     | 1    | flags                                |
//! | 24     | 8    | regularization weight (f64)          |
//!
//! All other bytes are zero. The header is followed by the section table
//! (`u16` count, then one `u64` length per section) and the sections.
//!
//! Sections: `[0]` Subset 1 payload, `[1]` Subset 2 layer payload (empty when
//! Subset 2 is predicted), `[2]` prediction metadata, `[3..]` one residual
//! payload per Subset 2 view in coding order.

use crate::error::{Error, Result};
use crate::pattern::PatternKind;

use super::CodecId;

pub const MAGIC: [u8; 4] = *b"LFLC";
pub const CONTAINER_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;

/// Subset 2 is predicted from Subset 1 (metadata and residual sections used).
pub const FLAG_PREDICTED: u8 = 0b001;
/// Subset 1 is coded as full views rather than as a layer stack.
pub const FLAG_SUBSET1_VIEWS: u8 = 0b010;
const KNOWN_FLAGS: u8 = FLAG_PREDICTED | FLAG_SUBSET1_VIEWS;

pub const SECTION_SUBSET1: usize = 0;
pub const SECTION_SUBSET2: usize = 1;
pub const SECTION_METADATA: usize = 2;
pub const FIRST_RESIDUAL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainerHeader {
    pub version: u16,
    pub pattern: PatternKind,
    pub codec: CodecId,
    pub grid_rows: u8,
    pub grid_cols: u8,
    pub height: u16,
    pub width: u16,
    pub rank: u16,
    pub qp: u8,
    pub flags: u8,
    pub lambda: f64,
}

impl ContainerHeader {
    pub fn predicted(&self) -> bool {
        self.flags & FLAG_PREDICTED != 0
    }

    pub fn subset1_as_views(&self) -> bool {
        self.flags & FLAG_SUBSET1_VIEWS != 0
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.pattern.id();
        b[7] = self.codec.to_u8();
        b[8] = self.grid_rows;
        b[9] = self.grid_cols;
        b[10..12].copy_from_slice(&self.height.to_le_bytes());
        b[12..14].copy_from_slice(&self.width.to_le_bytes());
        b[14..16].copy_from_slice(&self.rank.to_le_bytes());
        b[16] = self.qp;
        b[17] = self.flags;
        b[24..32].copy_from_slice(&self.lambda.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::MalformedHeader(format!("only {} bytes", bytes.len())));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!("header needs {HEADER_LEN} bytes, got {}", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let version = u16_at(4);
        if version != CONTAINER_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: CONTAINER_VERSION });
        }
        let pattern = PatternKind::from_id(bytes[6]).ok_or_else(|| Error::MalformedHeader(format!("unknown pattern id {}", bytes[6])))?;
        let codec = CodecId::from_u8(bytes[7]).ok_or_else(|| Error::MalformedHeader(format!("unknown codec id {}", bytes[7])))?;
        if bytes[17] & !KNOWN_FLAGS != 0 {
            return Err(Error::MalformedHeader(format!("unknown flags {:#04x}", bytes[17])));
        }
        if bytes[18..24].iter().chain(&bytes[32..HEADER_LEN]).any(|&b| b != 0) {
            return Err(Error::MalformedHeader("reserved bytes are not zero".into()));
        }
        if bytes[16] > 51 {
            return Err(Error::MalformedHeader(format!("qp {} out of range", bytes[16])));
        }
        let lambda = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::MalformedHeader(format!("bad regularization weight {lambda}")));
        }
        Ok(Self {
            version,
            pattern,
            codec,
            grid_rows: bytes[8],
            grid_cols: bytes[9],
            height: u16_at(10),
            width: u16_at(12),
            rank: u16_at(14),
            qp: bytes[16],
            flags: bytes[17],
            lambda,
        })
    }
}

/// Header plus raw section payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct LfcBitstream {
    pub header: ContainerHeader,
    pub sections: Vec<Vec<u8>>,
}

impl LfcBitstream {
    pub fn subset1(&self) -> &[u8] {
        self.section(SECTION_SUBSET1)
    }

    pub fn subset2(&self) -> &[u8] {
        self.section(SECTION_SUBSET2)
    }

    pub fn metadata(&self) -> &[u8] {
        self.section(SECTION_METADATA)
    }

    pub fn residuals(&self) -> &[Vec<u8>] {
        self.sections.get(FIRST_RESIDUAL..).unwrap_or(&[])
    }

    fn section(&self, i: usize) -> &[u8] {
        self.sections.get(i).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sum of all section lengths.
    pub fn payload_bytes(&self) -> usize {
        self.sections.iter().map(Vec::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        write_container(&self.header, &self.sections)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_container(bytes)
    }
}

pub fn write_container(header: &ContainerHeader, sections: &[Vec<u8>]) -> Vec<u8> {
    let total: usize = sections.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 2 + 8 * sections.len() + total);
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&(sections.len() as u16).to_le_bytes());
    for s in sections {
        out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    }
    for s in sections {
        out.extend_from_slice(s);
    }
    out
}

pub fn read_container(bytes: &[u8]) -> Result<LfcBitstream> {
    let header = ContainerHeader::parse(bytes)?;
    let rest = &bytes[HEADER_LEN..];
    if rest.len() < 2 {
        return Err(Error::SectionTableMismatch("missing section count".into()));
    }
    let count = u16::from_le_bytes([rest[0], rest[1]]) as usize;
    let table_end = 2 + 8 * count;
    if rest.len() < table_end {
        return Err(Error::SectionTableMismatch(format!("table of {count} sections is truncated")));
    }
    let lens: Vec<u64> = (0..count)
        .map(|i| u64::from_le_bytes(rest[2 + 8 * i..10 + 8 * i].try_into().unwrap()))
        .collect();
    let available = (rest.len() - table_end) as u64;
    let declared = lens.iter().try_fold(0u64, |a, &l| a.checked_add(l));
    if declared != Some(available) {
        return Err(Error::SectionTableMismatch(format!(
            "table declares {} bytes, {available} present",
            declared.map_or("overflowing".to_string(), |d| d.to_string())
        )));
    }
    let mut pos = table_end;
    let sections = lens
        .iter()
        .map(|&l| {
            let s = rest[pos..pos + l as usize].to_vec();
            pos += l as usize;
            s
        })
        .collect();
    Ok(LfcBitstream { header, sections })
}

/// Serializes disparities followed by `(s, t)` coordinates, all `f64` LE.
pub fn encode_metadata(disparities: &[f64], coords: &[(f64, f64)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * disparities.len() + 16 * coords.len());
    for d in disparities {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for (s, t) in coords {
        out.extend_from_slice(&s.to_le_bytes());
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_metadata`] given the number of views.
pub fn decode_metadata(bytes: &[u8], views: usize) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let coord_len = 16 * views;
    if bytes.len() < coord_len || (bytes.len() - coord_len) % 8 != 0 {
        return Err(Error::CorruptPayload(format!("metadata of {} bytes does not fit {views} views", bytes.len())));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let n = (bytes.len() - coord_len) / 8;
    let disparities = (0..n).map(|k| f(8 * k)).collect();
    let coords = (0..views).map(|j| (f(8 * n + 16 * j), f(8 * n + 16 * j + 8))).collect();
    Ok((disparities, coords))
}
