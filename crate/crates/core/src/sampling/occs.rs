//! OCCS sample container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "OCCS" | u32 version | u64 asset hash | u32 section count | u32 zero
//! section table: { u32 kind, u32 count, u64 offset, u64 byte length } per section
//! section bodies, in table order
//! ```
//!
//! Points are `count x 3` f32, labels and flags one byte each, voxels packed
//! bits.

use nalgebra::Point3;

use super::{asset_hash, AssetSamples, VoxelGrid, VOXEL_RES};
use crate::error::{Error, Result};

pub const OCCS_MAGIC: &[u8; 4] = b"OCCS";
pub const OCCS_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;
const ENTRY_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum SectionKind {
    Surface = 1,
    Downsample = 2,
    Queries = 3,
    Labels = 4,
    NearFlags = 5,
    Voxel16 = 6,
    Bbox8 = 7,
    Sparse512 = 8,
    Partial = 9,
}

impl SectionKind {
    pub fn from_u32(v: u32) -> Option<Self> {
        use SectionKind::*;
        Some(match v {
            1 => Surface,
            2 => Downsample,
            3 => Queries,
            4 => Labels,
            5 => NearFlags,
            6 => Voxel16,
            7 => Bbox8,
            8 => Sparse512,
            9 => Partial,
            _ => return None,
        })
    }

    /// Bytes per element, `None` for packed bits.
    pub fn element_size(self) -> Option<usize> {
        match self {
            SectionKind::Labels | SectionKind::NearFlags => Some(1),
            SectionKind::Voxel16 => None,
            _ => Some(12),
        }
    }

    pub fn byte_len(self, count: usize) -> usize {
        match self.element_size() {
            Some(s) => s * count,
            None => count.div_ceil(8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    pub count: u32,
    pub data: Vec<u8>,
}

impl Section {
    pub fn points(kind: SectionKind, points: &[Point3<f64>]) -> Self {
        let mut data = Vec::with_capacity(points.len() * 12);
        for p in points {
            for v in p.iter() {
                data.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Self {
            kind,
            count: points.len() as u32,
            data,
        }
    }

    pub fn bytes(kind: SectionKind, bytes: Vec<u8>) -> Self {
        Self {
            kind,
            count: bytes.len() as u32,
            data: bytes,
        }
    }

    /// Decodes a point section.
    pub fn as_points(&self) -> Result<Vec<Point3<f32>>> {
        if self.kind.element_size() != Some(12) {
            return Err(Error::Parse { format: "OCCS", msg: format!("{:?} is not a point section", self.kind) });
        }
        Ok(self
            .data
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes(c[i..i + 4].try_into().expect("4 bytes"));
                Point3::new(f(0), f(4), f(8))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccsFile {
    pub asset_hash: u64,
    pub sections: Vec<Section>,
}

impl OccsFile {
    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn sections_of(&self, kind: SectionKind) -> impl Iterator<Item = &Section> {
        self.sections.iter().filter(move |s| s.kind == kind)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let table_end = HEADER_LEN + ENTRY_LEN * self.sections.len();
        let total = table_end + self.sections.iter().map(|s| s.data.len()).sum::<usize>();
        let mut out = Vec::with_capacity(total);
        out.extend_from_slice(OCCS_MAGIC);
        out.extend_from_slice(&OCCS_VERSION.to_le_bytes());
        out.extend_from_slice(&self.asset_hash.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        let mut offset = table_end as u64;
        for s in &self.sections {
            out.extend_from_slice(&(s.kind as u32).to_le_bytes());
            out.extend_from_slice(&s.count.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(s.data.len() as u64).to_le_bytes());
            offset += s.data.len() as u64;
        }
        for s in &self.sections {
            out.extend_from_slice(&s.data);
        }
        out
    }

    /// Parses and checks a container. Every section must match its declared
    /// count and the sections must exactly fill the file.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Parse { format: "OCCS", msg };
        if bytes.len() < HEADER_LEN || &bytes[..4] != OCCS_MAGIC {
            return Err(bad("missing magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != OCCS_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let asset_hash = u64_at(8);
        let n = u32_at(16) as usize;
        let table_end = HEADER_LEN + ENTRY_LEN * n;
        if bytes.len() < table_end {
            return Err(bad("truncated section table".into()));
        }
        let mut sections = Vec::with_capacity(n);
        let mut expected_offset = table_end as u64;
        for i in 0..n {
            let e = HEADER_LEN + ENTRY_LEN * i;
            let kind = SectionKind::from_u32(u32_at(e)).ok_or_else(|| bad(format!("unknown section kind {}", u32_at(e))))?;
            let count = u32_at(e + 4);
            let (offset, len) = (u64_at(e + 8), u64_at(e + 16));
            if offset != expected_offset {
                return Err(bad(format!("section {i} starts at {offset}, expected {expected_offset}")));
            }
            if kind.byte_len(count as usize) as u64 != len {
                return Err(bad(format!("section {i} ({kind:?}) has {len} bytes for {count} elements")));
            }
            let end = offset.checked_add(len).filter(|&e| e <= bytes.len() as u64);
            let end = end.ok_or_else(|| bad(format!("section {i} ({kind:?}) runs past the end")))?;
            sections.push(Section {
                kind,
                count,
                data: bytes[offset as usize..end as usize].to_vec(),
            });
            expected_offset = end;
        }
        if expected_offset != bytes.len() as u64 {
            return Err(bad(format!("{} trailing bytes", bytes.len() as u64 - expected_offset)));
        }
        Ok(Self { asset_hash, sections })
    }
}

impl AssetSamples {
    /// Surface/downsample pairs, queries, labels, near flags, then the
    /// conditioning payloads.
    pub fn to_occs(&self) -> OccsFile {
        let mut sections = Vec::new();
        for (s, d) in &self.surfaces {
            sections.push(Section::points(SectionKind::Surface, &s.points));
            sections.push(Section::points(SectionKind::Downsample, &d.points));
        }
        sections.push(Section::points(SectionKind::Queries, &self.queries.queries));
        sections.push(Section::bytes(SectionKind::Labels, self.queries.labels.clone()));
        sections.push(Section::bytes(
            SectionKind::NearFlags,
            self.queries.near.iter().map(|&n| u8::from(n)).collect(),
        ));
        sections.push(Section {
            kind: SectionKind::Voxel16,
            count: self.voxels.occupied.len() as u32,
            data: self.voxels.to_bits(),
        });
        sections.push(Section::points(SectionKind::Bbox8, &self.bbox));
        sections.push(Section::points(SectionKind::Sparse512, &self.sparse.points));
        sections.push(Section::points(SectionKind::Partial, &self.partial.flattened()));
        OccsFile {
            asset_hash: asset_hash(&self.asset_id),
            sections,
        }
    }
}

/// Voxel grid stored in a container, if any.
pub fn occs_voxels(file: &OccsFile) -> Option<Result<VoxelGrid>> {
    file.section(SectionKind::Voxel16)
        .map(|s| VoxelGrid::from_bits(VOXEL_RES, &s.data))
}
