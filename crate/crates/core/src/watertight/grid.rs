use std::io::{Read, Write};

use nalgebra::Point3;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CLGD";
const VERSION: u32 = 1;

/// Sample lattice over `[-1, 1]^3` with `res` points per axis (voxel corners).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub res: usize,
}

impl GridSpec {
    pub fn new(res: usize) -> Result<Self> {
        if res < 2 {
            return Err(Error::invalid(format!("grid resolution {res} < 2")));
        }
        Ok(Self { res })
    }

    /// Grid spacing `2 / (R - 1)`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 / (self.res - 1) as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.res * self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.res * (j + self.res * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let r = self.res;
        (index % r, (index / r) % r, index / (r * r))
    }

    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        // exact at both ends
        if i + 1 == self.res {
            1.0
        } else {
            -1.0 + i as f64 * self.spacing()
        }
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(self.coordinate(i), self.coordinate(j), self.coordinate(k))
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let m = self.res - 1;
        i == 0 || j == 0 || k == 0 || i == m || j == m || k == m
    }
}

/// What a [`ScalarGrid`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Unsigned,
    Signed,
}

/// Dense scalar field, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    spec: GridSpec,
    kind: FieldKind,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::SizeMismatch(values.len(), spec.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite grid value at {i}")));
        }
        if kind == FieldKind::Unsigned && values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("negative value in an unsigned field"));
        }
        Ok(Self { spec, kind, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, kind: FieldKind, f: impl Fn(&Point3<f64>) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let r = spec.res;
        let mut values = vec![0.0; spec.len()];
        values.par_chunks_mut(r * r).enumerate().for_each(|(k, slab)| {
            for j in 0..r {
                for i in 0..r {
                    slab[i + r * j] = f(&spec.point(i, j, k));
                }
            }
        });
        Self::new(spec, kind, values)
    }

    pub(crate) fn from_parts_unchecked(spec: GridSpec, kind: FieldKind, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, kind, values }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn res(&self) -> usize {
        self.spec.res
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Trilinear interpolation; points outside the cube are clamped onto it.
    pub fn sample(&self, p: &Point3<f64>) -> f64 {
        let r = self.spec.res;
        let h = self.spec.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let u = ((p[k].clamp(-1.0, 1.0) + 1.0) / h).min((r - 1) as f64);
            let i = (u.floor() as usize).min(r - 2);
            base[k] = i;
            frac[k] = u - i as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if dx == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dz == 1 { frac[2] } else { 1.0 - frac[2] });
            if w != 0.0 {
                acc += w * self.get(base[0] + dx, base[1] + dy, base[2] + dz);
            }
        }
        acc
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_dump(&self, w: impl Write) -> std::io::Result<()> {
        let kind = match self.kind {
            FieldKind::Unsigned => GridDumpKind::Udf,
            FieldKind::Signed => GridDumpKind::Signed,
        };
        let mut body = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            body.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        write_dump(w, self.spec.res, kind, &body)
    }
}

/// Per-point inside/outside classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    spec: GridSpec,
    inside: Vec<bool>,
}

impl LabelGrid {
    pub fn new(spec: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != spec.len() {
            return Err(Error::SizeMismatch(inside.len(), spec.len()));
        }
        Ok(Self { spec, inside })
    }

    pub fn all_outside(spec: GridSpec) -> Self {
        Self {
            spec,
            inside: vec![false; spec.len()],
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn res(&self) -> usize {
        self.spec.res
    }

    #[inline]
    pub fn is_inside(&self, index: usize) -> bool {
        self.inside[index]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> bool {
        self.inside[self.spec.index(i, j, k)]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn inside_fraction(&self) -> f64 {
        self.inside_count() as f64 / self.inside.len() as f64
    }

    /// True iff all eight cube-corner points are outside.
    pub fn corners_outside(&self) -> bool {
        let m = self.spec.res - 1;
        (0..8).all(|c| !self.at(if c & 1 == 0 { 0 } else { m }, if c & 2 == 0 { 0 } else { m }, if c & 4 == 0 { 0 } else { m }))
    }

    pub fn write_dump(&self, w: impl Write) -> std::io::Result<()> {
        let body: Vec<u8> = self.inside.iter().map(|&b| b as u8).collect();
        write_dump(w, self.spec.res, GridDumpKind::Labels, &body)
    }
}

/// Kind byte of the debug dump format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum GridDumpKind {
    Udf = 0,
    Signed = 1,
    Labels = 2,
}

/// Parsed debug dump.
#[derive(Debug, Clone, PartialEq)]
pub enum GridDump {
    Field(ScalarGrid),
    Labels(LabelGrid),
}

fn write_dump(mut w: impl Write, res: usize, kind: GridDumpKind, body: &[u8]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(res as u32).to_le_bytes())?;
    w.write_all(&[kind as u8])?;
    w.write_all(body)
}

/// Reads a `CLGD` dump. Field values come back as the stored `f32`s.
pub fn read_grid_dump(mut r: impl Read) -> Result<GridDump> {
    let err = |msg: &str| Error::Parse {
        format: "CLGD",
        msg: msg.to_owned(),
    };
    let mut head = [0u8; 13];
    r.read_exact(&mut head).map_err(|_| err("truncated header"))?;
    if &head[..4] != MAGIC {
        return Err(err("bad magic"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(err("unsupported version"));
    }
    let res = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let spec = GridSpec::new(res)?;
    let n = spec.len();
    match head[12] {
        k @ (0 | 1) => {
            let mut buf = vec![0u8; n * 4];
            r.read_exact(&mut buf).map_err(|_| err("truncated body"))?;
            let values = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let kind = if k == 0 { FieldKind::Unsigned } else { FieldKind::Signed };
            Ok(GridDump::Field(ScalarGrid::new(spec, kind, values)?))
        }
        2 => {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf).map_err(|_| err("truncated body"))?;
            if buf.iter().any(|&b| b > 1) {
                return Err(err("label byte out of range"));
            }
            Ok(GridDump::Labels(LabelGrid::new(spec, buf.into_iter().map(|b| b == 1).collect())?))
        }
        _ => Err(err("unknown kind")),
    }
}
