//! Axis-aligned voxel grids, scalar fields and binary masks on them, and the
//! exact octahedral rotations that permute voxels without resampling.
//!
//! Linear voxel indices run x-fastest: `i + nx * (j + ny * k)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AtomicStructure;

/// Grid origins are snapped down to multiples of `2^-ORIGIN_BITS` Å so that
/// grid centers of power-of-two spacings are exactly representable.
const ORIGIN_BITS: i32 = 8;

/// Default voxel edge length in Å.
pub const DEFAULT_SPACING: f64 = 1.0;
/// Default clearance between the outermost atoms and the grid faces, in Å.
pub const DEFAULT_PADDING: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    origin: [f64; 3],
    spacing: f64,
    dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::domain(format!("grid spacing must be positive, got {spacing}")));
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("grid origin must be finite"));
        }
        if dims.contains(&0) {
            return Err(Error::domain(format!("grid dims must be >= 1, got {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::domain("grid too large"))?;
        Ok(GridSpec {
            origin,
            spacing,
            dims,
        })
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Number of voxels.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn is_cube(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    pub fn contains_index(&self, idx: [usize; 3]) -> bool {
        idx[0] < self.dims[0] && idx[1] < self.dims[1] && idx[2] < self.dims[2]
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    /// Center of voxel `idx`: `origin + spacing * (idx + 1/2)`.
    pub fn voxel_center(&self, idx: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + self.spacing * (idx[a] as f64 + 0.5))
    }

    /// Voxel whose cell contains `point`, if any.
    pub fn voxel_containing(&self, point: [f64; 3]) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let u = ((point[a] - self.origin[a]) / self.spacing).floor();
            if !(u >= 0.0 && u < self.dims[a] as f64) {
                return None;
            }
            idx[a] = u as usize;
        }
        Some(idx)
    }

    /// Geometric center of the grid box; rotations act about this point.
    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + self.spacing * self.dims[a] as f64 / 2.0)
    }

    /// Smallest cube grid with edge `max(dims, min_dim)` containing this grid,
    /// with the original box centered to within one voxel.
    pub fn padded_to_cube(&self, min_dim: usize) -> GridSpec {
        let n = self.dims.iter().copied().max().unwrap_or(1).max(min_dim);
        let origin = std::array::from_fn(|a| {
            let extra = n - self.dims[a];
            self.origin[a] - self.spacing * (extra / 2) as f64
        });
        GridSpec {
            origin,
            spacing: self.spacing,
            dims: [n; 3],
        }
    }
}

/// How a grid is laid over a structure before prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub spacing: f64,
    pub padding: f64,
    /// Pad to a cube so that all 24 octahedral rotations act on the grid.
    pub cube: bool,
    /// Lower bound on the cube edge (in voxels); ignored unless `cube`.
    pub min_dim: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            spacing: DEFAULT_SPACING,
            padding: DEFAULT_PADDING,
            cube: true,
            min_dim: 1,
        }
    }
}

impl GridConfig {
    pub fn grid_for(&self, structure: &AtomicStructure) -> Result<GridSpec> {
        let spec = bounding_grid(structure, self.spacing, self.padding)?;
        Ok(if self.cube {
            spec.padded_to_cube(self.min_dim)
        } else {
            spec
        })
    }

    pub fn grid_for_points(&self, points: &[[f64; 3]]) -> Result<GridSpec> {
        let spec = bounding_grid_for_points(points, self.spacing, self.padding)?;
        Ok(if self.cube {
            spec.padded_to_cube(self.min_dim)
        } else {
            spec
        })
    }
}

/// Minimal grid holding every atom strictly inside with at least `padding` Å
/// of clearance to each face.
pub fn bounding_grid(structure: &AtomicStructure, spacing: f64, padding: f64) -> Result<GridSpec> {
    let points: Vec<[f64; 3]> = structure.atoms().iter().map(|a| a.position).collect();
    bounding_grid_for_points(&points, spacing, padding)
}

pub fn bounding_grid_for_points(points: &[[f64; 3]], spacing: f64, padding: f64) -> Result<GridSpec> {
    if points.is_empty() {
        return Err(Error::domain("cannot bound an empty structure"));
    }
    if !(padding.is_finite() && padding >= 0.0) {
        return Err(Error::domain(format!("padding must be >= 0, got {padding}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::domain(format!("grid spacing must be positive, got {spacing}")));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            if !p[a].is_finite() {
                return Err(Error::domain("atom coordinates must be finite"));
            }
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let scale = 2f64.powi(ORIGIN_BITS);
    let origin: [f64; 3] = std::array::from_fn(|a| ((lo[a] - padding) * scale).floor() / scale);
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let mut n = ((hi[a] + padding - origin[a]) / spacing).floor() as usize + 1;
        // guard against the division rounding below the true quotient
        while origin[a] + spacing * n as f64 <= hi[a] + padding {
            n += 1;
        }
        dims[a] = n.max(1);
    }
    GridSpec::new(origin, spacing, dims)
}

/// A real-valued function sampled at voxel centers.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3D {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField3D {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::domain(format!(
                "field has {} values but grid has {} voxels",
                values.len(),
                spec.len()
            )));
        }
        Ok(ScalarField3D { spec, values })
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        ScalarField3D {
            values: vec![value; spec.len()],
            spec,
        }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut([usize; 3]) -> f64) -> Self {
        let values = (0..spec.len()).map(|l| f(spec.unlinear(l))).collect();
        ScalarField3D { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[self.spec.linear(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], value: f64) {
        let l = self.spec.linear(idx);
        self.values[l] = value;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField3D) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::domain("fields live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// A set of voxels of one grid. Members are kept sorted by linear index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelMask {
    spec: GridSpec,
    members: Vec<usize>,
}

// GridSpec holds floats but is never NaN by construction.
impl Eq for GridSpec {}

impl VoxelMask {
    pub fn empty(spec: GridSpec) -> Self {
        VoxelMask {
            spec,
            members: Vec::new(),
        }
    }

    pub fn full(spec: GridSpec) -> Self {
        VoxelMask {
            members: (0..spec.len()).collect(),
            spec,
        }
    }

    pub fn from_linear(spec: GridSpec, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&l| l >= spec.len()) {
            return Err(Error::domain(format!("voxel {bad} outside grid of {} voxels", spec.len())));
        }
        members.sort_unstable();
        members.dedup();
        Ok(VoxelMask { spec, members })
    }

    pub fn from_indices(spec: GridSpec, indices: impl IntoIterator<Item = [usize; 3]>) -> Result<Self> {
        let mut linear = Vec::new();
        for idx in indices {
            if !spec.contains_index(idx) {
                return Err(Error::domain(format!("voxel {idx:?} outside grid dims {:?}", spec.dims())));
            }
            linear.push(spec.linear(idx));
        }
        Self::from_linear(spec, linear)
    }

    /// Trusted constructor for members already sorted, unique and in range.
    pub(crate) fn from_sorted_unchecked(spec: GridSpec, members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(members.last().is_none_or(|&l| l < spec.len()));
        VoxelMask { spec, members }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Volume in Å³.
    pub fn volume(&self) -> f64 {
        self.members.len() as f64 * self.spec.voxel_volume()
    }

    pub fn contains(&self, linear: usize) -> bool {
        self.members.binary_search(&linear).is_ok()
    }

    pub fn indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.members.iter().map(|&l| self.spec.unlinear(l))
    }

    /// Lexicographically smallest `(i, j, k)` member.
    pub fn min_index(&self) -> Option<[usize; 3]> {
        self.indices().min()
    }

    pub fn intersection_count(&self, other: &VoxelMask) -> usize {
        let (a, b) = (&self.members, &other.members);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union_count(&self, other: &VoxelMask) -> usize {
        self.len() + other.len() - self.intersection_count(other)
    }

    pub fn union(&self, other: &VoxelMask) -> Result<VoxelMask> {
        if self.spec != other.spec {
            return Err(Error::domain("masks live on different grids"));
        }
        let mut members = Vec::with_capacity(self.len() + other.len());
        members.extend_from_slice(&self.members);
        members.extend_from_slice(&other.members);
        members.sort_unstable();
        members.dedup();
        Ok(VoxelMask {
            spec: self.spec,
            members,
        })
    }
}

/// `|a ∩ b| / |a|`.
pub fn overlap_fraction(a: &VoxelMask, b: &VoxelMask) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::domain("overlap of masks on different grids"));
    }
    if a.is_empty() {
        return Err(Error::domain("overlap undefined for an empty reference mask"));
    }
    Ok(a.intersection_count(b) as f64 / a.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// A rotation by `quarter_count * π/2` about one coordinate axis through the grid center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuarterTurn {
    axis: Axis,
    quarter_count: u8,
}

impl QuarterTurn {
    pub fn new(axis: Axis, quarter_count: i32) -> Self {
        QuarterTurn {
            axis,
            quarter_count: quarter_count.rem_euclid(4) as u8,
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn quarter_count(&self) -> u8 {
        self.quarter_count
    }

    pub fn inverse(&self) -> Self {
        QuarterTurn::new(self.axis, 4 - self.quarter_count as i32)
    }

    /// Same-axis composition; counts add mod 4.
    pub fn compose(&self, other: &QuarterTurn) -> Result<QuarterTurn> {
        if self.axis != other.axis {
            return Err(Error::domain("quarter turns about different axes do not compose to a quarter turn"));
        }
        Ok(QuarterTurn::new(
            self.axis,
            self.quarter_count as i32 + other.quarter_count as i32,
        ))
    }

    pub fn to_rotation(&self) -> Rotation {
        let single = match self.axis {
            // (x, y, z) -> (x, -z, y)
            Axis::X => Rotation {
                perm: [0, 2, 1],
                sign: [1, -1, 1],
            },
            // (x, y, z) -> (z, y, -x)
            Axis::Y => Rotation {
                perm: [2, 1, 0],
                sign: [1, 1, -1],
            },
            // (x, y, z) -> (-y, x, z)
            Axis::Z => Rotation {
                perm: [1, 0, 2],
                sign: [-1, 1, 1],
            },
        };
        (0..self.quarter_count).fold(Rotation::identity(), |acc, _| single.compose(&acc))
    }
}

impl From<QuarterTurn> for Rotation {
    fn from(q: QuarterTurn) -> Self {
        q.to_rotation()
    }
}

/// An element of the 24-element rotation group of the cube, stored as a
/// signed axis permutation: `p'[a] = sign[a] * p[perm[a]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rotation {
    perm: [usize; 3],
    sign: [i8; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            perm: [0, 1, 2],
            sign: [1, 1, 1],
        }
    }

    /// All 24 proper rotations, in a fixed order starting with the identity.
    pub fn all() -> Vec<Rotation> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(24);
        for perm in PERMS {
            let parity: i8 = if matches!(perm, [0, 1, 2] | [1, 2, 0] | [2, 0, 1]) { 1 } else { -1 };
            for bits in 0..8u8 {
                let sign: [i8; 3] = std::array::from_fn(|a| if bits >> a & 1 == 1 { -1 } else { 1 });
                if parity * sign[0] * sign[1] * sign[2] == 1 {
                    out.push(Rotation { perm, sign });
                }
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == Rotation::identity()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation {
            perm: std::array::from_fn(|a| other.perm[self.perm[a]]),
            sign: std::array::from_fn(|a| self.sign[a] * other.sign[self.perm[a]]),
        }
    }

    pub fn inverse(&self) -> Rotation {
        let mut perm = [0; 3];
        let mut sign = [1; 3];
        for a in 0..3 {
            perm[self.perm[a]] = a;
            sign[self.perm[a]] = self.sign[a];
        }
        Rotation { perm, sign }
    }

    /// Rotate a displacement vector (exact: only permutes and negates).
    pub fn apply_vector(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| {
            let x = v[self.perm[a]];
            if self.sign[a] < 0 {
                -x
            } else {
                x
            }
        })
    }

    /// Rotate `point` about `center`.
    pub fn apply_point(&self, point: [f64; 3], center: [f64; 3]) -> [f64; 3] {
        let d: [f64; 3] = std::array::from_fn(|a| point[a] - center[a]);
        let r = self.apply_vector(d);
        std::array::from_fn(|a| center[a] + r[a])
    }

    /// Whether the grid box maps onto itself under this rotation.
    pub fn preserves(&self, spec: &GridSpec) -> bool {
        let d = spec.dims();
        (0..3).all(|a| d[self.perm[a]] == d[a])
    }

    #[inline]
    pub fn apply_index(&self, idx: [usize; 3], dims: [usize; 3]) -> [usize; 3] {
        std::array::from_fn(|a| {
            let b = self.perm[a];
            if self.sign[a] < 0 {
                dims[b] - 1 - idx[b]
            } else {
                idx[b]
            }
        })
    }

    fn check(&self, spec: &GridSpec) -> Result<()> {
        if self.preserves(spec) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "rotation {self:?} does not map grid dims {:?} onto themselves; pad the grid to a cube",
                spec.dims()
            )))
        }
    }

    /// The single quarter turn this rotation equals, if any.
    pub fn as_quarter_turn(&self) -> Option<QuarterTurn> {
        for axis in Axis::ALL {
            for c in 0..4 {
                let q = QuarterTurn::new(axis, c);
                if q.to_rotation() == *self {
                    return Some(q);
                }
            }
        }
        None
    }
}

/// Exact voxel permutation of a field under a rotation about the grid center.
pub fn rotate_field(field: &ScalarField3D, rotation: impl Into<Rotation>) -> Result<ScalarField3D> {
    let rot = rotation.into();
    let spec = *field.spec();
    rot.check(&spec)?;
    if rot.is_identity() {
        return Ok(field.clone());
    }
    let dims = spec.dims();
    let mut out = vec![0.0; spec.len()];
    for (l, &v) in field.values().iter().enumerate() {
        out[spec.linear(rot.apply_index(spec.unlinear(l), dims))] = v;
    }
    ScalarField3D::new(spec, out)
}

pub fn rotate_mask(mask: &VoxelMask, rotation: impl Into<Rotation>) -> Result<VoxelMask> {
    let rot = rotation.into();
    let spec = *mask.spec();
    rot.check(&spec)?;
    let dims = spec.dims();
    let mut members: Vec<usize> = mask
        .members()
        .iter()
        .map(|&l| spec.linear(rot.apply_index(spec.unlinear(l), dims)))
        .collect();
    members.sort_unstable();
    Ok(VoxelMask::from_sorted_unchecked(spec, members))
}

fn write_header(out: &mut String, kind: &str, spec: &GridSpec) {
    let [ox, oy, oz] = spec.origin();
    let [nx, ny, nz] = spec.dims();
    let _ = writeln!(out, "{kind}");
    let _ = writeln!(out, "origin {ox:?} {oy:?} {oz:?}");
    let _ = writeln!(out, "spacing {:?}", spec.spacing());
    let _ = writeln!(out, "dims {nx} {ny} {nz}");
}

/// Text form: a `field` header (origin, spacing, dims) followed by one value
/// per line in linear-index order. Floats use shortest round-trip notation.
pub fn write_field(field: &ScalarField3D) -> String {
    let mut out = String::with_capacity(field.values().len() * 20 + 64);
    write_header(&mut out, "field", field.spec());
    for v in field.values() {
        let _ = writeln!(out, "{v:?}");
    }
    out
}

/// Text form: a `mask` header, a `count` line, then one `i j k` triple per line.
pub fn write_mask(mask: &VoxelMask) -> String {
    let mut out = String::with_capacity(mask.len() * 12 + 64);
    write_header(&mut out, "mask", mask.spec());
    let _ = writeln!(out, "count {}", mask.len());
    for [i, j, k] in mask.indices() {
        let _ = writeln!(out, "{i} {j} {k}");
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (n, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((n + 1, t));
            }
        }
        None
    }

    fn expect_keyword(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self
            .next_line()
            .ok_or_else(|| Error::parse(0, format!("missing `{key}` record")))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some(k) if k == key => Ok((n, toks.collect())),
            _ => Err(Error::parse(n, format!("expected `{key}` record"))),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid number `{tok}`")))
}

fn read_header(lines: &mut Lines<'_>, kind: &str) -> Result<GridSpec> {
    lines.expect_keyword(kind)?;
    let (n, o) = lines.expect_keyword("origin")?;
    if o.len() != 3 {
        return Err(Error::parse(n, "origin needs 3 values"));
    }
    let origin = [parse_num(n, o[0])?, parse_num(n, o[1])?, parse_num(n, o[2])?];
    let (n, s) = lines.expect_keyword("spacing")?;
    if s.len() != 1 {
        return Err(Error::parse(n, "spacing needs 1 value"));
    }
    let spacing = parse_num(n, s[0])?;
    let (n, d) = lines.expect_keyword("dims")?;
    if d.len() != 3 {
        return Err(Error::parse(n, "dims needs 3 values"));
    }
    let dims = [parse_num(n, d[0])?, parse_num(n, d[1])?, parse_num(n, d[2])?];
    GridSpec::new(origin, spacing, dims).map_err(|e| Error::parse(n, e.to_string()))
}

pub fn read_field(text: &str) -> Result<ScalarField3D> {
    let mut lines = Lines::new(text);
    let spec = read_header(&mut lines, "field")?;
    let mut values = Vec::with_capacity(spec.len());
    while let Some((n, line)) = lines.next_line() {
        for tok in line.split_whitespace() {
            values.push(parse_num::<f64>(n, tok)?);
        }
    }
    if values.len() != spec.len() {
        return Err(Error::parse(
            0,
            format!("expected {} values, found {}", spec.len(), values.len()),
        ));
    }
    ScalarField3D::new(spec, values)
}

pub fn read_mask(text: &str) -> Result<VoxelMask> {
    let mut lines = Lines::new(text);
    let spec = read_header(&mut lines, "mask")?;
    let (n, c) = lines.expect_keyword("count")?;
    if c.len() != 1 {
        return Err(Error::parse(n, "count needs 1 value"));
    }
    let count: usize = parse_num(n, c[0])?;
    let mut indices = Vec::with_capacity(count);
    while let Some((n, line)) = lines.next_line() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::parse(n, "expected an `i j k` triple"));
        }
        let idx = [parse_num(n, t[0])?, parse_num(n, t[1])?, parse_num(n, t[2])?];
        if !spec.contains_index(idx) {
            return Err(Error::parse(n, format!("voxel {idx:?} outside grid")));
        }
        indices.push(idx);
    }
    if indices.len() != count {
        return Err(Error::parse(0, format!("expected {count} voxels, found {}", indices.len())));
    }
    VoxelMask::from_indices(spec, indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> GridSpec {
        GridSpec::new([0.0; 3], 1.0, [n; 3]).unwrap()
    }

    #[test]
    fn spec_rejects_bad_inputs() {
        assert!(GridSpec::new([0.0; 3], 0.0, [1, 1, 1]).is_err());
        assert!(GridSpec::new([0.0; 3], -1.0, [1, 1, 1]).is_err());
        assert!(GridSpec::new([0.0; 3], 1.0, [0, 1, 1]).is_err());
        assert!(GridSpec::new([f64::NAN, 0.0, 0.0], 1.0, [1, 1, 1]).is_err());
    }

    #[test]
    fn index_center_roundtrip() {
        let spec = GridSpec::new([-3.25, 1.5, 0.0], 0.7, [5, 4, 3]).unwrap();
        for l in 0..spec.len() {
            let idx = spec.unlinear(l);
            assert_eq!(spec.linear(idx), l);
            assert_eq!(spec.voxel_containing(spec.voxel_center(idx)), Some(idx));
        }
        assert_eq!(spec.voxel_containing([-100.0, 0.0, 0.0]), None);
    }

    #[test]
    fn bounding_single_point() {
        let spec = bounding_grid_for_points(&[[0.0, 0.0, 0.0]], 1.0, 2.0).unwrap();
        assert!(spec.dims().iter().all(|&d| d >= 4));
        let o = spec.origin();
        for a in 0..3 {
            assert!(o[a] <= -2.0);
            assert!(o[a] + spec.dims()[a] as f64 > 2.0);
        }
    }

    #[test]
    fn bounding_two_points() {
        let spec = bounding_grid_for_points(&[[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]], 1.0, 1.0).unwrap();
        assert!(spec.dims()[0] >= 12);
        assert!(spec.dims()[0] as f64 * spec.spacing() >= 12.0);
    }

    #[test]
    fn bounding_empty_is_error() {
        assert!(matches!(bounding_grid_for_points(&[], 1.0, 1.0), Err(Error::Domain(_))));
        assert!(bounding_grid_for_points(&[[0.0; 3]], 1.0, -1.0).is_err());
    }

    #[test]
    fn quarter_turn_group_law() {
        for axis in Axis::ALL {
            for a in 0..4 {
                for b in 0..4 {
                    let qa = QuarterTurn::new(axis, a);
                    let qb = QuarterTurn::new(axis, b);
                    let c = qa.compose(&qb).unwrap();
                    assert_eq!(c.quarter_count() as i32, (a + b) % 4);
                    assert_eq!(c.to_rotation(), qa.to_rotation().compose(&qb.to_rotation()));
                }
                let q = QuarterTurn::new(axis, a);
                assert!(q.to_rotation().compose(&q.inverse().to_rotation()).is_identity());
            }
        }
        assert!(QuarterTurn::new(Axis::X, 1).compose(&QuarterTurn::new(Axis::Y, 1)).is_err());
    }

    #[test]
    fn rotation_group_has_24_distinct_closed_elements() {
        let all = Rotation::all();
        assert_eq!(all.len(), 24);
        assert!(all[0].is_identity());
        let set: std::collections::BTreeSet<_> = all.iter().copied().collect();
        assert_eq!(set.len(), 24);
        for a in &all {
            assert!(a.compose(&a.inverse()).is_identity());
            for b in &all {
                assert!(set.contains(&a.compose(b)));
            }
        }
        // every quarter turn is a group element
        for axis in Axis::ALL {
            assert!(set.contains(&QuarterTurn::new(axis, 1).to_rotation()));
        }
    }

    #[test]
    fn x_turn_index_convention() {
        let n = 5;
        let spec = cube(n);
        let q = QuarterTurn::new(Axis::X, 1);
        let mut f = ScalarField3D::filled(spec, 0.0);
        f.set([1, 2, 3], 1.0);
        let r = rotate_field(&f, q).unwrap();
        assert_eq!(r.get([1, n - 1 - 3, 2]), 1.0);
        assert_eq!(r.values().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    /// Rotating the voxel center geometrically about the grid center must land
    /// on the center of the voxel the index map selects.
    #[test]
    fn index_map_matches_coordinate_map() {
        let spec = GridSpec::new([-2.5, 3.0, 7.25], 0.5, [6, 6, 6]).unwrap();
        let c = spec.center();
        for rot in Rotation::all() {
            for l in 0..spec.len() {
                let idx = spec.unlinear(l);
                let moved = rot.apply_point(spec.voxel_center(idx), c);
                let target = spec.voxel_center(rot.apply_index(idx, spec.dims()));
                for a in 0..3 {
                    assert!((moved[a] - target[a]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotation_identity_and_four_cycle() {
        let spec = cube(4);
        let f = ScalarField3D::from_fn(spec, |[i, j, k]| (i * 16 + j * 4 + k) as f64 * 0.1);
        assert_eq!(rotate_field(&f, QuarterTurn::new(Axis::X, 0)).unwrap(), f);
        let mut g = f.clone();
        for _ in 0..4 {
            g = rotate_field(&g, QuarterTurn::new(Axis::X, 1)).unwrap();
        }
        assert_eq!(g, f);
        for rot in Rotation::all() {
            let back = rotate_field(&rotate_field(&f, rot).unwrap(), rot.inverse()).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn rotation_needs_square_cross_section() {
        let spec = GridSpec::new([0.0; 3], 1.0, [3, 4, 5]).unwrap();
        let f = ScalarField3D::filled(spec, 0.0);
        assert!(matches!(rotate_field(&f, QuarterTurn::new(Axis::X, 1)), Err(Error::Domain(_))));
        // half turns keep every axis length
        assert!(rotate_field(&f, QuarterTurn::new(Axis::X, 2)).is_ok());
        let spec = GridSpec::new([0.0; 3], 1.0, [3, 4, 4]).unwrap();
        assert!(rotate_field(&ScalarField3D::filled(spec, 0.0), QuarterTurn::new(Axis::X, 1)).is_ok());
    }

    #[test]
    fn mask_rotation_edge_cases() {
        let spec = cube(3);
        let q = QuarterTurn::new(Axis::Z, 1);
        assert!(rotate_mask(&VoxelMask::empty(spec), q).unwrap().is_empty());
        assert_eq!(rotate_mask(&VoxelMask::full(spec), q).unwrap(), VoxelMask::full(spec));
    }

    #[test]
    fn overlap_examples() {
        let spec = cube(4);
        let a = VoxelMask::from_linear(spec, 0..8).unwrap();
        let b = VoxelMask::from_linear(spec, 2..20).unwrap();
        assert_eq!(overlap_fraction(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap_fraction(&a, &b).unwrap(), 0.75);
        let c = VoxelMask::from_linear(spec, 30..40).unwrap();
        assert_eq!(overlap_fraction(&a, &c).unwrap(), 0.0);
        assert!(overlap_fraction(&VoxelMask::empty(spec), &a).is_err());
        let other = VoxelMask::empty(cube(5));
        assert!(overlap_fraction(&a, &other).is_err());
    }

    #[test]
    fn pad_to_cube_contains_original() {
        let spec = GridSpec::new([1.0, 2.0, 3.0], 1.0, [3, 7, 4]).unwrap();
        let c = spec.padded_to_cube(10);
        assert_eq!(c.dims(), [10; 3]);
        for a in 0..3 {
            assert!(c.origin()[a] <= spec.origin()[a]);
            let hi = spec.origin()[a] + spec.dims()[a] as f64;
            assert!(c.origin()[a] + 10.0 >= hi);
        }
    }

    #[test]
    fn field_text_roundtrip_bit_exact() {
        let spec = GridSpec::new([-1.1, 0.3, 1e-7], 0.37, [3, 2, 2]).unwrap();
        let f = ScalarField3D::from_fn(spec, |[i, j, k]| ((i + 2 * j + 5 * k) as f64).sin() / 3.0);
        let g = read_field(&write_field(&f)).unwrap();
        assert_eq!(f, g);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mask_text_roundtrip() {
        let spec = cube(5);
        let m = VoxelMask::from_linear(spec, [3, 17, 44, 99, 124]).unwrap();
        assert_eq!(read_mask(&write_mask(&m)).unwrap(), m);
    }

    #[test]
    fn field_parse_errors_name_the_line() {
        let text = "field\norigin 0 0 0\nspacing 1\ndims 1 1 2\n0.5\nabc\n";
        match read_field(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_field("field\norigin 0 0 0\nspacing 1\ndims 1 1 2\n0.5\n").is_err());
        assert!(read_mask("mask\norigin 0 0 0\nspacing 1\ndims 2 2 2\ncount 1\n5 0 0\n").is_err());
    }
}
