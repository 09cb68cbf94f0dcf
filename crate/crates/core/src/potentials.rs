//! The eight input channels sampled on a grid.
//!
//! These are surrogate potentials built only from atom–voxel distances and
//! scalar atom attributes, so rotating structure and grid together permutes
//! every channel exactly:
//!
//! | channel | value at voxel `v` |
//! |---|---|
//! | Distance | `max_j exp(-d²/(2 r0²))` |
//! | Gravitational | `Σ_j 1/(s + d²)` |
//! | Electrostatic | `clamp(Σ_j q_j/(s + d), -clip, clip)` |
//! | Lipophilic … HB Donor | `Σ_{j flagged} exp(-d²/(2 r0²))` |
//!
//! Distances are taken relative to the grid center and the squared components
//! are summed smallest-first, so the result does not depend on axis order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{write_field, GridSpec, ScalarField3D};
use crate::ingest::{AtomicStructure, ChemFlags};

pub const CHANNEL_COUNT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    Distance,
    Gravitational,
    Electrostatic,
    Lipophilic,
    Hydrophilic,
    Polar,
    HbAcceptor,
    HbDonor,
}

impl ChannelId {
    pub const ALL: [ChannelId; CHANNEL_COUNT] = [
        ChannelId::Distance,
        ChannelId::Gravitational,
        ChannelId::Electrostatic,
        ChannelId::Lipophilic,
        ChannelId::Hydrophilic,
        ChannelId::Polar,
        ChannelId::HbAcceptor,
        ChannelId::HbDonor,
    ];

    /// Zero-based position in [`ChannelId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ChannelId> {
        ChannelId::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Distance => "distance",
            ChannelId::Gravitational => "gravitational",
            ChannelId::Electrostatic => "electrostatic",
            ChannelId::Lipophilic => "lipophilic",
            ChannelId::Hydrophilic => "hydrophilic",
            ChannelId::Polar => "polar",
            ChannelId::HbAcceptor => "hb_acceptor",
            ChannelId::HbDonor => "hb_donor",
        }
    }

    /// The flag whose carriers feed this channel, for the property channels.
    pub fn flag(self) -> Option<ChemFlags> {
        match self {
            ChannelId::Lipophilic => Some(ChemFlags::LIPOPHILIC),
            ChannelId::Hydrophilic => Some(ChemFlags::HYDROPHILIC),
            ChannelId::Polar => Some(ChemFlags::POLAR),
            ChannelId::HbAcceptor => Some(ChemFlags::HB_ACCEPTOR),
            ChannelId::HbDonor => Some(ChemFlags::HB_DONOR),
            _ => None,
        }
    }
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    /// Gaussian width `r0` of the distance and property channels, Å.
    pub gaussian_width: f64,
    /// Softening `s` added to `d²` in the gravitational channel, Å².
    pub gravity_softening: f64,
    /// Softening `s` added to `d` in the electrostatic channel, Å.
    pub coulomb_softening: f64,
    /// Electrostatic values are clamped to `[-clip, clip]`.
    pub coulomb_clip: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            gaussian_width: 1.7,
            gravity_softening: 1.0,
            coulomb_softening: 1.0,
            coulomb_clip: 10.0,
        }
    }
}

impl PotentialConfig {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.gaussian_width) && ok(self.gravity_softening) && ok(self.coulomb_softening) && ok(self.coulomb_clip) {
            Ok(())
        } else {
            Err(Error::domain(format!("potential constants must be positive: {self:?}")))
        }
    }
}

/// All eight channels on one grid, in [`ChannelId::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialStack {
    spec: GridSpec,
    channels: Vec<ScalarField3D>,
}

impl PotentialStack {
    pub fn new(channels: Vec<ScalarField3D>) -> Result<Self> {
        if channels.len() != CHANNEL_COUNT {
            return Err(Error::domain(format!("expected 8 channels, got {}", channels.len())));
        }
        let spec = *channels[0].spec();
        if channels.iter().any(|c| *c.spec() != spec) {
            return Err(Error::domain("channels must share one grid"));
        }
        Ok(PotentialStack { spec, channels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channel(&self, id: ChannelId) -> &ScalarField3D {
        &self.channels[id.index()]
    }

    pub fn channels(&self) -> &[ScalarField3D] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<ScalarField3D> {
        self.channels
    }

    /// `(file name, contents)` for each channel in the grid text format.
    pub fn to_named_fields(&self) -> Vec<(String, String)> {
        ChannelId::ALL
            .iter()
            .map(|&c| (format!("{}.field", c.name()), write_field(self.channel(c))))
            .collect()
    }
}

/// Per-axis tables of atom–voxel offsets, laid out `[voxel index][atom]`.
struct AxisTables {
    /// squared offset, Å²
    sq: [Vec<f64>; 3],
    /// `exp(-sq / (2 r0²))`
    gauss: [Vec<f64>; 3],
}

impl AxisTables {
    fn new(structure: &AtomicStructure, spec: &GridSpec, inv_two_r2: f64) -> Result<Self> {
        let c = spec.center();
        let h = spec.spacing();
        let dims = spec.dims();
        let reach: f64 = dims.iter().map(|&n| (n as f64 * h).powi(2)).sum::<f64>().sqrt();
        // offsets are measured from the grid center in voxel units so that
        // rotating structure and grid together permutes and negates them exactly
        let mut rel = [Vec::new(), Vec::new(), Vec::new()];
        for atom in structure.atoms() {
            let d: [f64; 3] = std::array::from_fn(|a| atom.position[a] - c[a]);
            if d.iter().map(|x| x * x).sum::<f64>().sqrt() > 4.0 * reach + 1.0 {
                return Err(Error::domain("structure lies far outside the grid"));
            }
            for a in 0..3 {
                rel[a].push(d[a] / h);
            }
        }
        let atoms = structure.len();
        let h2 = h * h;
        let sq: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let n = dims[a];
            let mut t = Vec::with_capacity(n * atoms);
            for i in 0..n {
                let v = i as f64 + 0.5 - n as f64 / 2.0;
                t.extend(rel[a].iter().map(|u| (v - u) * (v - u) * h2));
            }
            t
        });
        let gauss = std::array::from_fn(|a| sq[a].iter().map(|x| (-x * inv_two_r2).exp()).collect());
        Ok(AxisTables { sq, gauss })
    }
}

/// Sum of three terms in ascending order.
#[inline(always)]
fn sorted_sum3(a: f64, b: f64, c: f64) -> f64 {
    let (s, m, l) = sort3(a, b, c);
    (s + m) + l
}

/// Product of three terms in ascending order.
#[inline(always)]
fn sorted_prod3(a: f64, b: f64, c: f64) -> f64 {
    let (s, m, l) = sort3(a, b, c);
    (s * m) * l
}

/// Sum with four interleaved accumulators, combined in a fixed order.
#[inline(always)]
fn lane_sum(values: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = values.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        for l in 0..4 {
            acc[l] += c[l];
        }
    }
    for (l, v) in tail.iter().enumerate() {
        acc[l] += v;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// [`lane_sum`] of `values[i] * mask[i]`.
#[inline(always)]
fn masked_lane_sum(values: &[f64], mask: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = values.chunks_exact(4).zip(mask.chunks_exact(4));
    let n = values.len() / 4 * 4;
    for (c, m) in chunks {
        for l in 0..4 {
            acc[l] += c[l] * m[l];
        }
    }
    for (l, (v, m)) in values[n..].iter().zip(&mask[n..]).enumerate() {
        acc[l] += v * m;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

// Inputs are never NaN, so plain comparisons suffice and vectorize better
// than `f64::min`.
#[inline(always)]
fn lesser(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

#[inline(always)]
fn greater(a: f64, b: f64) -> f64 {
    if a < b {
        b
    } else {
        a
    }
}

#[inline(always)]
fn sort3(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let lo = lesser(a, b);
    let hi = greater(a, b);
    let rest = greater(lo, c);
    (lesser(lo, c), lesser(rest, hi), greater(rest, hi))
}

const FLAG_CHANNELS: [(ChannelId, ChemFlags); 5] = [
    (ChannelId::Lipophilic, ChemFlags::LIPOPHILIC),
    (ChannelId::Hydrophilic, ChemFlags::HYDROPHILIC),
    (ChannelId::Polar, ChemFlags::POLAR),
    (ChannelId::HbAcceptor, ChemFlags::HB_ACCEPTOR),
    (ChannelId::HbDonor, ChemFlags::HB_DONOR),
];

struct PlaneContext<'a> {
    t: &'a AxisTables,
    dims: [usize; 3],
    atoms: usize,
    /// Indices and charges of the charged atoms, ascending.
    charged: &'a [usize],
    charge: &'a [f64],
    /// 1.0 for atoms carrying the flag, 0.0 otherwise; `None` without carriers
    carriers: &'a [Option<Vec<f64>>],
    gs: f64,
    cs: f64,
    clip: f64,
}

impl PlaneContext<'_> {
    fn plane(&self, k: usize) -> Vec<[f64; CHANNEL_COUNT]> {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was just detected
            return unsafe { self.plane_avx2(k) };
        }
        self.plane_body(k)
    }

    // Same operations, wider registers: results are bit-identical because
    // nothing here fuses multiply and add.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn plane_avx2(&self, k: usize) -> Vec<[f64; CHANNEL_COUNT]> {
        self.plane_body(k)
    }

    #[inline(always)]
    fn plane_body(&self, k: usize) -> Vec<[f64; CHANNEL_COUNT]> {
        let (t, atoms) = (self.t, self.atoms);
        let [nx, ny, _] = self.dims;
        let (gs, cs) = (self.gs, self.cs);
        let (sz, ez) = (&t.sq[2][k * atoms..(k + 1) * atoms], &t.gauss[2][k * atoms..(k + 1) * atoms]);
        let mut d2 = vec![0.0; atoms];
        let mut g = vec![0.0; atoms];
        let mut term = vec![0.0; atoms];
        let mut cterm = vec![0.0; self.charged.len()];
        let mut plane = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let (sy, ey) = (&t.sq[1][j * atoms..(j + 1) * atoms], &t.gauss[1][j * atoms..(j + 1) * atoms]);
            for i in 0..nx {
                let (sx, ex) = (&t.sq[0][i * atoms..(i + 1) * atoms], &t.gauss[0][i * atoms..(i + 1) * atoms]);
                let lanes = d2.iter_mut().zip(g.iter_mut()).zip(sx.iter().zip(sy).zip(sz)).zip(ex.iter().zip(ey).zip(ez));
                for (((d, gv), ((&x, &y), &z)), ((&u, &v), &w)) in lanes {
                    *d = sorted_sum3(x, y, z);
                    *gv = sorted_prod3(u, v, w);
                }
                let nearest = g.iter().fold(0.0f64, |m, &x| greater(m, x));
                for (t, &d) in term.iter_mut().zip(&d2) {
                    *t = 1.0 / (gs + d);
                }
                let gravity = lane_sum(&term);
                let coulomb = if self.charged.is_empty() {
                    0.0
                } else {
                    for (t, &a) in cterm.iter_mut().zip(self.charged) {
                        *t = d2[a];
                    }
                    for (t, &q) in cterm.iter_mut().zip(self.charge) {
                        *t = q / (cs + t.sqrt());
                    }
                    lane_sum(&cterm).clamp(-self.clip, self.clip)
                };
                let f: [f64; 5] = std::array::from_fn(|c| match &self.carriers[c] {
                    Some(mask) => masked_lane_sum(&g, mask),
                    None => 0.0,
                });
                plane.push([nearest, gravity, coulomb, f[0], f[1], f[2], f[3], f[4]]);
            }
        }
        plane
    }
}

fn evaluate(structure: &AtomicStructure, spec: &GridSpec, cfg: &PotentialConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let inv_two_r2 = 1.0 / (2.0 * cfg.gaussian_width * cfg.gaussian_width);
    let t = AxisTables::new(structure, spec, inv_two_r2)?;
    let [nx, ny, nz] = spec.dims();
    let atoms = structure.len();
    // uncharged atoms add exact zeros, so they are left out of the sum
    let charged: Vec<usize> = (0..atoms).filter(|&a| structure.atoms()[a].partial_charge != 0.0).collect();
    let charge: Vec<f64> = charged.iter().map(|&a| structure.atoms()[a].partial_charge).collect();
    let carriers: Vec<Option<Vec<f64>>> = FLAG_CHANNELS
        .iter()
        .map(|(_, f)| {
            let mask: Vec<f64> = structure.atoms().iter().map(|a| if a.flags.contains(*f) { 1.0 } else { 0.0 }).collect();
            mask.contains(&1.0).then_some(mask)
        })
        .collect();
    let ctx = PlaneContext {
        t: &t,
        dims: [nx, ny, nz],
        atoms,
        charged: &charged,
        charge: &charge,
        carriers: &carriers,
        gs: cfg.gravity_softening,
        cs: cfg.coulomb_softening,
        clip: cfg.coulomb_clip,
    };
    let planes: Vec<Vec<[f64; CHANNEL_COUNT]>> = (0..nz).into_par_iter().map(|k| ctx.plane(k)).collect();

    let mut out: Vec<Vec<f64>> = (0..CHANNEL_COUNT).map(|_| Vec::with_capacity(spec.len())).collect();
    for plane in planes {
        for v in plane {
            for (c, x) in v.iter().enumerate() {
                out[c].push(*x);
            }
        }
    }
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite potential value".into()));
    }
    Ok(out)
}

/// One channel on `spec`. Computing the whole stack at once is cheaper.
pub fn compute_channel(
    structure: &AtomicStructure,
    spec: &GridSpec,
    channel: ChannelId,
    cfg: &PotentialConfig,
) -> Result<ScalarField3D> {
    let mut all = evaluate(structure, spec, cfg)?;
    ScalarField3D::new(*spec, all.swap_remove(channel.index()))
}

pub fn compute_stack(structure: &AtomicStructure, spec: &GridSpec, cfg: &PotentialConfig) -> Result<PotentialStack> {
    let channels = evaluate(structure, spec, cfg)?
        .into_iter()
        .map(|v| ScalarField3D::new(*spec, v))
        .collect::<Result<Vec<_>>>()?;
    PotentialStack::new(channels)
}
