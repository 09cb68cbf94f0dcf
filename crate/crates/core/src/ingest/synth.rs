//! Seeded synthetic fixtures: globular "proteins" with one planted surface
//! cavity and a ligand sitting in it, and random-walk trajectories.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Atom, AtomicStructure, ChemFlags, LigandRegion, Trajectory, DEFAULT_LIGAND_RADIUS};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, GridSpec};

const MIN_SEPARATION: f64 = 1.2;
const MAX_PLACEMENT_TRIES: usize = 400_000;

/// Which atoms carry chemical flags and charges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FlagScheme {
    /// Cavity lining is lipophilic with some polar/acceptor atoms; the rest of
    /// the surface is mostly hydrophilic and carries the partial charges.
    Realistic,
    /// Only the cavity lining carries this flag set; nothing else is flagged
    /// or charged. Makes a single property channel informative.
    LiningOnly(ChemFlags),
    /// No flags, no charges: only the geometric channels are non-zero.
    Bare,
}

/// Geometry of the planted pocket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocketSpec {
    /// Radius of the empty spherical cavity, Å.
    pub radius: f64,
    /// Distance from the blob surface inward to the cavity center, Å.
    pub depth: f64,
    /// Atoms within `radius + lining` of the cavity center form the lining.
    pub lining: f64,
    pub ligand_atoms: usize,
    /// Ligand atoms stay within this distance of the cavity center, Å.
    pub ligand_spread: f64,
    pub ligand_radius: f64,
    /// Atoms per Å³ in the blob.
    pub density: f64,
    /// Share of the atoms packed into the lining shell. Dense walls make the
    /// cavity stand out from the bulk.
    pub lining_share: f64,
    pub flags: FlagScheme,
}

impl Default for PocketSpec {
    fn default() -> Self {
        PocketSpec {
            radius: 4.0,
            depth: 4.0,
            lining: 3.0,
            ligand_atoms: 5,
            ligand_spread: 1.0,
            ligand_radius: DEFAULT_LIGAND_RADIUS,
            density: 0.04,
            lining_share: 0.35,
            flags: FlagScheme::Realistic,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticComplex {
    pub structure: AtomicStructure,
    pub ligand: Vec<[f64; 3]>,
    pub cavity_center: [f64; 3],
    pub grid: GridSpec,
    pub region: LigandRegion,
}

impl SyntheticComplex {
    pub fn into_pair(self) -> (AtomicStructure, LigandRegion) {
        (self.structure, self.region)
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.map(|x| x / n);
        }
    }
}

fn in_ball(rng: &mut ChaCha8Rng, center: [f64; 3], radius: f64) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return std::array::from_fn(|a| center[a] + radius * v[a]);
        }
    }
}

fn element_for(flags: ChemFlags) -> &'static str {
    if flags.contains(ChemFlags::HB_ACCEPTOR) {
        "O"
    } else if flags.contains(ChemFlags::HB_DONOR) {
        "N"
    } else {
        "C"
    }
}

/// Generate a protein-like blob of `n_atoms` atoms with a spherical cavity
/// opening on its surface, plus a ligand inside the cavity. The ligand region
/// is voxelized on the grid `grid` lays over the structure.
pub fn synth_protein(seed: u64, n_atoms: usize, pocket: &PocketSpec, grid: &GridConfig) -> Result<SyntheticComplex> {
    if n_atoms < 10 {
        return Err(Error::domain(format!("need at least 10 atoms, got {n_atoms}")));
    }
    let p = pocket;
    if !(p.radius.is_finite() && p.radius > 0.0) {
        return Err(Error::domain("cavity radius must be positive"));
    }
    if !(p.density.is_finite() && p.density > 0.0) {
        return Err(Error::domain("atom density must be positive"));
    }
    if !(p.depth.is_finite() && p.depth >= 0.0 && p.lining.is_finite() && p.lining > 0.0) {
        return Err(Error::domain("cavity depth must be >= 0 and lining > 0"));
    }
    if !(0.0..1.0).contains(&p.lining_share) {
        return Err(Error::domain("lining share must lie in [0,1)"));
    }
    if p.ligand_atoms == 0 || !(p.ligand_spread >= 0.0 && p.ligand_spread < p.radius) {
        return Err(Error::domain("ligand needs >= 1 atom spread less than the cavity radius"));
    }
    // room for the atoms plus the part of the cavity inside the blob
    let volume = n_atoms as f64 / p.density + 2.0 / 3.0 * PI * p.radius.powi(3);
    let blob_radius = (3.0 * volume / (4.0 * PI)).cbrt();
    if p.radius >= blob_radius || p.depth >= blob_radius {
        return Err(Error::domain(format!(
            "cavity (radius {}, depth {}) does not fit a blob of radius {blob_radius:.2}",
            p.radius, p.depth
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
    let dir = unit_vector(&mut rng);
    let cavity: [f64; 3] = std::array::from_fn(|a| center[a] + dir[a] * (blob_radius - p.depth));

    let cavity2 = p.radius * p.radius;
    let lining2 = (p.radius + p.lining).powi(2);
    let blob2 = blob_radius * blob_radius;
    let n_lining = (p.lining_share * n_atoms as f64).round() as usize;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n_atoms);
    let mut tries = 0;
    let sep2 = MIN_SEPARATION * MIN_SEPARATION;
    while positions.len() < n_atoms {
        tries += 1;
        if tries > MAX_PLACEMENT_TRIES {
            return Err(Error::domain("could not pack the requested atoms; lower the density"));
        }
        let q = if positions.len() < n_lining {
            let q = in_ball(&mut rng, cavity, p.radius + p.lining);
            if dist2(q, center) > blob2 {
                continue;
            }
            q
        } else {
            let q = in_ball(&mut rng, center, blob_radius);
            if dist2(q, cavity) < lining2 {
                continue;
            }
            q
        };
        if dist2(q, cavity) < cavity2 || positions.iter().any(|&o| dist2(o, q) < sep2) {
            continue;
        }
        positions.push(q);
    }

    let atoms = positions
        .into_iter()
        .map(|pos| {
            let lining = dist2(pos, cavity) < lining2;
            let (flags, charge) = match p.flags {
                FlagScheme::Bare => (ChemFlags::NONE, 0.0),
                FlagScheme::LiningOnly(f) => (if lining { f } else { ChemFlags::NONE }, 0.0),
                FlagScheme::Realistic if lining => {
                    let mut f = ChemFlags::LIPOPHILIC;
                    if rng.random_bool(0.7) {
                        f |= ChemFlags::POLAR;
                    }
                    if rng.random_bool(0.3) {
                        f |= ChemFlags::HB_ACCEPTOR;
                    }
                    (f, 0.0)
                }
                FlagScheme::Realistic => {
                    let mut f = ChemFlags::NONE;
                    if rng.random_bool(0.8) {
                        f |= ChemFlags::HYDROPHILIC;
                    }
                    if rng.random_bool(0.1) {
                        f |= ChemFlags::POLAR;
                    }
                    if rng.random_bool(0.2) {
                        f |= ChemFlags::HB_DONOR;
                    }
                    let q = if rng.random_bool(0.4) {
                        rng.random_range(-0.6..0.6)
                    } else {
                        0.0
                    };
                    (f, q)
                }
            };
            Atom {
                element: element_for(flags).to_string(),
                position: pos,
                partial_charge: charge,
                flags,
            }
        })
        .collect();
    let structure = AtomicStructure::new(format!("synth_{seed}"), atoms)?;

    let mut ligand = vec![cavity];
    while ligand.len() < p.ligand_atoms {
        ligand.push(in_ball(&mut rng, cavity, p.ligand_spread));
    }
    let spec = grid.grid_for(&structure)?;
    let region = LigandRegion::from_atoms(&ligand, &spec, p.ligand_radius)?;
    Ok(SyntheticComplex {
        structure,
        ligand,
        cavity_center: cavity,
        grid: spec,
        region,
    })
}

/// Random walk: every coordinate of every atom moves by an independent
/// uniform step in `[-step_scale, step_scale]` between consecutive frames.
pub fn synth_trajectory(base: &AtomicStructure, seed: u64, frames: usize, step_scale: f64) -> Result<Trajectory> {
    if frames < 2 {
        return Err(Error::domain(format!("need at least 2 frames, got {frames}")));
    }
    if !(step_scale.is_finite() && step_scale >= 0.0) {
        return Err(Error::domain(format!("step scale must be >= 0, got {step_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frames);
    out.push(base.clone());
    for _ in 1..frames {
        let prev = out.last().expect("non-empty");
        let next = if step_scale == 0.0 {
            prev.clone()
        } else {
            let atoms = prev
                .atoms()
                .iter()
                .map(|a| Atom {
                    position: std::array::from_fn(|i| a.position[i] + rng.random_range(-step_scale..=step_scale)),
                    ..a.clone()
                })
                .collect();
            AtomicStructure::new(base.id(), atoms)?
        };
        out.push(next);
    }
    Trajectory::new(base.id(), out, 1.0)
}
