//! Atomic structures, trajectories and ligand ground truth.

mod format;
mod pdb;
mod synth;

pub use format::{
    parse_complex, parse_structure, parse_trajectory, write_complex, write_structure, write_trajectory,
};
pub use pdb::import_pdb;
pub use synth::{synth_protein, synth_trajectory, FlagScheme, PocketSpec, SyntheticComplex};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Rotation, VoxelMask};

/// Coordinates snapped by [`AtomicStructure::snapped`] are multiples of `2^-LATTICE_BITS` Å.
pub const LATTICE_BITS: i32 = 16;

/// Default radius of the balls around ligand atoms that make up the ground-truth region.
pub const DEFAULT_LIGAND_RADIUS: f64 = 2.0;

/// Chemical properties an atom contributes to the property channels.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChemFlags(u8);

impl ChemFlags {
    pub const NONE: ChemFlags = ChemFlags(0);
    pub const LIPOPHILIC: ChemFlags = ChemFlags(1);
    pub const HYDROPHILIC: ChemFlags = ChemFlags(1 << 1);
    pub const POLAR: ChemFlags = ChemFlags(1 << 2);
    pub const HB_ACCEPTOR: ChemFlags = ChemFlags(1 << 3);
    pub const HB_DONOR: ChemFlags = ChemFlags(1 << 4);

    const NAMED: [(ChemFlags, &'static str); 5] = [
        (ChemFlags::LIPOPHILIC, "lipophilic"),
        (ChemFlags::HYDROPHILIC, "hydrophilic"),
        (ChemFlags::POLAR, "polar"),
        (ChemFlags::HB_ACCEPTOR, "hb_acceptor"),
        (ChemFlags::HB_DONOR, "hb_donor"),
    ];

    pub fn contains(self, other: ChemFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Parse a comma-separated list of flag names; `-` is the empty set.
    pub fn parse_list(s: &str) -> std::result::Result<ChemFlags, String> {
        if s == "-" {
            return Ok(ChemFlags::NONE);
        }
        let mut out = ChemFlags::NONE;
        for name in s.split(',') {
            let flag = ChemFlags::NAMED
                .iter()
                .find(|(_, n)| *n == name)
                .map(|(f, _)| *f)
                .ok_or_else(|| format!("unknown chemical flag `{name}`"))?;
            out |= flag;
        }
        Ok(out)
    }

    pub fn names(self) -> impl Iterator<Item = &'static str> {
        ChemFlags::NAMED
            .into_iter()
            .filter(move |(f, _)| self.contains(*f))
            .map(|(_, n)| n)
    }
}

impl std::ops::BitOr for ChemFlags {
    type Output = ChemFlags;
    fn bitor(self, rhs: ChemFlags) -> ChemFlags {
        ChemFlags(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for ChemFlags {
    fn bitor_assign(&mut self, rhs: ChemFlags) {
        self.0 |= rhs.0;
    }
}

impl fmt::Display for ChemFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let names: Vec<_> = self.names().collect();
        f.write_str(&names.join(","))
    }
}

impl fmt::Debug for ChemFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChemFlags({self})")
    }
}

const SIDECHAIN_POLAR_RESIDUES: [&str; 10] = ["ARG", "ASN", "ASP", "GLN", "GLU", "HIS", "LYS", "SER", "THR", "TYR"];

/// Heuristic flag table keyed by element, adjusted by residue name when known.
///
/// Carbon and sulfur are lipophilic except in residues with polar side chains,
/// where carbons count as hydrophilic instead. Nitrogen is a polar donor and
/// oxygen a polar acceptor; both are hydrophilic. Halogens are lipophilic.
pub fn chem_flags_for(element: &str, residue: Option<&str>) -> ChemFlags {
    let polar_residue = residue.is_some_and(|r| SIDECHAIN_POLAR_RESIDUES.contains(&r.to_ascii_uppercase().as_str()));
    match element.to_ascii_uppercase().as_str() {
        "C" if polar_residue => ChemFlags::HYDROPHILIC,
        "C" | "S" => ChemFlags::LIPOPHILIC,
        "N" => ChemFlags::POLAR | ChemFlags::HB_DONOR | ChemFlags::HYDROPHILIC,
        "O" => ChemFlags::POLAR | ChemFlags::HB_ACCEPTOR | ChemFlags::HYDROPHILIC,
        "P" => ChemFlags::POLAR | ChemFlags::HYDROPHILIC,
        "F" | "CL" | "BR" | "I" => ChemFlags::LIPOPHILIC,
        _ => ChemFlags::NONE,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    /// Å
    pub position: [f64; 3],
    /// elementary charges
    pub partial_charge: f64,
    pub flags: ChemFlags,
}

impl Atom {
    /// Atom with zero charge and flags from [`chem_flags_for`].
    pub fn new(element: impl Into<String>, position: [f64; 3]) -> Self {
        let element = element.into();
        let flags = chem_flags_for(&element, None);
        Atom {
            element,
            position,
            partial_charge: 0.0,
            flags,
        }
    }
}

/// A protein as an ordered list of atoms. Order is significant: RMSD pairs atoms by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicStructure {
    id: String,
    atoms: Vec<Atom>,
}

impl AtomicStructure {
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("a structure needs at least one atom"));
        }
        for (n, a) in atoms.iter().enumerate() {
            if a.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::domain(format!("atom {} has a non-finite coordinate", n + 1)));
            }
            if !a.partial_charge.is_finite() {
                return Err(Error::domain(format!("atom {} has a non-finite charge", n + 1)));
            }
        }
        Ok(AtomicStructure { id: id.into(), atoms })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> AtomicStructure {
        AtomicStructure {
            id: self.id.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    position: f(a.position),
                    ..a.clone()
                })
                .collect(),
        }
    }

    pub fn translated(&self, shift: [f64; 3]) -> AtomicStructure {
        self.map_positions(|p| std::array::from_fn(|a| p[a] + shift[a]))
    }

    /// Rigid rotation about `center`. Exact when coordinates and center lie on
    /// the `2^-LATTICE_BITS` Å lattice (see [`AtomicStructure::snapped`]).
    pub fn rotated(&self, rotation: Rotation, center: [f64; 3]) -> AtomicStructure {
        self.map_positions(|p| rotation.apply_point(p, center))
    }

    /// Coordinates rounded to the nearest multiple of `2^-LATTICE_BITS` Å.
    pub fn snapped(&self) -> AtomicStructure {
        self.map_positions(|p| p.map(snap))
    }
}

pub(crate) fn snap(x: f64) -> f64 {
    let s = 2f64.powi(LATTICE_BITS);
    (x * s).round() / s
}

/// An ordered sequence of frames of one structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    structure_id: String,
    frames: Vec<AtomicStructure>,
    time_delta: f64,
}

impl Trajectory {
    pub fn new(structure_id: impl Into<String>, frames: Vec<AtomicStructure>, time_delta: f64) -> Result<Self> {
        if !(time_delta.is_finite() && time_delta > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {time_delta}")));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::domain("a trajectory needs at least one frame"))?;
        for (t, frame) in frames.iter().enumerate().skip(1) {
            if frame.len() != first.len() {
                return Err(Error::domain(format!(
                    "frame {} has {} atoms but frame 1 has {}",
                    t + 1,
                    frame.len(),
                    first.len()
                )));
            }
            if frame
                .atoms()
                .iter()
                .zip(first.atoms())
                .any(|(a, b)| a.element != b.element)
            {
                return Err(Error::domain(format!("frame {} changes the element sequence", t + 1)));
            }
        }
        Ok(Trajectory {
            structure_id: structure_id.into(),
            frames,
            time_delta,
        })
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    pub fn frames(&self) -> &[AtomicStructure] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time between consecutive frames, in ps.
    pub fn time_delta(&self) -> f64 {
        self.time_delta
    }

    pub fn atom_count(&self) -> usize {
        self.frames[0].len()
    }
}

/// Ground-truth binding region: voxels within `radius` of a ligand atom, plus
/// the voxel containing each in-grid ligand atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LigandRegion {
    pub mask: VoxelMask,
}

impl LigandRegion {
    pub fn from_atoms(ligand: &[[f64; 3]], spec: &GridSpec, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::domain(format!("ligand radius must be >= 0, got {radius}")));
        }
        let h = spec.spacing();
        let dims = spec.dims();
        let r2 = radius * radius;
        let mut members = Vec::new();
        for p in ligand {
            if let Some(idx) = spec.voxel_containing(*p) {
                members.push(spec.linear(idx));
            }
            let o = spec.origin();
            let lo: [i64; 3] = std::array::from_fn(|a| (((p[a] - radius - o[a]) / h).floor() as i64).max(0));
            let hi: [i64; 3] =
                std::array::from_fn(|a| (((p[a] + radius - o[a]) / h).ceil() as i64).min(dims[a] as i64 - 1));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let idx = [i as usize, j as usize, k as usize];
                        let c = spec.voxel_center(idx);
                        let d2: f64 = (0..3).map(|a| (c[a] - p[a]).powi(2)).sum();
                        if d2 <= r2 {
                            members.push(spec.linear(idx));
                        }
                    }
                }
            }
        }
        Ok(LigandRegion {
            mask: VoxelMask::from_linear(*spec, members)?,
        })
    }
}
