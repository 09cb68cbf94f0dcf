//! Native line-oriented structure and trajectory formats.
//!
//! ```text
//! # comment
//! ID 1abc_A
//! ATOM <serial> <element> <x> <y> <z> [charge] [flags]
//! HETATM <serial> <element> <x> <y> <z>        (ligand atoms, complexes only)
//! ```
//!
//! `flags` is a comma-separated subset of `lipophilic,hydrophilic,polar,hb_acceptor,hb_donor`
//! or `-` for none; when omitted the element lookup table applies.
//! Trajectories add an optional `TIME_DELTA <ps>` header and open each frame with `FRAME <t>`.

use std::fmt::Write as _;

use super::{chem_flags_for, Atom, AtomicStructure, ChemFlags, Trajectory};
use crate::error::{Error, Result};

const DEFAULT_ID: &str = "structure";

fn parse_f64(line: usize, tok: &str, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("{what} `{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} `{tok}` is not finite")));
    }
    Ok(v)
}

/// Fields of an `ATOM`/`HETATM` record after the keyword.
fn parse_atom_record(line: usize, toks: &[&str]) -> Result<Atom> {
    if toks.len() < 5 || toks.len() > 7 {
        return Err(Error::parse(
            line,
            "atom record needs `<serial> <element> <x> <y> <z> [charge] [flags]`",
        ));
    }
    toks[0]
        .parse::<u64>()
        .map_err(|_| Error::parse(line, format!("serial `{}` is not an integer", toks[0])))?;
    let element = toks[1].to_string();
    let position = [
        parse_f64(line, toks[2], "x coordinate")?,
        parse_f64(line, toks[3], "y coordinate")?,
        parse_f64(line, toks[4], "z coordinate")?,
    ];
    let mut partial_charge = 0.0;
    let mut flags = None;
    match &toks[5..] {
        [] => {}
        [one] => match one.parse::<f64>() {
            Ok(q) if q.is_finite() => partial_charge = q,
            _ => flags = Some(ChemFlags::parse_list(one).map_err(|m| Error::parse(line, m))?),
        },
        [q, f] => {
            partial_charge = parse_f64(line, q, "charge")?;
            flags = Some(ChemFlags::parse_list(f).map_err(|m| Error::parse(line, m))?);
        }
        _ => unreachable!(),
    }
    let flags = flags.unwrap_or_else(|| chem_flags_for(&element, None));
    Ok(Atom {
        element,
        position,
        partial_charge,
        flags,
    })
}

struct Parsed {
    id: Option<String>,
    atoms: Vec<Atom>,
    ligand: Vec<[f64; 3]>,
}

fn parse_records(text: &str, allow_ligand: bool) -> Result<Parsed> {
    let mut out = Parsed {
        id: None,
        atoms: Vec::new(),
        ligand: Vec::new(),
    };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        match toks[0] {
            "ID" if toks.len() == 2 => out.id = Some(toks[1].to_string()),
            "ID" => return Err(Error::parse(line, "ID record takes exactly one token")),
            "ATOM" => out.atoms.push(parse_atom_record(line, &toks[1..])?),
            "HETATM" if allow_ligand => out.ligand.push(parse_atom_record(line, &toks[1..])?.position),
            other => return Err(Error::parse(line, format!("unknown record `{other}`"))),
        }
    }
    if out.atoms.is_empty() {
        return Err(Error::domain("structure file contains no ATOM records"));
    }
    Ok(out)
}

pub fn parse_structure(text: &str) -> Result<AtomicStructure> {
    let p = parse_records(text, false)?;
    AtomicStructure::new(p.id.unwrap_or_else(|| DEFAULT_ID.into()), p.atoms)
}

/// A structure plus the coordinates of its `HETATM` ligand atoms.
pub fn parse_complex(text: &str) -> Result<(AtomicStructure, Vec<[f64; 3]>)> {
    let p = parse_records(text, true)?;
    let s = AtomicStructure::new(p.id.unwrap_or_else(|| DEFAULT_ID.into()), p.atoms)?;
    Ok((s, p.ligand))
}

fn write_atoms(out: &mut String, atoms: &[Atom]) {
    for (n, a) in atoms.iter().enumerate() {
        let [x, y, z] = a.position;
        let _ = writeln!(
            out,
            "ATOM {} {} {x:?} {y:?} {z:?} {:?} {}",
            n + 1,
            a.element,
            a.partial_charge,
            a.flags
        );
    }
}

pub fn write_structure(structure: &AtomicStructure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ID {}", structure.id());
    write_atoms(&mut out, structure.atoms());
    out
}

pub fn write_complex(structure: &AtomicStructure, ligand: &[[f64; 3]]) -> String {
    let mut out = write_structure(structure);
    for (n, [x, y, z]) in ligand.iter().enumerate() {
        let _ = writeln!(out, "HETATM {} C {x:?} {y:?} {z:?}", n + 1);
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut id: Option<String> = None;
    let mut time_delta = 1.0;
    let mut frames: Vec<Vec<Atom>> = Vec::new();
    let mut last_t: Option<i64> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        match (toks[0], toks.len()) {
            ("ID", 2) => id = Some(toks[1].to_string()),
            ("TIME_DELTA", 2) if frames.is_empty() => time_delta = parse_f64(line, toks[1], "time delta")?,
            ("FRAME", 2) => {
                let ft: i64 = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(line, format!("frame index `{}` is not an integer", toks[1])))?;
                if last_t.is_some_and(|prev| ft <= prev) {
                    return Err(Error::parse(line, "frame indices must increase"));
                }
                last_t = Some(ft);
                frames.push(Vec::new());
            }
            ("ATOM", _) => {
                let atom = parse_atom_record(line, &toks[1..])?;
                frames
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, "ATOM record before the first FRAME"))?
                    .push(atom);
            }
            (other, _) => return Err(Error::parse(line, format!("unexpected record `{other}`"))),
        }
    }
    let id = id.unwrap_or_else(|| DEFAULT_ID.into());
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(t, atoms)| {
            AtomicStructure::new(id.clone(), atoms)
                .map_err(|_| Error::domain(format!("frame {} has no atoms", t + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(id, frames, time_delta)
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ID {}", traj.structure_id());
    let _ = writeln!(out, "TIME_DELTA {:?}", traj.time_delta());
    for (t, frame) in traj.frames().iter().enumerate() {
        let _ = writeln!(out, "FRAME {}", t + 1);
        write_atoms(&mut out, frame.atoms());
    }
    out
}
