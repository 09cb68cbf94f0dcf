//! Minimal importer for fixed-column PDB `ATOM`/`HETATM` records.
//!
//! Only serial, atom name, residue name, coordinates and element are read.
//! Alternate locations other than blank/`A`, insertion codes and multi-model
//! files are not handled beyond keeping the first `MODEL`.

use super::{chem_flags_for, Atom, AtomicStructure};
use crate::error::{Error, Result};

const WATER: [&str; 3] = ["HOH", "WAT", "DOD"];

fn column(line: &str, from: usize, to: usize) -> &str {
    let end = to.min(line.len());
    if from > end {
        return "";
    }
    line.get(from - 1..end).unwrap_or("").trim()
}

fn coord(line: &str, n: usize, from: usize, to: usize) -> Result<f64> {
    let tok = column(line, from, to);
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(n, format!("bad coordinate `{tok}` in columns {from}-{to}")))
}

/// Returns the protein (`ATOM` records) and the positions of non-water
/// `HETATM` records as ligand atoms.
pub fn import_pdb(text: &str, id: &str) -> Result<(AtomicStructure, Vec<[f64; 3]>)> {
    let mut atoms = Vec::new();
    let mut ligand = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        let record = column(line, 1, 6);
        if record != "ATOM" && record != "HETATM" {
            continue;
        }
        let altloc = column(line, 17, 17);
        if !(altloc.is_empty() || altloc == "A") {
            continue;
        }
        let residue = column(line, 18, 20);
        let position = [coord(line, n, 31, 38)?, coord(line, n, 39, 46)?, coord(line, n, 47, 54)?];
        let mut element = column(line, 77, 78).to_string();
        if element.is_empty() {
            // fall back to the first letter of the atom name
            element = column(line, 13, 16)
                .chars()
                .find(|c| c.is_ascii_alphabetic())
                .map(String::from)
                .unwrap_or_default();
        }
        if record == "HETATM" {
            if !WATER.contains(&residue) {
                ligand.push(position);
            }
            continue;
        }
        let flags = chem_flags_for(&element, Some(residue));
        atoms.push(Atom {
            element,
            position,
            partial_charge: 0.0,
            flags,
        });
    }
    Ok((AtomicStructure::new(id, atoms)?, ligand))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ChemFlags;

    const SAMPLE: &str = "\
HEADER    TEST
ATOM      1  N   ALA A   1      11.104   6.134  -6.504  1.00  0.00           N
ATOM      2  CA  ALA A   1      11.639   6.071  -5.147  1.00  0.00           C
ATOM      3  CB  SER A   2      12.000   7.000  -4.000  1.00  0.00           C
HETATM    4  C1  LIG A 100       1.000   2.000   3.000  1.00  0.00           C
HETATM    5  O   HOH A 200       9.000   9.000   9.000  1.00  0.00           O
END
";

    #[test]
    fn reads_atoms_and_ligand() {
        let (s, lig) = import_pdb(SAMPLE, "t").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.atoms()[1].position, [11.639, 6.071, -5.147]);
        assert_eq!(s.atoms()[1].flags, ChemFlags::LIPOPHILIC);
        assert_eq!(s.atoms()[2].flags, ChemFlags::HYDROPHILIC);
        assert_eq!(lig, vec![[1.0, 2.0, 3.0]]);
    }

    #[test]
    fn bad_coordinate() {
        let bad = "ATOM      1  N   ALA A   1      11.1x4   6.134  -6.504  1.00  0.00           N\n";
        assert!(matches!(import_pdb(bad, "t"), Err(Error::Parse { line: 1, .. })));
        assert!(import_pdb("HEADER\n", "t").is_err());
    }
}
