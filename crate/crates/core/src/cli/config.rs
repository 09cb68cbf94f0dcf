//! Run configuration: a flat `key = value` map layered as built-in defaults,
//! command defaults, preset, config file, then `--set` flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridConfig, DEFAULT_PADDING};
use crate::ingest::{ChemFlags, FlagScheme};

/// `(key, default, description)`; the README table is generated from this.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed for every random choice of the run"),
    ("params", "table1", "parameter file, or `table1` for the built-in optimum"),
    ("connectivity", "6", "pocket connectivity, 6 or 26"),
    ("grid.spacing", "1", "voxel edge in Å"),
    ("grid.padding", "5", "clearance between atoms and grid faces in Å"),
    ("grid.cube", "true", "pad grids to cubes"),
    ("grid.min_dim", "1", "smallest cube edge in voxels"),
    ("inputs", "", "comma-separated structure/complex files; empty means synthetic"),
    ("synth.count", "8", "number of synthetic complexes"),
    ("synth.atoms", "150", "atoms per synthetic complex"),
    ("synth.flags", "realistic", "`realistic`, `bare` or `lining:<flag>[,<flag>]`"),
    ("train.max_iters", "150", "Nelder-Mead iteration budget"),
    ("train.tolerance", "1e-6", "convergence tolerance"),
    ("sensitivity.repetitions", "8", "training repetitions"),
    ("sensitivity.subset", "4", "complexes drawn per repetition"),
    ("equivariance.taus", "0.5,0.75,0.95,0.99", "overlap thresholds, one table each"),
    ("equivariance.ranks", "1,2,3", "pocket ranks to compare"),
    ("equivariance.rotations", "all", "`all` or comma-separated indices 0..23"),
    ("robustness.frames", "10", "frames T used from each trajectory"),
    ("robustness.step_a", "0.5", "step scale of synthetic series a, Å"),
    ("robustness.step_b", "0.05", "step scale of synthetic series b, Å"),
    ("robustness.trajectories_a", "", "comma-separated trajectory files for series a"),
    ("robustness.trajectories_b", "", "comma-separated trajectory files for series b"),
];

/// Per-command overrides of [`KEYS`] defaults.
fn command_defaults(command: &str) -> &'static [(&'static str, &'static str)] {
    match command {
        "equivariance" => &[("grid.min_dim", "48"), ("synth.count", "20"), ("synth.atoms", "120")],
        "robustness" => &[("synth.count", "3")],
        "sensitivity" => &[("synth.flags", "lining:lipophilic")],
        _ => &[],
    }
}

pub const PRESETS: &[(&str, &str, &[(&str, &str)])] = &[
    ("table1", "published optimum parameters", &[("params", "table1")]),
    (
        "equi-tau95",
        "single equivariance table at τ = 0.95 on 48³ grids",
        &[("params", "table1"), ("equivariance.taus", "0.95"), ("grid.min_dim", "48")],
    ),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        Err(Error::domain(format!("unknown config key `{key}`")))
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::parse(n + 1, "expected `key = value`"))?;
        let k = k.trim().to_string();
        if out.iter().any(|(o, _)| *o == k) {
            return Err(Error::parse(n + 1, format!("duplicate key `{k}`")));
        }
        check_key(&k).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults for `command`.
    pub fn for_command(command: &str) -> Self {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        for (k, v) in command_defaults(command) {
            values.insert(k.to_string(), v.to_string());
        }
        RunConfig { values }
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let (_, _, pairs) = PRESETS
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| Error::domain(format!("unknown preset `{name}`")))?;
        for (k, v) in *pairs {
            self.values.insert(k.to_string(), v.to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| Error::domain(format!("config `{key}`: cannot read `{raw}`")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::domain(format!("config `{key}`: cannot read `{s}`")))
            })
            .collect()
    }

    pub fn grid(&self) -> Result<GridConfig> {
        let g = GridConfig {
            spacing: self.get("grid.spacing")?,
            padding: self.get("grid.padding")?,
            cube: self.get("grid.cube")?,
            min_dim: self.get("grid.min_dim")?,
        };
        if !(g.spacing.is_finite() && g.spacing > 0.0) {
            return Err(Error::domain("grid.spacing must be positive"));
        }
        if !(g.padding.is_finite() && g.padding >= 0.0) {
            return Err(Error::domain(format!("grid.padding must be >= 0 (default {DEFAULT_PADDING})")));
        }
        Ok(g)
    }

    pub fn flag_scheme(&self) -> Result<FlagScheme> {
        let raw = self.raw("synth.flags");
        match raw {
            "realistic" => Ok(FlagScheme::Realistic),
            "bare" => Ok(FlagScheme::Bare),
            _ => {
                let list = raw
                    .strip_prefix("lining:")
                    .ok_or_else(|| Error::domain(format!("synth.flags: unknown scheme `{raw}`")))?;
                let flags = ChemFlags::parse_list(list)
                    .map_err(|e| Error::domain(format!("synth.flags: {e}")))?;
                Ok(FlagScheme::LiningOnly(flags))
            }
        }
    }
}
