//! Overlap between pockets predicted before and after a rigid rotation, and
//! Wald intervals for the proportion of overlaps above a threshold.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::fmt_opt;
use crate::error::{Error, Result};
use crate::geneo::PocketDetector;
use crate::grid::{overlap_fraction, rotate_mask, GridConfig, Rotation, VoxelMask};
use crate::ingest::AtomicStructure;

pub const CONFIDENCE: f64 = 0.99;

/// Two-sided normal quantile for `confidence`; 2.5758... at 99%.
pub fn wald_z(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wald {
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wald interval around `p_hat` from `n` observations. The variance uses the
/// `n - 1` denominator, which is what reproduces the published table rows.
/// The interval is not truncated to `[0,1]`.
pub fn wald(p_hat: f64, n: usize, confidence: f64) -> Result<Wald> {
    if n == 0 {
        return Err(Error::domain("no observations"));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::domain(format!("proportion {p_hat} outside [0,1]")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!("confidence {confidence} outside (0,1)")));
    }
    let se = if n == 1 { 0.0 } else { (p_hat * (1.0 - p_hat) / (n - 1) as f64).sqrt() };
    let half = wald_z(confidence) * se;
    Ok(Wald {
        se,
        ci_low: p_hat - half,
        ci_high: p_hat + half,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub method: String,
    /// 1-based pocket rank
    pub rank: usize,
    pub n_nonmissing: usize,
    pub successes: usize,
    /// `None` when every overlap is missing.
    pub p_hat: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub tau: f64,
}

impl ProportionEstimate {
    pub fn from_counts(method: &str, rank: usize, tau: f64, n: usize, successes: usize) -> Result<Self> {
        if successes > n {
            return Err(Error::domain(format!("{successes} successes out of {n}")));
        }
        check_tau(tau)?;
        let (p_hat, w) = if n == 0 {
            (None, None)
        } else {
            let p = successes as f64 / n as f64;
            (Some(p), Some(wald(p, n, CONFIDENCE)?))
        };
        Ok(ProportionEstimate {
            method: method.to_string(),
            rank,
            n_nonmissing: n,
            successes,
            p_hat,
            se: w.map(|w| w.se),
            ci_low: w.map(|w| w.ci_low),
            ci_high: w.map(|w| w.ci_high),
            tau,
        })
    }

    pub fn is_defined(&self) -> bool {
        self.p_hat.is_some()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("tau must lie in (0,1], got {tau}")))
    }
}

/// Share of non-missing overlaps that reach `tau`.
pub fn proportion(method: &str, rank: usize, overlaps: &[Option<f64>], tau: f64) -> Result<ProportionEstimate> {
    let present: Vec<f64> = overlaps.iter().flatten().copied().collect();
    let hits = present.iter().filter(|&&o| o >= tau).count();
    ProportionEstimate::from_counts(method, rank, tau, present.len(), hits)
}

/// Overlaps of one protein under one rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProteinOverlaps {
    pub protein: String,
    /// index into [`Rotation::all`] order, or the caller's list
    pub rotation: usize,
    /// Global masks; `None` when the unrotated prediction is empty.
    pub global: Option<f64>,
    /// Per rank; `None` when either side lacks that pocket.
    pub ranks: Vec<Option<f64>>,
}

fn overlap_or_missing(reference: Option<&VoxelMask>, other: Option<&VoxelMask>) -> Result<Option<f64>> {
    match (reference, other) {
        (Some(a), Some(b)) if !a.is_empty() => Ok(Some(overlap_fraction(a, b)?)),
        _ => Ok(None),
    }
}

/// For each protein: predict on the snapped structure and on its rotated
/// copies (about the grid center, same cube grid), map the rotated pockets
/// back and compare with the unrotated ones. Results are protein-major.
pub fn equivariance_overlaps(
    detector: &dyn PocketDetector,
    proteins: &[AtomicStructure],
    grid: &GridConfig,
    rotations: &[Rotation],
    max_rank: usize,
) -> Result<Vec<ProteinOverlaps>> {
    if proteins.is_empty() {
        return Err(Error::domain("no proteins"));
    }
    let per_protein: Vec<Vec<ProteinOverlaps>> = proteins
        .par_iter()
        .map(|raw| {
            let s = raw.snapped();
            let spec = grid.grid_for(&s)?;
            if !spec.is_cube() {
                return Err(Error::domain("equivariance needs a cube grid"));
            }
            let base = detector.detect(&s, &spec)?;
            rotations
                .par_iter()
                .enumerate()
                .map(|(ri, &rot)| {
                    let moved = detector.detect(&s.rotated(rot, spec.center()), &spec)?;
                    let back = rot.inverse();
                    let global_back = rotate_mask(&moved.global_mask, back)?;
                    let global = overlap_or_missing(Some(&base.global_mask), Some(&global_back))?;
                    let ranks = (1..=max_rank)
                        .map(|j| {
                            let other = moved.pocket(j).map(|p| rotate_mask(&p.mask, back)).transpose()?;
                            overlap_or_missing(base.pocket(j).map(|p| &p.mask), other.as_ref())
                        })
                        .collect::<Result<_>>()?;
                    Ok(ProteinOverlaps {
                        protein: s.id().to_string(),
                        rotation: ri,
                        global,
                        ranks,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_protein.into_iter().flatten().collect())
}

/// One rotation, one threshold: an estimate per requested rank.
pub fn equivariance_proportions(
    detector: &dyn PocketDetector,
    proteins: &[AtomicStructure],
    grid: &GridConfig,
    tau: f64,
    rotation: Rotation,
    ranks: &[usize],
) -> Result<Vec<ProportionEstimate>> {
    check_tau(tau)?;
    if let Some(&j) = ranks.iter().find(|&&j| !(1..=3).contains(&j)) {
        return Err(Error::domain(format!("pocket rank must be 1, 2 or 3, got {j}")));
    }
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    let overlaps = equivariance_overlaps(detector, proteins, grid, &[rotation], max_rank)?;
    equivariance_table(detector.name(), &overlaps, &[tau], ranks)
}

/// Estimates for every `(tau, rank)` over all collected overlaps,
/// tau-major then rank order.
pub fn equivariance_table(
    method: &str,
    overlaps: &[ProteinOverlaps],
    taus: &[f64],
    ranks: &[usize],
) -> Result<Vec<ProportionEstimate>> {
    let mut out = Vec::new();
    for &tau in taus {
        for &j in ranks {
            let series: Vec<Option<f64>> = overlaps
                .iter()
                .map(|o| o.ranks.get(j - 1).copied().flatten())
                .collect();
            out.push(proportion(method, j, &series, tau)?);
        }
    }
    Ok(out)
}

pub fn equivariance_table_csv(rows: &[ProportionEstimate]) -> String {
    let mut out = String::from("method,pocket,n_nonmissing,p_hat,se,ci_low,ci_high,tau\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:?}",
            r.method,
            r.rank,
            r.n_nonmissing,
            fmt_opt(r.p_hat),
            fmt_opt(r.se),
            fmt_opt(r.ci_low),
            fmt_opt(r.ci_high),
            r.tau
        );
    }
    out
}
