//! Repeated training on random subsets of a pool: how much do the fitted
//! parameters move with the training set?

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiveNumber;
use crate::error::{Error, Result};
use crate::geneo::GeneoParams;
use crate::ingest::{AtomicStructure, LigandRegion};
use crate::train::{fit_prepared, prepare, TrainConfig, TrainItem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySample {
    pub repetition: usize,
    /// Pool indices, ascending.
    pub subset: Vec<usize>,
    pub params: GeneoParams,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub repetitions: usize,
    pub subset_size: usize,
    pub seed: u64,
    pub samples: Vec<SensitivitySample>,
    /// `(repetition, error message)` for repetitions whose training failed.
    pub failed: Vec<(usize, String)>,
    /// Per parameter in [`GeneoParams::names`] order; empty if all failed.
    pub summaries: Vec<(String, FiveNumber)>,
}

impl SensitivityReport {
    /// `repetition,parameter,value`, one row per parameter per sample.
    pub fn long_csv(&self) -> String {
        let names = GeneoParams::names();
        let mut out = String::from("repetition,parameter,value\n");
        for s in &self.samples {
            for (n, v) in names.iter().zip(s.params.to_vec()) {
                let _ = writeln!(out, "{},{n},{v:?}", s.repetition);
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("parameter,min,q1,median,q3,max\n");
        for (n, f) in &self.summaries {
            let _ = writeln!(out, "{n},{:?},{:?},{:?},{:?},{:?}", f.min, f.q1, f.median, f.q3, f.max);
        }
        out
    }
}

/// Each repetition draws `subset_size` pool items without replacement and
/// fits from `base.initial_params`. Repetition `r` uses stream `r` of a
/// generator seeded with `seed`, so results do not depend on scheduling.
/// `base.trainset` is ignored.
pub fn sensitivity(
    base: &TrainConfig,
    repetitions: usize,
    pool: &[(AtomicStructure, LigandRegion)],
    subset_size: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    if repetitions == 0 {
        return Err(Error::domain("repetitions must be at least 1"));
    }
    if subset_size == 0 || subset_size > pool.len() {
        return Err(Error::domain(format!("subset size {subset_size} must lie in 1..={}", pool.len())));
    }
    let items = prepare(pool, &base.detector)?;
    let runs: Vec<(usize, Result<SensitivitySample>)> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mut subset = sample(&mut rng, pool.len(), subset_size).into_vec();
            subset.sort_unstable();
            let chosen: Vec<TrainItem> = subset.iter().map(|&i| items[i].clone()).collect();
            let cfg = TrainConfig {
                seed: rng.random(),
                trainset: Vec::new(),
                ..base.clone()
            };
            let run = fit_prepared(&cfg, &chosen).map(|r| SensitivitySample {
                repetition: rep,
                subset,
                params: r.params,
                objective: r.final_objective,
                iterations: r.iterations,
            });
            (rep, run)
        })
        .collect();

    let mut samples = Vec::new();
    let mut failed = Vec::new();
    for (rep, run) in runs {
        match run {
            Ok(s) => samples.push(s),
            Err(e) => failed.push((rep, e.to_string())),
        }
    }
    let summaries = if samples.is_empty() {
        Vec::new()
    } else {
        let columns: Vec<Vec<f64>> = samples.iter().map(|s| s.params.to_vec()).collect();
        GeneoParams::names()
            .into_iter()
            .enumerate()
            .map(|(k, n)| {
                let col: Vec<f64> = columns.iter().map(|c| c[k]).collect();
                Ok((n, FiveNumber::of(&col)?))
            })
            .collect::<Result<_>>()?
    };
    Ok(SensitivityReport {
        repetitions,
        subset_size,
        seed,
        samples,
        failed,
        summaries,
    })
}
