//! Fitting the 17 parameters by Nelder–Mead on an unconstrained encoding.
//!
//! The encoding is `ln σ` per channel, free logits for the weights (softmax
//! back to the simplex) and the logit of θ. Every decoded point is a valid
//! [`GeneoParams`], so constraints hold at every iterate.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geneo::{volumetric_accuracy, Connectivity, DetectorConfig, GeneoParams, PreparedInput};
use crate::ingest::{AtomicStructure, LigandRegion};
use crate::potentials::CHANNEL_COUNT;

pub const DIM: usize = 2 * CHANNEL_COUNT + 1;

const SIGMA_RANGE: (f64, f64) = (1e-3, 1e3);
const THETA_RANGE: (f64, f64) = (1e-9, 1.0 - 1e-9);
const ALPHA_FLOOR: f64 = 1e-300;

// Initial simplex edge per coordinate block. θ steps downward: from the
// default guess, lower thresholds are where pockets start to appear.
const SIGMA_STEP: f64 = 0.5;
const ALPHA_STEP: f64 = 1.0;
const THETA_STEP: f64 = -1.5;

/// Unconstrained coordinates of `p`.
pub fn encode(p: &GeneoParams) -> [f64; DIM] {
    let mut x = [0.0; DIM];
    for i in 0..CHANNEL_COUNT {
        x[i] = p.sigma()[i].ln();
    }
    let logs: Vec<f64> = p.alpha().iter().map(|a| a.max(ALPHA_FLOOR).ln()).collect();
    let mean = logs.iter().sum::<f64>() / CHANNEL_COUNT as f64;
    for i in 0..CHANNEL_COUNT {
        x[CHANNEL_COUNT + i] = logs[i] - mean;
    }
    let t = p.theta();
    x[DIM - 1] = (t / (1.0 - t)).ln();
    x
}

/// Valid parameters for any finite `x`.
pub fn decode(x: &[f64; DIM]) -> Result<GeneoParams> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite optimizer coordinate".into()));
    }
    let sigma: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| x[i].exp().clamp(SIGMA_RANGE.0, SIGMA_RANGE.1));
    let logits = &x[CHANNEL_COUNT..2 * CHANNEL_COUNT];
    let top = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let w: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
    let sum: f64 = w.iter().sum();
    let alpha: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| w[i] / sum);
    let theta = (1.0 / (1.0 + (-x[DIM - 1]).exp())).clamp(THETA_RANGE.0, THETA_RANGE.1);
    GeneoParams::normalized(sigma, alpha, theta)
}

/// A structure with its prepared potentials and ground truth.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub input: PreparedInput,
    pub truth: LigandRegion,
}

impl TrainItem {
    /// Potentials are computed on the ligand region's grid.
    pub fn new(structure: &AtomicStructure, truth: LigandRegion, config: &DetectorConfig) -> Result<Self> {
        let input = PreparedInput::new(structure, truth.mask.spec(), &config.potentials)?;
        Ok(TrainItem { input, truth })
    }
}

pub fn prepare(trainset: &[(AtomicStructure, LigandRegion)], config: &DetectorConfig) -> Result<Vec<TrainItem>> {
    trainset
        .par_iter()
        .map(|(s, r)| TrainItem::new(s, r.clone(), config))
        .collect()
}

/// Mean volumetric accuracy over the items.
pub fn objective(params: &GeneoParams, items: &[TrainItem], connectivity: Connectivity) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::domain("empty training set"));
    }
    let acc: Vec<f64> = items
        .par_iter()
        .map(|it| volumetric_accuracy(&it.input.predict(params, connectivity)?, &it.truth))
        .collect::<Result<_>>()?;
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numerical("objective is not finite".into()));
    }
    Ok(mean)
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub initial_params: GeneoParams,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub trainset: Vec<(AtomicStructure, LigandRegion)>,
    pub detector: DetectorConfig,
}

impl TrainConfig {
    pub fn new(trainset: Vec<(AtomicStructure, LigandRegion)>) -> Self {
        TrainConfig {
            initial_params: GeneoParams::initial_guess(),
            max_iters: 200,
            tolerance: 1e-6,
            seed: 0,
            trainset,
            detector: DetectorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trainset.is_empty() {
            return Err(Error::domain("training set is empty"));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub params: GeneoParams,
    /// Best objective so far after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
}

impl TrainResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective\n");
        for (i, v) in self.objective_trace.iter().enumerate() {
            let _ = writeln!(out, "{},{v:?}", i + 1);
        }
        out
    }
}

pub fn fit(config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    let items = prepare(&config.trainset, &config.detector)?;
    fit_prepared(config, &items)
}

/// [`fit`] on items prepared once; `config.trainset` is ignored.
pub fn fit_prepared(config: &TrainConfig, items: &[TrainItem]) -> Result<TrainResult> {
    if items.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    let conn = config.detector.connectivity;
    let mut evaluations = 0usize;
    // minimize the negated objective
    let mut eval = |x: &[f64; DIM]| -> Result<f64> {
        evaluations += 1;
        Ok(-objective(&decode(x)?, items, conn)?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x0 = encode(&config.initial_params);
    let initial_objective = objective(&decode(&x0)?, items, conn)?;
    let mut simplex: Vec<([f64; DIM], f64)> = vec![(x0, -initial_objective)];
    for d in 0..DIM {
        let step = match d {
            _ if d < CHANNEL_COUNT => SIGMA_STEP,
            _ if d < 2 * CHANNEL_COUNT => ALPHA_STEP,
            _ => THETA_STEP,
        };
        let mut x = x0;
        x[d] += step * rng.random_range(0.75..1.25);
        let f = eval(&x)?;
        simplex.push((x, f));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        // stable: ties keep the older vertex first
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        nelder_mead_step(&mut simplex, &mut eval)?;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(-simplex[0].1);
        if converged(&simplex, config.tolerance) {
            break;
        }
    }
    let (best, f) = simplex[0];
    Ok(TrainResult {
        params: decode(&best)?,
        objective_trace: trace,
        iterations,
        evaluations: evaluations + 1,
        initial_objective,
        final_objective: -f,
    })
}

fn converged(simplex: &[([f64; DIM], f64)], tol: f64) -> bool {
    let spread = simplex[simplex.len() - 1].1 - simplex[0].1;
    let best = &simplex[0].0;
    let size = simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max);
    spread <= tol && size <= tol.sqrt()
}

/// One iteration on a simplex sorted best first.
fn nelder_mead_step(
    simplex: &mut [([f64; DIM], f64)],
    eval: &mut impl FnMut(&[f64; DIM]) -> Result<f64>,
) -> Result<()> {
    let n = DIM;
    let mut c = [0.0; DIM];
    for (x, _) in &simplex[..n] {
        for d in 0..DIM {
            c[d] += x[d];
        }
    }
    for v in &mut c {
        *v /= n as f64;
    }
    let toward = |from: &[f64; DIM], coef: f64| -> [f64; DIM] { std::array::from_fn(|d| c[d] + coef * (from[d] - c[d])) };
    let (worst, fw) = simplex[n];
    let (f_best, f_second) = (simplex[0].1, simplex[n - 1].1);

    let xr = toward(&worst, -1.0);
    let fr = eval(&xr)?;
    if fr < f_best {
        let xe = toward(&worst, -2.0);
        let fe = eval(&xe)?;
        simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        return Ok(());
    }
    if fr < f_second {
        simplex[n] = (xr, fr);
        return Ok(());
    }
    if fr < fw {
        let xc = toward(&xr, 0.5);
        let fc = eval(&xc)?;
        if fc <= fr {
            simplex[n] = (xc, fc);
            return Ok(());
        }
    } else {
        let xc = toward(&worst, 0.5);
        let fc = eval(&xc)?;
        if fc < fw {
            simplex[n] = (xc, fc);
            return Ok(());
        }
    }
    let best = simplex[0].0;
    for v in simplex[1..].iter_mut() {
        let x: [f64; DIM] = std::array::from_fn(|d| best[d] + 0.5 * (v.0[d] - best[d]));
        *v = (x, eval(&x)?);
    }
    Ok(())
}
