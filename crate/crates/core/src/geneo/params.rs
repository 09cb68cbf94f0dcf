//! The 17 learnable parameters and their key-value file format.
//!
//! ```text
//! sigma.1 = 3.110
//! alpha.1 = 0.362
//! ...
//! theta = 0.756
//! ```
//!
//! Indices are 1-based in [`ChannelId::ALL`] order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{ChannelId, CHANNEL_COUNT};

/// Tolerance on `Σ α = 1` for constructed parameters.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Files whose weights sum within this of 1 are renormalized on load; rounded
/// published values do not sum to 1 exactly.
pub const FILE_SIMPLEX_TOL: f64 = 1e-2;

const TABLE1_SIGMA: [f64; CHANNEL_COUNT] = [3.110, 5.197, 2.561, 4.678, 3.545, 6.166, 4.186, 3.908];
const TABLE1_ALPHA: [f64; CHANNEL_COUNT] = [0.362, 0.002, 0.054, 0.338, 0.001, 0.185, 0.056, 0.001];
const TABLE1_THETA: f64 = 0.756;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneoParams {
    sigma: [f64; CHANNEL_COUNT],
    alpha: [f64; CHANNEL_COUNT],
    theta: f64,
}

impl GeneoParams {
    pub fn new(sigma: [f64; CHANNEL_COUNT], alpha: [f64; CHANNEL_COUNT], theta: f64) -> Result<Self> {
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::domain(format!("sigma must be positive, got {s}")));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::domain(format!("alpha must be non-negative, got {a}")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!("alpha must sum to 1, sums to {sum}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::domain(format!("theta must lie in (0,1), got {theta}")));
        }
        Ok(GeneoParams { sigma, alpha, theta })
    }

    /// Like [`GeneoParams::new`] but divides `alpha` by its sum first.
    pub fn normalized(sigma: [f64; CHANNEL_COUNT], alpha: [f64; CHANNEL_COUNT], theta: f64) -> Result<Self> {
        let sum: f64 = alpha.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::domain("alpha has no positive mass"));
        }
        GeneoParams::new(sigma, alpha.map(|a| a / sum), theta)
    }

    /// The published optimum, with weights rescaled to sum to 1.
    pub fn table1() -> Self {
        GeneoParams::normalized(TABLE1_SIGMA, TABLE1_ALPHA, TABLE1_THETA).expect("valid defaults")
    }

    /// Fixed starting point for training: uniform weights, σ = 4 Å, θ = 0.5.
    pub fn initial_guess() -> Self {
        GeneoParams::new([4.0; CHANNEL_COUNT], [1.0 / CHANNEL_COUNT as f64; CHANNEL_COUNT], 0.5).expect("valid defaults")
    }

    pub fn sigma(&self) -> &[f64; CHANNEL_COUNT] {
        &self.sigma
    }

    pub fn alpha(&self) -> &[f64; CHANNEL_COUNT] {
        &self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        GeneoParams::new(self.sigma, self.alpha, theta)
    }

    pub fn with_alpha(&self, alpha: [f64; CHANNEL_COUNT]) -> Result<Self> {
        GeneoParams::new(self.sigma, alpha, self.theta)
    }

    /// `sigma.1..8, alpha.1..8, theta`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(17);
        v.extend_from_slice(&self.sigma);
        v.extend_from_slice(&self.alpha);
        v.push(self.theta);
        v
    }

    /// Parameter names in [`GeneoParams::to_vec`] order.
    pub fn names() -> Vec<String> {
        let mut v: Vec<String> = (1..=CHANNEL_COUNT).map(|i| format!("sigma.{i}")).collect();
        v.extend((1..=CHANNEL_COUNT).map(|i| format!("alpha.{i}")));
        v.push("theta".into());
        v
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, c) in ChannelId::ALL.iter().enumerate() {
            let _ = writeln!(out, "# {}", c.name());
            let _ = writeln!(out, "sigma.{} = {:?}", i + 1, self.sigma[i]);
            let _ = writeln!(out, "alpha.{} = {:?}", i + 1, self.alpha[i]);
        }
        let _ = writeln!(out, "theta = {:?}", self.theta);
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sigma = [None; CHANNEL_COUNT];
        let mut alpha = [None; CHANNEL_COUNT];
        let mut theta = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let t = raw.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let v: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("`{value}` is not a finite number")))?;
            let slot = if key == "theta" {
                &mut theta
            } else {
                let (name, idx) = key
                    .split_once('.')
                    .ok_or_else(|| Error::parse(line, format!("unknown key `{key}`")))?;
                let i: usize = idx
                    .parse()
                    .ok()
                    .filter(|i| (1..=CHANNEL_COUNT).contains(i))
                    .ok_or_else(|| Error::parse(line, format!("channel index in `{key}` must be 1..8")))?;
                match name {
                    "sigma" => &mut sigma[i - 1],
                    "alpha" => &mut alpha[i - 1],
                    _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
                }
            };
            if slot.replace(v).is_some() {
                return Err(Error::parse(line, format!("duplicate key `{key}`")));
            }
        }
        let missing = |what: &str| Error::parse(0, format!("missing `{what}`"));
        let mut s = [0.0; CHANNEL_COUNT];
        let mut a = [0.0; CHANNEL_COUNT];
        for i in 0..CHANNEL_COUNT {
            s[i] = sigma[i].ok_or_else(|| missing(&format!("sigma.{}", i + 1)))?;
            a[i] = alpha[i].ok_or_else(|| missing(&format!("alpha.{}", i + 1)))?;
        }
        let theta = theta.ok_or_else(|| missing("theta"))?;
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > FILE_SIMPLEX_TOL {
            return Err(Error::domain(format!("alpha sums to {sum}, not 1")));
        }
        if (sum - 1.0).abs() <= SIMPLEX_TOL {
            return GeneoParams::new(s, a, theta);
        }
        GeneoParams::normalized(s, a, theta)
    }
}

impl Default for GeneoParams {
    fn default() -> Self {
        GeneoParams::table1()
    }
}
