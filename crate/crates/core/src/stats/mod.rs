//! Sensitivity, equivariance and robustness analyses, plus the small pieces
//! of descriptive and inferential statistics they share.

mod equivariance;
mod robustness;
mod sensitivity;

pub use equivariance::{
    equivariance_overlaps, equivariance_proportions, equivariance_table, equivariance_table_csv, proportion, wald,
    wald_z, ProportionEstimate, ProteinOverlaps, Wald, CONFIDENCE,
};
pub use robustness::{
    frame_overlap_series, mean_overlap_test, overlap_rmsd_association, rmsd, robustness_csv, series_long_csv,
    MeanOverlapTest, OverlapSeries, RobustnessRow,
};
pub use sensitivity::{sensitivity, SensitivityReport, SensitivitySample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample quantile, linear interpolation between order statistics (R type 7).
/// `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("no values to summarize"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("cannot summarize non-finite values"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::domain("series lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::domain("need at least two pairs"));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Ok(None);
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// R-style significance stars.
pub fn significance_code(p: f64) -> &'static str {
    match p {
        _ if p <= 0.001 => "***",
        _ if p <= 0.01 => "**",
        _ if p <= 0.05 => "*",
        _ if p <= 0.1 => ".",
        _ => "",
    }
}

/// Shortest decimal that reads back as the same `f64`; `NA` for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}
