//! Frame-to-frame stability of the global pocket mask along a trajectory.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{fmt_opt, mean, pearson, significance_code, variance};
use crate::error::{Error, Result};
use crate::geneo::PocketDetector;
use crate::grid::{overlap_fraction, GridConfig};
use crate::ingest::{AtomicStructure, Trajectory};

/// Root mean squared deviation of paired atoms, without any superposition.
pub fn rmsd(a: &AtomicStructure, b: &AtomicStructure) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("atom counts differ: {} vs {}", a.len(), b.len())));
    }
    let sum: f64 = a
        .atoms()
        .iter()
        .zip(b.atoms())
        .map(|(p, q)| (0..3).map(|k| (p.position[k] - q.position[k]).powi(2)).sum::<f64>())
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub protein: String,
    /// `O_t` for `t = 2..=T`; `None` when frame `t-1` has no pocket.
    pub overlaps: Vec<Option<f64>>,
    pub rmsds: Vec<f64>,
}

impl OverlapSeries {
    pub fn observed(&self) -> Vec<f64> {
        self.overlaps.iter().flatten().copied().collect()
    }

    pub fn mean_overlap(&self) -> Option<f64> {
        let o = self.observed();
        (!o.is_empty()).then(|| mean(&o))
    }
}

/// Global masks of the first `frames` frames on one grid bounding all of them.
pub fn frame_overlap_series(
    detector: &dyn PocketDetector,
    traj: &Trajectory,
    frames: usize,
    grid: &GridConfig,
) -> Result<OverlapSeries> {
    if frames < 2 || frames > traj.len() {
        return Err(Error::domain(format!("T must lie in 2..={}, got {frames}", traj.len())));
    }
    let used = &traj.frames()[..frames];
    let points: Vec<[f64; 3]> = used.iter().flat_map(|f| f.positions()).collect();
    let spec = grid.grid_for_points(&points)?;
    let masks: Vec<_> = used
        .par_iter()
        .map(|f| Ok(detector.detect(f, &spec)?.global_mask))
        .collect::<Result<_>>()?;
    let mut overlaps = Vec::with_capacity(frames - 1);
    let mut rmsds = Vec::with_capacity(frames - 1);
    for t in 1..frames {
        overlaps.push(if masks[t - 1].is_empty() {
            None
        } else {
            Some(overlap_fraction(&masks[t - 1], &masks[t])?)
        });
        rmsds.push(rmsd(&used[t - 1], &used[t])?);
    }
    Ok(OverlapSeries {
        protein: traj.structure_id().to_string(),
        overlaps,
        rmsds,
    })
}

/// Pearson correlation of overlap and RMSD over frames with an overlap;
/// `None` when either is constant.
pub fn overlap_rmsd_association(series: &OverlapSeries) -> Result<Option<f64>> {
    if series.overlaps.len() != series.rmsds.len() {
        return Err(Error::domain("overlap and RMSD series differ in length"));
    }
    let (o, r): (Vec<f64>, Vec<f64>) = series
        .overlaps
        .iter()
        .zip(&series.rmsds)
        .filter_map(|(o, &r)| o.map(|o| (o, r)))
        .unzip();
    if o.len() < 3 {
        return Err(Error::domain(format!("need at least 3 paired points, got {}", o.len())));
    }
    pearson(&o, &r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanOverlapTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub t: Option<f64>,
    pub df: Option<f64>,
    /// Left tail: evidence that the mean of `a` is below that of `b`.
    pub p_value: f64,
    pub code: String,
}

/// Welch's two-sample t test of `mean(a) < mean(b)`. When both samples have
/// zero variance the statistic is undefined: equal means give p = 0.5,
/// otherwise p is 0 or 1 by the sign of the difference.
pub fn mean_overlap_test(a: &[f64], b: &[f64]) -> Result<MeanOverlapTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("each series needs at least 2 values"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("series contain non-finite values"));
    }
    let (mean_a, mean_b) = (mean(a), mean(b));
    let diff = mean_a - mean_b;
    let va = variance(a) / a.len() as f64;
    let vb = variance(b) / b.len() as f64;
    let se2 = va + vb;
    let (t, df, p_value) = if se2 == 0.0 {
        let p = match diff {
            d if d < 0.0 => 0.0,
            d if d > 0.0 => 1.0,
            _ => 0.5,
        };
        (None, None, p)
    } else {
        let t = diff / se2.sqrt();
        let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
        (Some(t), Some(df), dist.cdf(t).clamp(0.0, 1.0))
    };
    if !p_value.is_finite() {
        return Err(Error::Numerical("p-value is not finite".into()));
    }
    Ok(MeanOverlapTest {
        mean_a,
        mean_b,
        diff,
        t,
        df,
        p_value,
        code: significance_code(p_value).to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub protein: String,
    pub test: MeanOverlapTest,
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = String::from("protein,mean_a,mean_b,diff,p_value,code\n");
    for r in rows {
        let t = &r.test;
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{}",
            r.protein, t.mean_a, t.mean_b, t.diff, t.p_value, t.code
        );
    }
    out
}

/// Long format for boxplots: `protein,series,t,overlap,rmsd`.
pub fn series_long_csv(series: &[(String, OverlapSeries)]) -> String {
    let mut out = String::from("protein,series,t,overlap,rmsd\n");
    for (label, s) in series {
        for (i, (o, r)) in s.overlaps.iter().zip(&s.rmsds).enumerate() {
            let _ = writeln!(out, "{},{},{},{},{r:?}", s.protein, label, i + 2, fmt_opt(*o));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Atom;

    fn structure(points: &[[f64; 3]]) -> AtomicStructure {
        AtomicStructure::new("s", points.iter().map(|&p| Atom::new("C", p)).collect()).unwrap()
    }

    #[test]
    fn rmsd_cases() {
        let a = structure(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 0.5]]);
        assert_eq!(rmsd(&a, &a).unwrap(), 0.0);
        let b = structure(&[[3.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 0.5]]);
        assert_eq!(rmsd(&a, &b).unwrap(), 1.5);
        assert!(rmsd(&a, &structure(&[[0.0; 3]])).is_err());
    }

    #[test]
    fn welch_against_known_tail() {
        // t = -2 with 10 degrees of freedom has left tail 0.036694...
        let dist = StudentsT::new(0.0, 1.0, 10.0).unwrap();
        assert!((dist.cdf(-2.0) - 0.0366940).abs() < 1e-6);
        // equal variances and sizes: df = 2n - 2, t by hand
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let r = mean_overlap_test(&a, &b).unwrap();
        let se = (2.0 * 3.5 / 6.0f64).sqrt();
        assert!((r.t.unwrap() + 1.0 / se).abs() < 1e-12);
        assert!((r.df.unwrap() - 10.0).abs() < 1e-12);
        let expect = StudentsT::new(0.0, 1.0, 10.0).unwrap().cdf(-1.0 / se);
        assert!((r.p_value - expect).abs() < 1e-12);
    }

    #[test]
    fn welch_conventions() {
        let same = mean_overlap_test(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!(same.diff, 0.0);
        assert!(same.p_value >= 0.49);
        let flat = mean_overlap_test(&[0.3, 0.3], &[0.3, 0.3]).unwrap();
        assert_eq!((flat.p_value, flat.t), (0.5, None));
        let below = mean_overlap_test(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(below.p_value, 0.0);
        assert_eq!(below.code, "***");
        assert!(mean_overlap_test(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mean_overlap_test(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn swapping_mirrors_the_tail() {
        let a = [0.81, 0.86, 0.9, 0.84, 0.88];
        let b = [0.9, 0.93, 0.88, 0.95, 0.91, 0.94];
        let ab = mean_overlap_test(&a, &b).unwrap();
        let ba = mean_overlap_test(&b, &a).unwrap();
        assert!((ab.p_value + ba.p_value - 1.0).abs() < 1e-12);
        assert_eq!(ab.diff, -ba.diff);
    }

    #[test]
    fn association() {
        let rm: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let s = OverlapSeries {
            protein: "p".into(),
            overlaps: rm.iter().map(|r| Some(1.0 - 0.5 * r)).collect(),
            rmsds: rm.clone(),
        };
        assert!((overlap_rmsd_association(&s).unwrap().unwrap() + 1.0).abs() < 1e-12);
        let flat = OverlapSeries {
            rmsds: vec![0.2; 6],
            ..s.clone()
        };
        assert_eq!(overlap_rmsd_association(&flat).unwrap(), None);
        let sparse = OverlapSeries {
            overlaps: vec![Some(1.0), None, None, None, None, Some(0.4)],
            ..s
        };
        assert!(overlap_rmsd_association(&sparse).is_err());
    }

    #[test]
    fn csv_layout() {
        let test = mean_overlap_test(&[0.1, 0.2], &[0.3, 0.5]).unwrap();
        let csv = robustness_csv(&[RobustnessRow { protein: "p1".into(), test }]);
        assert!(csv.starts_with("protein,mean_a,mean_b,diff,p_value,code\np1,0.15"));
    }
}
