use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{apply_unit, GeneoUnit};
use super::params::{GeneoParams, SIMPLEX_TOL};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, GridSpec, ScalarField3D, VoxelMask};
use crate::ingest::{AtomicStructure, LigandRegion};
use crate::potentials::{compute_stack, ChannelId, PotentialConfig, PotentialStack};

/// Min-max rescale to `[0,1]`; a constant field maps to all zeros.
pub fn normalize_unit(field: &ScalarField3D) -> ScalarField3D {
    let (lo, hi) = field.min_max();
    let spec = *field.spec();
    if !(hi > lo) {
        return ScalarField3D::filled(spec, 0.0);
    }
    let span = hi - lo;
    let values = field.values().iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect();
    ScalarField3D::new(spec, values).expect("same length")
}

/// `ψ(v) = Σ α_i f_i(v)`, summed in channel order.
pub fn combine(fields: &[ScalarField3D], alpha: &[f64]) -> Result<ScalarField3D> {
    if fields.is_empty() || fields.len() != alpha.len() {
        return Err(Error::domain(format!("{} fields but {} weights", fields.len(), alpha.len())));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::domain("weights must be non-negative"));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::domain(format!("weights sum to {sum}, not 1")));
    }
    let spec = *fields[0].spec();
    if fields.iter().any(|f| *f.spec() != spec) {
        return Err(Error::domain("fields must share one grid"));
    }
    let mut out = vec![0.0; spec.len()];
    for (f, &a) in fields.iter().zip(alpha) {
        for (o, v) in out.iter_mut().zip(f.values()) {
            *o += a * v;
        }
    }
    for o in &mut out {
        *o = o.clamp(0.0, 1.0);
    }
    ScalarField3D::new(spec, out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    #[default]
    Six,
    /// Faces, edges and corners.
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[i64; 3]> {
        let mut v = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let m = dx.abs() + dy.abs() + dz.abs();
                    if m == 1 || (self == Connectivity::TwentySix && m > 1) {
                        v.push([dx, dy, dz]);
                    }
                }
            }
        }
        v
    }
}

impl std::str::FromStr for Connectivity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "6" => Ok(Connectivity::Six),
            "26" => Ok(Connectivity::TwentySix),
            _ => Err(format!("connectivity must be 6 or 26, got `{s}`")),
        }
    }
}

/// Connected components of `{v : ψ(v) > θ}`, ordered by smallest member.
pub fn threshold_components(psi: &ScalarField3D, theta: f64, connectivity: Connectivity) -> Vec<VoxelMask> {
    let spec = *psi.spec();
    let dims = spec.dims();
    let mut open: Vec<bool> = psi.values().iter().map(|&v| v > theta).collect();
    let offsets = connectivity.offsets();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..open.len() {
        if !open[seed] {
            continue;
        }
        open[seed] = false;
        stack.push(seed);
        let mut members = Vec::new();
        while let Some(l) = stack.pop() {
            members.push(l);
            let idx = spec.unlinear(l);
            for d in &offsets {
                let n: [i64; 3] = std::array::from_fn(|a| idx[a] as i64 + d[a]);
                if (0..3).any(|a| n[a] < 0 || n[a] >= dims[a] as i64) {
                    continue;
                }
                let nl = spec.linear(n.map(|x| x as usize));
                if open[nl] {
                    open[nl] = false;
                    stack.push(nl);
                }
            }
        }
        members.sort_unstable();
        out.push(VoxelMask::from_sorted_unchecked(spec, members));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pocket {
    pub mask: VoxelMask,
    /// Mean of ψ over the pocket.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PocketPrediction {
    pub global_mask: VoxelMask,
    /// Best first.
    pub pockets: Vec<Pocket>,
    pub psi: ScalarField3D,
}

impl PocketPrediction {
    pub fn spec(&self) -> &GridSpec {
        self.psi.spec()
    }

    pub fn top(&self) -> Option<&Pocket> {
        self.pockets.first()
    }

    /// The `rank`-th pocket, 1-based.
    pub fn pocket(&self, rank: usize) -> Option<&Pocket> {
        rank.checked_sub(1).and_then(|r| self.pockets.get(r))
    }
}

/// Mean that does not depend on the order of `values`.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn lexicographic_min(mask: &VoxelMask) -> [usize; 3] {
    mask.indices().min().expect("non-empty")
}

/// Score each component by its mean ψ and rank: score descending, then larger
/// volume, then smallest voxel index `(i,j,k)`.
pub fn score_and_rank(psi: &ScalarField3D, components: Vec<VoxelMask>) -> Result<PocketPrediction> {
    let spec = *psi.spec();
    let mut scored = Vec::with_capacity(components.len());
    let mut union = Vec::new();
    for mask in components {
        if mask.is_empty() {
            return Err(Error::domain("empty component"));
        }
        if *mask.spec() != spec {
            return Err(Error::domain("component grid differs from ψ grid"));
        }
        let mut vals: Vec<f64> = mask.members().iter().map(|&l| psi.values()[l]).collect();
        let score = order_free_mean(&mut vals);
        union.extend_from_slice(mask.members());
        scored.push((lexicographic_min(&mask), Pocket { mask, score }));
    }
    scored.sort_by(|(ka, a), (kb, b)| {
        b.score
            .total_cmp(&a.score)
            .then(b.mask.len().cmp(&a.mask.len()))
            .then(ka.cmp(kb))
    });
    let total = union.len();
    union.sort_unstable();
    union.dedup();
    if union.len() != total {
        return Err(Error::domain("components overlap"));
    }
    Ok(PocketPrediction {
        global_mask: VoxelMask::from_sorted_unchecked(spec, union),
        pockets: scored.into_iter().map(|(_, p)| p).collect(),
        psi: psi.clone(),
    })
}

/// Grid, potentials and connectivity used around the learnable parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub grid: GridConfig,
    pub potentials: PotentialConfig,
    pub connectivity: Connectivity,
}

/// Normalized potentials of one structure on one grid; everything in the
/// pipeline that does not depend on the parameters.
#[derive(Clone, Debug)]
pub struct PreparedInput {
    channels: Vec<ScalarField3D>,
    /// Channels that normalized to constant zero.
    inert: Vec<bool>,
}

impl PreparedInput {
    pub fn new(structure: &AtomicStructure, spec: &GridSpec, potentials: &PotentialConfig) -> Result<Self> {
        Ok(PreparedInput::from_stack(&compute_stack(structure, spec, potentials)?))
    }

    pub fn from_stack(stack: &PotentialStack) -> Self {
        let channels: Vec<ScalarField3D> = stack.channels().iter().map(normalize_unit).collect();
        let inert = channels.iter().map(|c| c.values().iter().all(|&v| v == 0.0)).collect();
        PreparedInput { channels, inert }
    }

    pub fn spec(&self) -> &GridSpec {
        self.channels[0].spec()
    }

    pub fn channels(&self) -> &[ScalarField3D] {
        &self.channels
    }

    /// Unit outputs, renormalized to `[0,1]`, in channel order.
    pub fn unit_outputs(&self, params: &GeneoParams) -> Result<Vec<ScalarField3D>> {
        ChannelId::ALL
            .par_iter()
            .map(|&c| {
                let input = &self.channels[c.index()];
                if self.inert[c.index()] {
                    return Ok(input.clone());
                }
                let unit = GeneoUnit {
                    channel: c,
                    sigma: params.sigma()[c.index()],
                };
                Ok(normalize_unit(&apply_unit(&unit, input)?))
            })
            .collect()
    }

    pub fn psi(&self, params: &GeneoParams) -> Result<ScalarField3D> {
        combine(&self.unit_outputs(params)?, params.alpha())
    }

    pub fn predict(&self, params: &GeneoParams, connectivity: Connectivity) -> Result<PocketPrediction> {
        let psi = self.psi(params)?;
        let comps = threshold_components(&psi, params.theta(), connectivity);
        score_and_rank(&psi, comps)
    }
}

/// Full pipeline on the grid `config.grid` lays over the structure.
pub fn predict(structure: &AtomicStructure, params: &GeneoParams, config: &DetectorConfig) -> Result<PocketPrediction> {
    let spec = config.grid.grid_for(structure)?;
    predict_on(structure, &spec, params, config)
}

/// Full pipeline on a caller-chosen grid.
pub fn predict_on(
    structure: &AtomicStructure,
    spec: &GridSpec,
    params: &GeneoParams,
    config: &DetectorConfig,
) -> Result<PocketPrediction> {
    PreparedInput::new(structure, spec, &config.potentials)?.predict(params, config.connectivity)
}

/// Jaccard index of the top pocket against the ligand region; 0 without pockets.
pub fn volumetric_accuracy(pred: &PocketPrediction, truth: &LigandRegion) -> Result<f64> {
    if truth.mask.spec() != pred.spec() {
        return Err(Error::domain("prediction and ligand region use different grids"));
    }
    let Some(top) = pred.top() else {
        return Ok(0.0);
    };
    let inter = top.mask.intersection_count(&truth.mask);
    let union = top.mask.union_count(&truth.mask);
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Anything that turns a structure on a grid into ranked pockets.
pub trait PocketDetector: Sync {
    fn name(&self) -> &str;
    fn detect(&self, structure: &AtomicStructure, spec: &GridSpec) -> Result<PocketPrediction>;
}

#[derive(Clone, Debug)]
pub struct GeneoDetector {
    pub params: GeneoParams,
    pub config: DetectorConfig,
}

impl GeneoDetector {
    pub fn new(params: GeneoParams, config: DetectorConfig) -> Self {
        GeneoDetector { params, config }
    }
}

impl PocketDetector for GeneoDetector {
    fn name(&self) -> &str {
        "GENEOnet"
    }

    fn detect(&self, structure: &AtomicStructure, spec: &GridSpec) -> Result<PocketPrediction> {
        predict_on(structure, spec, &self.params, &self.config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PocketRecord {
    pub rank: usize,
    pub score: f64,
    pub voxel_count: usize,
    /// Å³
    pub volume: f64,
    pub voxels: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridRecord {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl From<&GridSpec> for GridRecord {
    fn from(s: &GridSpec) -> Self {
        GridRecord {
            origin: s.origin(),
            spacing: s.spacing(),
            dims: s.dims(),
        }
    }
}

/// Serializable view of a prediction (ψ itself is omitted).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub grid: GridRecord,
    pub global_voxel_count: usize,
    pub pockets: Vec<PocketRecord>,
}

impl From<&PocketPrediction> for PredictionRecord {
    fn from(p: &PocketPrediction) -> Self {
        PredictionRecord {
            grid: p.spec().into(),
            global_voxel_count: p.global_mask.len(),
            pockets: p
                .pockets
                .iter()
                .enumerate()
                .map(|(r, pk)| PocketRecord {
                    rank: r + 1,
                    score: pk.score,
                    voxel_count: pk.mask.len(),
                    volume: pk.mask.volume(),
                    voxels: pk.mask.indices().collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> GridSpec {
        GridSpec::new([0.0; 3], 1.0, [n; 3]).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let spec = GridSpec::new([0.0; 3], 1.0, [3, 1, 1]).unwrap();
        let f = ScalarField3D::new(spec, vec![2.0, 3.0, 4.0]).unwrap();
        assert_eq!(normalize_unit(&f).values(), &[0.0, 0.5, 1.0]);
        let c = ScalarField3D::filled(spec, 7.0);
        assert_eq!(normalize_unit(&c).values(), &[0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = ScalarField3D::from_fn(cube(5), |_| rng.random_range(-3.0..9.0));
        assert_eq!(normalize_unit(&r).min_max(), (0.0, 1.0));
    }

    #[test]
    fn combine_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fields: Vec<ScalarField3D> = (0..8).map(|_| ScalarField3D::from_fn(cube(4), |_| rng.random())).collect();
        let mut e3 = [0.0; 8];
        e3[2] = 1.0;
        assert_eq!(combine(&fields, &e3).unwrap(), fields[2]);
        let same = vec![fields[0].clone(); 8];
        let a = GeneoParams::table1();
        let psi = combine(&same, a.alpha()).unwrap();
        for (x, y) in psi.values().iter().zip(fields[0].values()) {
            assert!((x - y).abs() <= 1e-15);
        }
        assert!(combine(&fields, &[0.2; 8]).is_err());
        assert!(combine(&fields[..3], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn components_examples() {
        let spec = cube(6);
        assert!(threshold_components(&ScalarField3D::filled(spec, 0.0), 0.756, Connectivity::Six).is_empty());
        let mut f = ScalarField3D::filled(spec, 0.0);
        f.set([1, 1, 1], 0.9);
        f.set([4, 4, 4], 0.9);
        let comps = threshold_components(&f, 0.756, Connectivity::Six);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 1));
        // diagonal neighbours join only under 26-connectivity
        f.set([2, 2, 1], 0.9);
        assert_eq!(threshold_components(&f, 0.5, Connectivity::Six).len(), 3);
        assert_eq!(threshold_components(&f, 0.5, Connectivity::TwentySix).len(), 2);
        // strict inequality
        assert!(threshold_components(&f, 0.9, Connectivity::Six).is_empty());
    }

    #[test]
    fn ranking() {
        let spec = cube(6);
        let mut psi = ScalarField3D::filled(spec, 0.0);
        for i in 0..3 {
            psi.set([i, 0, 0], 0.8);
            psi.set([i, 5, 5], 0.95);
        }
        let comps = threshold_components(&psi, 0.5, Connectivity::Six);
        let pred = score_and_rank(&psi, comps).unwrap();
        assert_eq!(pred.pockets.len(), 2);
        assert!((pred.pockets[0].score - 0.95).abs() < 1e-15);
        assert!((pred.pockets[1].score - 0.8).abs() < 1e-15);
        assert_eq!(pred.global_mask.len(), 6);
        assert!(score_and_rank(&psi, vec![VoxelMask::empty(spec)]).is_err());
    }

    #[test]
    fn ties_break_by_volume_then_index() {
        let spec = cube(8);
        let mut psi = ScalarField3D::filled(spec, 0.0);
        psi.set([6, 6, 6], 0.9);
        psi.set([0, 6, 0], 0.9);
        psi.set([3, 0, 3], 0.9);
        psi.set([3, 1, 3], 0.9);
        let pred = score_and_rank(&psi, threshold_components(&psi, 0.5, Connectivity::Six)).unwrap();
        let firsts: Vec<[usize; 3]> = pred.pockets.iter().map(|p| p.mask.indices().next().unwrap()).collect();
        assert_eq!(firsts, vec![[3, 0, 3], [0, 6, 0], [6, 6, 6]]);
    }

    #[test]
    fn accuracy_examples() {
        let spec = cube(4);
        let a = VoxelMask::from_linear(spec, 0..8).unwrap();
        let b = VoxelMask::from_linear(spec, 4..12).unwrap();
        let pred = |m: &VoxelMask| PocketPrediction {
            global_mask: m.clone(),
            pockets: vec![Pocket {
                mask: m.clone(),
                score: 0.9,
            }],
            psi: ScalarField3D::filled(spec, 0.0),
        };
        let truth = |m: &VoxelMask| LigandRegion { mask: m.clone() };
        assert_eq!(volumetric_accuracy(&pred(&a), &truth(&a)).unwrap(), 1.0);
        assert_eq!(volumetric_accuracy(&pred(&a), &truth(&b)).unwrap(), 4.0 / 12.0);
        let c = VoxelMask::from_linear(spec, 20..24).unwrap();
        assert_eq!(volumetric_accuracy(&pred(&a), &truth(&c)).unwrap(), 0.0);
        let none = score_and_rank(&ScalarField3D::filled(spec, 0.0), vec![]).unwrap();
        assert_eq!(volumetric_accuracy(&none, &truth(&a)).unwrap(), 0.0);
    }
}
