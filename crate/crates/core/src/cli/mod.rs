//! Command-line front end. Every subcommand resolves a [`RunConfig`], runs
//! inside a rayon pool of `--jobs` threads and writes its artifacts plus a
//! `report.json` that embeds the tool version, the resolved config and the
//! sha256 of every input.

mod config;

pub use config::{parse_pairs, RunConfig, KEYS, PRESETS};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geneo::{volumetric_accuracy, Connectivity, DetectorConfig, GeneoDetector, GeneoParams, PredictionRecord};
use crate::grid::{GridConfig, Rotation};
use crate::ingest::{
    import_pdb, parse_complex, parse_trajectory, synth_protein, synth_trajectory, write_complex, write_trajectory,
    AtomicStructure, LigandRegion, PocketSpec, Trajectory, DEFAULT_LIGAND_RADIUS,
};
use crate::stats::{
    equivariance_overlaps, equivariance_table, equivariance_table_csv, frame_overlap_series, mean_overlap_test,
    robustness_csv, sensitivity, series_long_csv, OverlapSeries, ProportionEstimate, ProteinOverlaps, RobustnessRow,
};
use crate::train::{fit, TrainConfig, TrainResult};

#[derive(Parser, Debug)]
#[command(name = "geneo-pocket", version, about = "GENEO pocket detection and its statistical harness")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied before the config file
    #[arg(long)]
    preset: Option<String>,
    /// Override one key; repeatable, wins over the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set seed=N`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict pockets for one structure
    Predict {
        #[arg(long)]
        structure: PathBuf,
        /// Parameter file; default is the built-in published optimum
        #[arg(long)]
        params: Option<PathBuf>,
        /// Report file
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit parameters on a training set
    Train(DirCommand),
    /// Repeat training on random subsets of a pool
    Sensitivity(DirCommand),
    /// Overlap of predictions before and after quarter-turn rotations
    Equivariance(DirCommand),
    /// Frame-to-frame overlap along paired trajectories
    Robustness(DirCommand),
    /// Write the synthetic complexes (and trajectory pairs) a config describes
    Synth {
        #[command(flatten)]
        dir: DirCommand,
        /// Also write the robustness trajectory pairs
        #[arg(long)]
        trajectories: bool,
    },
    /// Print every config key with its default, and the presets
    Keys,
}

#[derive(Args, Debug, Clone)]
struct DirCommand {
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

/// Parse `args`, run, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs as usize).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.jobs);
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Predict {
            structure,
            params,
            out,
            cfg,
        } => {
            let mut rc = resolve("predict", cfg)?;
            if let Some(p) = params {
                rc.set("params", &p.to_string_lossy())?;
            }
            cmd_predict(&rc, structure, out)
        }
        Command::Train(d) => cmd_train(&resolve("train", &d.cfg)?, &d.out),
        Command::Sensitivity(d) => cmd_sensitivity(&resolve("sensitivity", &d.cfg)?, &d.out),
        Command::Equivariance(d) => cmd_equivariance(&resolve("equivariance", &d.cfg)?, &d.out),
        Command::Robustness(d) => cmd_robustness(&resolve("robustness", &d.cfg)?, &d.out),
        Command::Synth { dir, trajectories } => cmd_synth(&resolve("synth", &dir.cfg)?, &dir.out, *trajectories),
        Command::Keys => {
            print!("{}", keys_text());
            Ok(())
        }
    }
}

fn keys_text() -> String {
    let mut s = String::from("# key = default  # description\n");
    for (k, v, d) in KEYS {
        let _ = writeln!(s, "{k} = {v}  # {d}");
    }
    s.push_str("\n# presets\n");
    for (name, doc, pairs) in PRESETS {
        let kv: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(s, "# {name}: {doc} ({})", kv.join(" "));
    }
    s
}

fn resolve(command: &str, args: &ConfigArgs) -> Result<RunConfig> {
    let mut rc = RunConfig::for_command(command);
    if let Some(p) = &args.preset {
        rc.apply_preset(p)?;
    }
    if let Some(path) = &args.config {
        rc.apply_text(&read_text(path)?)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        rc.set(k.trim(), v)?;
    }
    if let Some(seed) = args.seed {
        rc.set("seed", &seed.to_string())?;
    }
    Ok(rc)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, Serialize)]
struct InputDigest {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    inputs: &'a [InputDigest],
    result: T,
}

fn write_report<T: Serialize>(
    path: &Path,
    command: &str,
    rc: &RunConfig,
    inputs: &[InputDigest],
    result: T,
) -> Result<()> {
    let report = Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: rc.values(),
        inputs,
        result,
    };
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn detector_config(rc: &RunConfig) -> Result<DetectorConfig> {
    let connectivity: Connectivity = rc
        .raw("connectivity")
        .parse()
        .map_err(|e: String| Error::domain(format!("config `connectivity`: {e}")))?;
    Ok(DetectorConfig {
        grid: rc.grid()?,
        connectivity,
        ..DetectorConfig::default()
    })
}

/// Parameters plus the digest entry when they come from a file.
fn load_params(rc: &RunConfig) -> Result<(GeneoParams, Option<InputDigest>)> {
    match rc.raw("params") {
        "table1" => Ok((GeneoParams::table1(), None)),
        path => {
            let path = Path::new(path);
            let text = read_text(path)?;
            let digest = InputDigest {
                name: path.to_string_lossy().into_owned(),
                sha256: sha256_hex(text.as_bytes()),
            };
            Ok((GeneoParams::parse(&text)?, Some(digest)))
        }
    }
}

struct Complex {
    structure: AtomicStructure,
    ligand: Vec<[f64; 3]>,
    digest: InputDigest,
}

fn read_complex(path: &Path) -> Result<Complex> {
    let text = read_text(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let is_pdb = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pdb") || e.eq_ignore_ascii_case("ent"));
    let (structure, ligand) = if is_pdb {
        import_pdb(&text, &stem)?
    } else {
        parse_complex(&text)?
    };
    Ok(Complex {
        structure,
        ligand,
        digest: InputDigest {
            name: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(text.as_bytes()),
        },
    })
}

/// Seed of the `i`-th synthetic item of a run seeded with `seed`.
fn item_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

fn synth_spec(rc: &RunConfig) -> Result<PocketSpec> {
    Ok(PocketSpec {
        flags: rc.flag_scheme()?,
        ..PocketSpec::default()
    })
}

/// The configured input files, or the synthetic set.
fn complexes(rc: &RunConfig, grid: &GridConfig) -> Result<Vec<Complex>> {
    let files: Vec<String> = rc.list("inputs")?;
    if !files.is_empty() {
        return files.iter().map(|f| read_complex(Path::new(f))).collect();
    }
    let count: usize = rc.get("synth.count")?;
    let atoms: usize = rc.get("synth.atoms")?;
    let seed: u64 = rc.get("seed")?;
    let spec = synth_spec(rc)?;
    if count == 0 {
        return Err(Error::domain("synth.count must be at least 1"));
    }
    (0..count)
        .map(|i| {
            let sc = synth_protein(item_seed(seed, i), atoms, &spec, grid)?;
            let text = write_complex(&sc.structure, &sc.ligand);
            Ok(Complex {
                digest: InputDigest {
                    name: format!("synth:{}", sc.structure.id()),
                    sha256: sha256_hex(text.as_bytes()),
                },
                structure: sc.structure,
                ligand: sc.ligand,
            })
        })
        .collect()
}

fn labelled(items: Vec<Complex>, grid: &GridConfig) -> Result<(Vec<(AtomicStructure, LigandRegion)>, Vec<InputDigest>)> {
    let mut set = Vec::with_capacity(items.len());
    let mut digests = Vec::with_capacity(items.len());
    for c in items {
        if c.ligand.is_empty() {
            return Err(Error::domain(format!("{} has no ligand atoms to learn from", c.digest.name)));
        }
        let spec = grid.grid_for(&c.structure)?;
        let region = LigandRegion::from_atoms(&c.ligand, &spec, DEFAULT_LIGAND_RADIUS)?;
        set.push((c.structure, region));
        digests.push(c.digest);
    }
    Ok((set, digests))
}

fn train_config(rc: &RunConfig, trainset: Vec<(AtomicStructure, LigandRegion)>) -> Result<TrainConfig> {
    Ok(TrainConfig {
        initial_params: GeneoParams::initial_guess(),
        max_iters: rc.get("train.max_iters")?,
        tolerance: rc.get("train.tolerance")?,
        seed: rc.get("seed")?,
        trainset,
        detector: detector_config(rc)?,
    })
}

#[derive(Serialize)]
struct PredictResult {
    structure: String,
    params: GeneoParams,
    /// Jaccard of the top pocket when the input carries ligand atoms.
    volumetric_accuracy: Option<f64>,
    prediction: PredictionRecord,
}

fn cmd_predict(rc: &RunConfig, structure: &Path, out: &Path) -> Result<()> {
    let (params, params_digest) = load_params(rc)?;
    let det = detector_config(rc)?;
    let c = read_complex(structure)?;
    let spec = det.grid.grid_for(&c.structure)?;
    let pred = crate::geneo::predict_on(&c.structure, &spec, &params, &det)?;
    let accuracy = if c.ligand.is_empty() {
        None
    } else {
        let truth = LigandRegion::from_atoms(&c.ligand, &spec, DEFAULT_LIGAND_RADIUS)?;
        Some(volumetric_accuracy(&pred, &truth)?)
    };
    let mut inputs = vec![c.digest];
    inputs.extend(params_digest);
    let result = PredictResult {
        structure: c.structure.id().to_string(),
        params,
        volumetric_accuracy: accuracy,
        prediction: PredictionRecord::from(&pred),
    };
    write_report(out, "predict", rc, &inputs, result)
}

fn cmd_train(rc: &RunConfig, out: &Path) -> Result<()> {
    let det = detector_config(rc)?;
    let (set, inputs) = labelled(complexes(rc, &det.grid)?, &det.grid)?;
    let result: TrainResult = fit(&train_config(rc, set)?)?;
    out_dir(out)?;
    write_text(&out.join("params.txt"), &result.params.to_file_string())?;
    write_text(&out.join("trace.csv"), &result.trace_csv())?;
    write_report(&out.join("report.json"), "train", rc, &inputs, &result)
}

fn cmd_sensitivity(rc: &RunConfig, out: &Path) -> Result<()> {
    let det = detector_config(rc)?;
    let (pool, inputs) = labelled(complexes(rc, &det.grid)?, &det.grid)?;
    let base = train_config(rc, Vec::new())?;
    let report = sensitivity(
        &base,
        rc.get("sensitivity.repetitions")?,
        &pool,
        rc.get("sensitivity.subset")?,
        rc.get("seed")?,
    )?;
    out_dir(out)?;
    let mut wide = String::from("repetition");
    for n in GeneoParams::names() {
        let _ = write!(wide, ",{n}");
    }
    wide.push_str(",objective\n");
    for s in &report.samples {
        let _ = write!(wide, "{}", s.repetition);
        for v in s.params.to_vec() {
            let _ = write!(wide, ",{v:?}");
        }
        let _ = writeln!(wide, ",{:?}", s.objective);
    }
    write_text(&out.join("samples.csv"), &wide)?;
    write_text(&out.join("samples_long.csv"), &report.long_csv())?;
    write_text(&out.join("summary.csv"), &report.summary_csv())?;
    write_report(&out.join("report.json"), "sensitivity", rc, &inputs, &report)
}

#[derive(Serialize)]
struct EquivarianceResult {
    method: String,
    proteins: usize,
    rotations: Vec<usize>,
    /// Global-mask overlaps that are present, and how many equal 1.
    global_present: usize,
    global_exact: usize,
    estimates: Vec<ProportionEstimate>,
    overlaps: Vec<ProteinOverlaps>,
}

fn tau_label(tau: f64) -> String {
    format!("{tau}").replace('.', "_")
}

fn cmd_equivariance(rc: &RunConfig, out: &Path) -> Result<()> {
    let (params, params_digest) = load_params(rc)?;
    let det = detector_config(rc)?;
    let items = complexes(rc, &det.grid)?;
    let taus: Vec<f64> = rc.list("equivariance.taus")?;
    let ranks: Vec<usize> = rc.list("equivariance.ranks")?;
    if taus.is_empty() || ranks.is_empty() {
        return Err(Error::domain("need at least one tau and one rank"));
    }
    if let Some(&j) = ranks.iter().find(|&&j| !(1..=3).contains(&j)) {
        return Err(Error::domain(format!("pocket rank must be 1, 2 or 3, got {j}")));
    }
    let all = Rotation::all();
    let picked: Vec<usize> = match rc.raw("equivariance.rotations") {
        "all" => (0..all.len()).collect(),
        _ => rc.list("equivariance.rotations")?,
    };
    if let Some(&r) = picked.iter().find(|&&r| r >= all.len()) {
        return Err(Error::domain(format!("rotation index {r} is not in 0..24")));
    }
    let rotations: Vec<Rotation> = picked.iter().map(|&i| all[i]).collect();
    let detector = GeneoDetector::new(params, det);
    let proteins: Vec<AtomicStructure> = items.iter().map(|c| c.structure.clone()).collect();
    let max_rank = ranks.iter().copied().max().unwrap_or(1);
    let mut overlaps = equivariance_overlaps(&detector, &proteins, &det.grid, &rotations, max_rank)?;
    for o in &mut overlaps {
        o.rotation = picked[o.rotation];
    }
    let method = crate::geneo::PocketDetector::name(&detector).to_string();
    let estimates = equivariance_table(&method, &overlaps, &taus, &ranks)?;

    out_dir(out)?;
    for &tau in &taus {
        let rows: Vec<ProportionEstimate> = estimates.iter().filter(|e| e.tau == tau).cloned().collect();
        write_text(
            &out.join(format!("equivariance_tau{}.csv", tau_label(tau))),
            &equivariance_table_csv(&rows),
        )?;
    }
    let mut long = String::from("protein,rotation,pocket,overlap\n");
    for o in &overlaps {
        let _ = writeln!(long, "{},{},global,{}", o.protein, o.rotation, crate::stats::fmt_opt(o.global));
        for (j, v) in o.ranks.iter().enumerate() {
            let _ = writeln!(long, "{},{},{},{}", o.protein, o.rotation, j + 1, crate::stats::fmt_opt(*v));
        }
    }
    write_text(&out.join("overlaps.csv"), &long)?;
    let mut inputs: Vec<InputDigest> = items.into_iter().map(|c| c.digest).collect();
    inputs.extend(params_digest);
    let result = EquivarianceResult {
        method,
        proteins: proteins.len(),
        rotations: picked,
        global_present: overlaps.iter().filter(|o| o.global.is_some()).count(),
        global_exact: overlaps.iter().filter(|o| o.global == Some(1.0)).count(),
        estimates,
        overlaps,
    };
    write_report(&out.join("report.json"), "equivariance", rc, &inputs, result)
}

struct TrajectoryPair {
    protein: String,
    a: Trajectory,
    b: Trajectory,
}

fn read_trajectory(path: &str) -> Result<(Trajectory, InputDigest)> {
    let text = read_text(Path::new(path))?;
    let digest = InputDigest {
        name: path.to_string(),
        sha256: sha256_hex(text.as_bytes()),
    };
    Ok((parse_trajectory(&text)?, digest))
}

fn trajectory_pairs(rc: &RunConfig, grid: &GridConfig) -> Result<(Vec<TrajectoryPair>, Vec<InputDigest>)> {
    let fa: Vec<String> = rc.list("robustness.trajectories_a")?;
    let fb: Vec<String> = rc.list("robustness.trajectories_b")?;
    let frames: usize = rc.get("robustness.frames")?;
    if fa.len() != fb.len() {
        return Err(Error::domain("trajectory lists a and b differ in length"));
    }
    if !fa.is_empty() {
        let mut pairs = Vec::new();
        let mut digests = Vec::new();
        for (pa, pb) in fa.iter().zip(&fb) {
            let (a, da) = read_trajectory(pa)?;
            let (b, db) = read_trajectory(pb)?;
            pairs.push(TrajectoryPair {
                protein: a.structure_id().to_string(),
                a,
                b,
            });
            digests.extend([da, db]);
        }
        return Ok((pairs, digests));
    }
    let (step_a, step_b): (f64, f64) = (rc.get("robustness.step_a")?, rc.get("robustness.step_b")?);
    let seed: u64 = rc.get("seed")?;
    let mut pairs = Vec::new();
    let mut digests = Vec::new();
    for (i, c) in complexes(rc, grid)?.into_iter().enumerate() {
        // both series of a protein share the base structure and the step seed
        let walk = item_seed(seed, i) ^ 0x5eed;
        let a = synth_trajectory(&c.structure, walk, frames, step_a)?;
        let b = synth_trajectory(&c.structure, walk, frames, step_b)?;
        for (label, t) in [("a", &a), ("b", &b)] {
            digests.push(InputDigest {
                name: format!("{}:{label}", c.digest.name),
                sha256: sha256_hex(write_trajectory(t).as_bytes()),
            });
        }
        pairs.push(TrajectoryPair {
            protein: c.structure.id().to_string(),
            a,
            b,
        });
    }
    Ok((pairs, digests))
}

#[derive(Serialize)]
struct RobustnessResult {
    rows: Vec<RobustnessRow>,
    series: Vec<(String, OverlapSeries)>,
}

fn cmd_robustness(rc: &RunConfig, out: &Path) -> Result<()> {
    let (params, params_digest) = load_params(rc)?;
    let det = detector_config(rc)?;
    let frames: usize = rc.get("robustness.frames")?;
    let (pairs, mut inputs) = trajectory_pairs(rc, &det.grid)?;
    let detector = GeneoDetector::new(params, det);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for p in &pairs {
        let sa = frame_overlap_series(&detector, &p.a, frames, &det.grid)?;
        let sb = frame_overlap_series(&detector, &p.b, frames, &det.grid)?;
        let test = mean_overlap_test(&sa.observed(), &sb.observed())
            .map_err(|e| Error::domain(format!("{}: {e}", p.protein)))?;
        rows.push(RobustnessRow {
            protein: p.protein.clone(),
            test,
        });
        series.push(("a".to_string(), sa));
        series.push(("b".to_string(), sb));
    }
    out_dir(out)?;
    write_text(&out.join("robustness.csv"), &robustness_csv(&rows))?;
    write_text(&out.join("series.csv"), &series_long_csv(&series))?;
    inputs.extend(params_digest);
    write_report(&out.join("report.json"), "robustness", rc, &inputs, RobustnessResult { rows, series })
}

fn cmd_synth(rc: &RunConfig, out: &Path, trajectories: bool) -> Result<()> {
    let grid = rc.grid()?;
    out_dir(out)?;
    let mut inputs = Vec::new();
    if trajectories {
        let (pairs, digests) = trajectory_pairs(rc, &grid)?;
        for p in &pairs {
            write_text(&out.join(format!("{}_a.traj", p.protein)), &write_trajectory(&p.a))?;
            write_text(&out.join(format!("{}_b.traj", p.protein)), &write_trajectory(&p.b))?;
        }
        inputs.extend(digests);
    }
    let items = complexes(rc, &grid)?;
    let mut names = Vec::new();
    for c in &items {
        let name = format!("{}.complex", c.structure.id());
        write_text(&out.join(&name), &write_complex(&c.structure, &c.ligand))?;
        names.push(name);
    }
    inputs.extend(items.into_iter().map(|c| c.digest));
    write_report(&out.join("report.json"), "synth", rc, &inputs, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["geneo-pocket", "bogus"]), 2);
        assert_eq!(run(["geneo-pocket", "predict"]), 2);
        assert_eq!(run(["geneo-pocket", "--jobs", "0", "keys"]), 2);
    }

    #[test]
    fn tau_labels() {
        assert_eq!(tau_label(0.95), "0_95");
        assert_eq!(tau_label(1.0), "1");
    }
}
