use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geneo-pocket"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&read(&dir.join("report.json"))).unwrap()
}

const SMALL: [&str; 6] = ["--set", "synth.count=1", "--set", "synth.atoms=60", "--set", "grid.min_dim=0"];

fn synth_input(root: &Path) -> std::path::PathBuf {
    let dir = root.join("inputs");
    let mut args = vec!["synth"];
    args.extend(SMALL);
    args.push("--out");
    assert_eq!(code(&run(&args, &[&dir])), 0);
    dir.join("synth_0.complex")
}

#[test]
fn predict_writes_a_repeatable_report() {
    let tmp = tempfile::tempdir().unwrap();
    let structure = synth_input(tmp.path());
    let mut texts = Vec::new();
    for n in 0..2 {
        let out = tmp.path().join(format!("p{n}.json"));
        let o = run(&["predict", "--structure"], &[&structure]);
        assert_eq!(code(&o), 2, "missing --out is a usage error");
        let o = Command::new(env!("CARGO_BIN_EXE_geneo-pocket"))
            .arg("predict")
            .arg("--structure")
            .arg(&structure)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(read(&out));
    }
    assert_eq!(texts[0], texts[1]);
    let v: Value = serde_json::from_str(&texts[0]).unwrap();
    assert_eq!(v["command"], "predict");
    assert_eq!(v["config"]["params"], "table1");
    let digest = v["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(v["result"]["prediction"]["pockets"].is_array());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&run(&["frobnicate"], &[])), 2);
    assert_eq!(code(&run(&["--jobs", "0", "keys"], &[])), 2);
    let missing = run(&["predict", "--structure", "/nonexistent/file.complex", "--out"], &[&out]);
    assert_eq!(code(&missing), 3);
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.complex");
    std::fs::write(&bad, "ATOM 1 C 0 0 zero\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geneo-pocket"))
        .arg("predict")
        .arg("--structure")
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(&["train", "--set", "connectivity=7", "--out"], &[&out])), 4);
    assert_eq!(code(&run(&["train", "--set", "grid.spacing=-1", "--out"], &[&out])), 4);
    assert_eq!(code(&run(&["keys"], &[])), 0);
}

#[test]
fn config_file_flags_and_presets_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# run\nseed = 9\nsynth.count = 1\nsynth.atoms = 60\ngrid.min_dim = 0\nequivariance.rotations = 0,5\n").unwrap();
    let out = tmp.path().join("eq");
    let o = Command::new(env!("CARGO_BIN_EXE_geneo-pocket"))
        .args(["equivariance", "--preset", "equi-tau95", "--config"])
        .arg(&cfg)
        .args(["--set", "grid.min_dim=0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = report(&out);
    assert_eq!(v["config"]["seed"], "9");
    assert_eq!(v["config"]["equivariance.taus"], "0.95");
    assert_eq!(v["config"]["grid.min_dim"], "0");
    assert!(out.join("equivariance_tau0_95.csv").exists());
}

#[test]
fn equivariance_tables_are_all_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eq");
    let mut args = vec!["equivariance"];
    args.extend(SMALL);
    args.extend(["--set", "synth.count=2", "--set", "equivariance.rotations=0,3,11,20", "--out"]);
    let o = run(&args, &[&out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut tables = 0;
    for tau in ["0_5", "0_75", "0_95", "0_99"] {
        let text = read(&out.join(format!("equivariance_tau{tau}.csv")));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "method,pocket,n_nonmissing,p_hat,se,ci_low,ci_high,tau");
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols[3] == "NA" {
                continue;
            }
            assert_eq!(cols[3].parse::<f64>().unwrap(), 1.0, "{line}");
            assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0, "{line}");
        }
        tables += 1;
    }
    assert_eq!(tables, 4);
}

#[test]
fn still_trajectories_overlap_fully() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rob");
    let mut args = vec!["robustness"];
    args.extend(SMALL);
    args.extend(["--set", "robustness.step_b=0", "--set", "robustness.frames=4", "--out"]);
    let o = run(&args, &[&out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let series = read(&out.join("series.csv"));
    let still: Vec<&str> = series.lines().filter(|l| l.split(',').nth(1) == Some("b")).collect();
    assert_eq!(still.len(), 3);
    for line in still {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "1.0");
        assert_eq!(cols[4], "0.0");
    }
    assert!(read(&out.join("robustness.csv")).starts_with("protein,mean_a,mean_b,diff,p_value,code\n"));
}

#[test]
fn sensitivity_writes_one_row_per_repetition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sens");
    let mut args = vec!["sensitivity"];
    args.extend(SMALL);
    args.extend([
        "--set",
        "synth.count=2",
        "--set",
        "sensitivity.repetitions=4",
        "--set",
        "sensitivity.subset=1",
        "--set",
        "train.max_iters=3",
        "--out",
    ]);
    let o = run(&args, &[&out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let wide = read(&out.join("samples.csv"));
    assert_eq!(wide.lines().count(), 1 + 4);
    let long = read(&out.join("samples_long.csv"));
    assert_eq!(long.lines().count(), 1 + 4 * 17);
    assert_eq!(read(&out.join("summary.csv")).lines().count(), 1 + 17);
}

#[test]
fn train_output_loads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("train");
    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--set", "train.max_iters=5", "--out"]);
    let o = run(&args, &[&out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let params = geneo_pocket::geneo::GeneoParams::parse(&read(&out.join("params.txt"))).unwrap();
    let trace = read(&out.join("trace.csv"));
    assert!(trace.starts_with("iter,objective\n"));
    let best: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));

    let structure = synth_input(tmp.path());
    let pred = tmp.path().join("pred.json");
    let o = Command::new(env!("CARGO_BIN_EXE_geneo-pocket"))
        .arg("predict")
        .arg("--structure")
        .arg(&structure)
        .arg("--params")
        .arg(out.join("params.txt"))
        .arg("--out")
        .arg(&pred)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&read(&pred)).unwrap();
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
    assert!(params.theta() > 0.0);
}
