use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use grasshopper_core::format::LawnFile;
use grasshopper_core::grid::SphericalGrid;
use grasshopper_core::kernel::DeltaKernel;
use grasshopper_core::lawn::{hemisphere_lawn, LawnState};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grasshopper"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    out.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .and_then(|v| v.split_whitespace().next())
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

const FAST: [&str; 6] = [
    "--sweeps",
    "3",
    "--cooling-ratio",
    "0.8",
    "--t-final-ratio",
    "1e-3",
];

#[test]
fn gridgen_writes_deterministic_files() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["gridgen", "--pairs", "3000", "--out", "g.txt"]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "N"), 6000.0);
    let text = std::fs::read_to_string(d.path().join("g.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6000);
    assert!(
        run(d.path(), &["gridgen", "--pairs", "3000", "--out", "g2.txt"])
            .status
            .success()
    );
    assert_eq!(
        text,
        std::fs::read_to_string(d.path().join("g2.txt")).unwrap()
    );

    let bad = run(d.path(), &["gridgen", "--pairs", "2", "--out", "x.txt"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn invalid_input_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &[
            "optimize", "--pairs", "300", "--theta", "0.3pi", "--out", "o",
        ],
        &[
            "optimize", "--pairs", "300", "--theta", "0.01", "--seed", "1", "--out", "o",
        ],
        &[
            "optimize",
            "--grid",
            "missing.txt",
            "--theta",
            "0.3pi",
            "--seed",
            "1",
            "--out",
            "o",
        ],
        &[
            "optimize", "--pairs", "300", "--theta", "nonsense", "--seed", "1", "--out", "o",
        ],
        &[
            "sweep", "--pairs", "300", "--setup", "three", "--seed", "1", "--out", "o",
        ],
    ];
    for args in cases {
        let o = run(d.path(), args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn optimize_eval_analyze() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec![
        "optimize", "--pairs", "800", "--theta", "0.3pi", "--seed", "3", "--out", "a",
    ];
    args.extend(FAST);
    let o = run(d.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = value(&stdout(&o), "P");
    assert!(p > 0.69);

    let e = run(d.path(), &["eval", "a/best-one.json", "--pairs", "800"]);
    assert!(e.status.success());
    let out = stdout(&e);
    assert!(value(&out, "difference") < 1e-9);
    assert!((value(&out, "P") - p).abs() < 1e-9);

    let a = run(d.path(), &["analyze", "a/best-one.json", "--pairs", "800"]);
    assert!(a.status.success());
    assert!(value(&stdout(&a), "reflection_difference") < 1e-12);

    let wrong = run(d.path(), &["eval", "a/best-one.json", "--pairs", "801"]);
    assert_eq!(wrong.status.code(), Some(2));

    // Same config again: resumes from finished checkpoints, same bytes.
    let first = std::fs::read(d.path().join("a/best-one.json")).unwrap();
    assert!(run(d.path(), &args).status.success());
    assert_eq!(
        first,
        std::fs::read(d.path().join("a/best-one.json")).unwrap()
    );
}

#[test]
fn right_angle_optimum_is_one_half() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec![
        "optimize", "--pairs", "1500", "--theta", "pi/2", "--seed", "0", "--out", "h",
    ];
    args.extend(FAST);
    let o = run(d.path(), &args);
    assert!(o.status.success());
    assert!((value(&stdout(&o), "P") - 0.5).abs() < 0.005);
}

#[test]
fn eval_of_hemisphere_file() {
    let d = tempfile::tempdir().unwrap();
    assert!(
        run(d.path(), &["gridgen", "--pairs", "1500", "--out", "g.txt"])
            .status
            .success()
    );
    let grid = Arc::new(SphericalGrid::load(d.path().join("g.txt")).unwrap());
    let lawn = LawnState::One(hemisphere_lawn(grid, [0.0, 0.0, 1.0]).unwrap());
    let third = std::f64::consts::PI / 3.0;
    LawnFile::from_state(&lawn, third, DeltaKernel::default(), 0.0)
        .save(d.path().join("hemi.json"))
        .unwrap();
    let o = run(d.path(), &["eval", "hemi.json", "--grid", "g.txt"]);
    assert!(o.status.success());
    assert!((value(&stdout(&o), "P") - 2.0 / 3.0).abs() < 0.01);
    let o = run(
        d.path(),
        &["eval", "hemi.json", "--grid", "g.txt", "--theta", "pi/4"],
    );
    assert!((value(&stdout(&o), "P") - 0.75).abs() < 0.01);
}

#[test]
fn config_file_with_flag_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "grid": {"fibonacci": {"n_pairs": 400}},
        "setup": "two",
        "theta": "0.3pi",
        "seed": 5,
        "n_replicas": 2,
        "initializers": ["hemisphere", "cogwheel"],
        "schedule": {"cooling_ratio": 0.8, "sweeps_per_temperature": 3, "t_final_ratio": 0.001},
        "output_dir": "c"
    }"#;
    std::fs::write(d.path().join("run.json"), cfg).unwrap();
    let o = run(
        d.path(),
        &["optimize", "--config", "run.json", "--seed", "6"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = std::fs::read_to_string(d.path().join("c/config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&echoed).unwrap();
    assert_eq!(v["seed"], 6);
    assert_eq!(v["theta"], 0.3 * std::f64::consts::PI);
    assert_eq!(v["initializers"][0], "hemisphere");
    let replicas = std::fs::read_to_string(d.path().join("c/replicas.csv")).unwrap();
    assert_eq!(replicas.lines().count(), 3);
    assert!(replicas.contains(",6,hemisphere,") && replicas.contains(",7,cogwheel,"));

    std::fs::write(d.path().join("bad.json"), r#"{"sede": 1}"#).unwrap();
    assert_eq!(
        run(d.path(), &["optimize", "--config", "bad.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_writes_monotone_curve_and_resumes() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--pairs",
        "400",
        "--thetas",
        "pi/2,pi/5,pi/4",
        "--seed",
        "2",
        "--replicas",
        "2",
    ];
    args.extend(FAST);
    let mut straight = args.clone();
    straight.extend(["--out", "s"]);
    assert!(run(d.path(), &straight).status.success());
    let csv = std::fs::read_to_string(d.path().join("s/curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));

    let mut halted = args.clone();
    halted.extend([
        "--out",
        "r",
        "--halt-after-stages",
        "6",
        "--checkpoint-every",
        "4",
    ]);
    let mut interrupts = 0;
    loop {
        let o = run(d.path(), &halted);
        if o.status.success() {
            break;
        }
        assert_eq!(o.status.code(), Some(1));
        interrupts += 1;
        assert!(interrupts < 100);
    }
    assert!(interrupts > 0);
    assert_eq!(
        csv,
        std::fs::read_to_string(d.path().join("r/curve.csv")).unwrap()
    );
}
