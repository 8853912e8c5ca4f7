use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use affine_euler::cli::{format_float, write_csv, MATRIX_HEADER, RESIDUAL_HEADER, TRAJECTORY_HEADER};
use serde_json::Value;

const SERRE: &str = "\
# free expansion
[model]
gamma = 2.0

[initial]
g1_0 = 1.0
alpha0 = 1.0
beta0 = 0.0
ep0 = 0.0

[interior]
preset = \"serre\"
horizon = 1e7
";

const SPINNING: &str = "\
[model]
gamma = 2.0
mu = 1.0
l = 1.0

[initial]
alpha0 = 0.1
beta0 = 0.2
a0 = 0.1
b0 = 0.2
c0 = -0.2
d0 = 0.1
gx0 = 0.5
gy0 = 0.5
gxy0 = 0.0

[integration]
t_end = 3.0
samples = 30
";

fn bin(dir: &Path, args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_affine-euler"));
    c.args(args).current_dir(dir).env_remove("OUT_DIR");
    c
}

fn run_in(dir: &Path, config: &str, args: &[&str]) -> i32 {
    fs::write(dir.join("run.toml"), config).unwrap();
    let mut all = args.to_vec();
    all.extend(["--config", "run.toml"]);
    bin(dir, &all).output().unwrap().status.code().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), SPINNING, &["simulate", "--out", "o"]), 0);
    let out = tmp.path().join("o");
    assert_eq!(header(&out.join("trajectory.csv")), TRAJECTORY_HEADER.join(","));
    assert_eq!(header(&out.join("matrix_trajectory.csv")), MATRIX_HEADER.join(","));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["config"]["model"]["mu"], 1.0);
    assert_eq!(m["config"]["integration"]["rtol"], 1e-10);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(files.contains(&"trajectory.csv") && files.contains(&"simulation.json"));
}

#[test]
fn first_row_is_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), SPINNING, &["simulate", "--out", "o"]), 0);
    let mut r = csv::Reader::from_path(tmp.path().join("o/trajectory.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 31);
    assert_eq!(&rows[0][..4], &[0.0, 1.0, 0.1, 0.2]);
    assert_eq!(rows[30][0], 3.0);
    // no scalar beta invariant with both friction and rotation
    assert!(rows.iter().all(|r| r[7].is_nan()));
}

#[test]
fn out_flag_beats_out_dir_variable() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), SPINNING).unwrap();
    let st = bin(tmp.path(), &["simulate", "--config", "run.toml"]).env("OUT_DIR", "env_out").status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(tmp.path().join("env_out/trajectory.csv").is_file());
    assert!(!tmp.path().join("out").exists());
    let st = bin(tmp.path(), &["simulate", "--config", "run.toml", "--out", "flag_out"])
        .env("OUT_DIR", "env_out2")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(tmp.path().join("flag_out/trajectory.csv").is_file());
    assert!(!tmp.path().join("env_out2").exists());
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), SPINNING, &["simulate", "--out", "a"]), 0);
    assert_eq!(run_in(tmp.path(), SPINNING, &["simulate", "--out", "b", "--sequential"]), 0);
    for f in ["trajectory.csv", "matrix_trajectory.csv", "simulation.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn csv_values_reread_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("v.csv");
    let rows = vec![
        vec![0.0, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, 1e16, -0.1],
        vec![f64::NAN, f64::INFINITY, 1e-5, 9.999999999999999e-6, 123456.789, -0.0, 2.0_f64.sqrt()],
    ];
    write_csv(&path, &["h", "dt", "res_mass", "res_momx", "res_momy", "res_entropy", "res_pressure"], rows.clone())
        .unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with(&RESIDUAL_HEADER.join(",")));
    let mut r = csv::Reader::from_path(&path).unwrap();
    for (rec, row) in r.records().zip(&rows) {
        for (s, &x) in rec.unwrap().iter().zip(row) {
            let y: f64 = s.parse().unwrap();
            assert!(y.to_bits() == x.to_bits() || (x.is_nan() && y.is_nan()), "{s}");
        }
    }
    assert_eq!(format_float(1e-7), "1e-7");
}

#[test]
fn empty_report_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("e.csv");
    write_csv(&path, &TRAJECTORY_HEADER, Vec::<Vec<f64>>::new()).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), format!("{}\n", TRAJECTORY_HEADER.join(",")));
}

#[test]
fn serre_interior_certifies() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), SERRE, &["interior", "--out", "o"]), 0);
    let rep: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/interior_report.json")).unwrap()).unwrap();
    assert_eq!(rep["report"]["verdict"], "CertifiedInterior");
    let c = rep["report"]["integral_c"]["partial"].as_f64().unwrap();
    assert!((c - 1.0).abs() < 1e-6, "{c}");
}

#[test]
fn blow_up_exits_two_with_bracket() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[initial]\nalpha0 = -2.0\nep0 = 0.0\n[integration]\nt_end = 3.0\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    let out = bin(tmp.path(), &["simulate", "--config", "run.toml", "--out", "o"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("blow-up") && err.contains("t in [0.4999"), "{err}");
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["exit_code"], 2);
    assert!(m["message"].as_str().unwrap().contains("blow-up"));
}

#[test]
fn configuration_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), "[model]\ngamma = 1.0\n", &["simulate", "--out", "o"]), 1);
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["status"], "error");
    assert!(m["message"].as_str().unwrap().contains("gamma"));
    assert_eq!(run_in(tmp.path(), "[integration]\nrtol = -1\n", &["simulate", "--out", "o"]), 1);
    assert_eq!(run_in(tmp.path(), "[model]\ncolour = 1\n", &["simulate", "--out", "o"]), 1);
    assert_eq!(run_in(tmp.path(), "[model\n", &["simulate", "--out", "o"]), 1);
    // closed form needs a frictionless model
    assert_eq!(run_in(tmp.path(), SPINNING, &["closed-form", "--out", "o"]), 1);
    assert_eq!(bin(tmp.path(), &["frobnicate"]).status().unwrap().code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker: PathBuf = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run_in(tmp.path(), SPINNING, &["simulate", "--out", "file/sub"]), 3);
    assert_eq!(
        bin(tmp.path(), &["simulate", "--config", "missing.toml", "--out", "o"]).status().unwrap().code(),
        Some(3)
    );
}

#[test]
fn outputs_stay_inside_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), SPINNING).unwrap();
    for cmd in ["simulate", "asymptotics", "fields", "audit"] {
        let st = bin(tmp.path(), &[cmd, "--config", "run.toml", "--out", "o"]).status().unwrap();
        assert_eq!(st.code(), Some(0), "{cmd}");
    }
    let mut top: Vec<String> =
        fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    top.sort();
    assert_eq!(top, ["o", "run.toml"]);
    for f in ["asymptotics.json", "fields_audit.csv", "fields.json", "residual.csv", "audit.json"] {
        assert!(tmp.path().join("o").join(f).is_file(), "{f}");
    }
    assert_eq!(header(&tmp.path().join("o/residual.csv")), RESIDUAL_HEADER.join(","));
    assert_eq!(header(&tmp.path().join("o/fields_audit.csv")), "t,m,E,J,G,F1,F2");
}
