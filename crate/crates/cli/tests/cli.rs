use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uquant"))
        .args(args)
        .output()
        .expect("run uquant")
}

fn json(out: &[u8]) -> Value {
    serde_json::from_slice(out).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(out)))
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn assert_has_keys(v: &Value, expected: &[&str]) {
    let have = keys(v);
    for k in expected {
        assert!(have.contains(*k), "missing `{k}` in {have:?}");
    }
}

const REPORT_KEYS: &[&str] = &["config", "wall_time_seconds", "version", "timestamp"];

fn assert_error(out: &Output, code: i32, kind: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], kind);
    assert_eq!(err["error"]["exit_code"], code);
    assert!(err["error"]["message"]
        .as_str()
        .is_some_and(|m| !m.is_empty()));
}

#[test]
fn usage_errors_exit_2_with_structured_error() {
    assert_error(
        &uquant(&["estimate", "--p", "1.5", "--n", "10", "--seed", "1"]),
        2,
        "usage",
    );
    assert_error(
        &uquant(&[
            "estimate",
            "--process",
            "ar1:phi=1.2",
            "--p",
            "0.5",
            "--n",
            "10",
            "--seed",
            "1",
        ]),
        2,
        "usage",
    );
    assert_error(
        &uquant(&["estimate", "--p", "0.5", "--n", "10"]),
        2,
        "usage",
    );
    assert_error(&uquant(&["nonsense"]), 2, "usage");
    assert_error(
        &uquant(&["gen", "--n", "10", "--seed", "1", "--unknown", "x"]),
        2,
        "usage",
    );
    let out = uquant(&[
        "estimate",
        "--statistic",
        "quantile",
        "--kernel",
        "hl",
        "--p",
        "0.5",
        "--n",
        "10",
        "--seed",
        "1",
    ]);
    assert_error(&out, 2, "usage");
    let msg = json(&out.stderr)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(
        msg.contains("--kernel") && msg.contains("--statistic"),
        "{msg}"
    );
}

#[test]
fn computational_errors_exit_1() {
    // no known marginal for the linear process, hence no truth
    assert_error(
        &uquant(&[
            "rate-study",
            "--process",
            "lin:a=4",
            "--p",
            "0.5",
            "--n",
            "128..1024",
            "--reps",
            "500",
            "--seed",
            "1",
        ]),
        1,
        "computation",
    );
    // all values equal: zero density at the quantile
    let out = uquant(&[
        "coverage",
        "--process",
        "const:value=1",
        "--p",
        "0.5",
        "--n",
        "100",
        "--reps",
        "500",
        "--seed",
        "1",
    ]);
    assert_error(&out, 1, "computation");
    assert!(String::from_utf8_lossy(&out.stderr).contains("density"));
    // grid with too few sizes
    assert_error(
        &uquant(&[
            "rate-study",
            "--p",
            "0.5",
            "--n",
            "128..256",
            "--reps",
            "500",
            "--seed",
            "1",
        ]),
        1,
        "computation",
    );
}

#[test]
fn help_and_version_exit_0() {
    let out = uquant(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rate-study"));
    assert_eq!(uquant(&["selftest", "--version"]).status.code(), Some(0));
}

#[test]
fn estimate_schema() {
    let out = uquant(&[
        "estimate",
        "--process",
        "iid",
        "--kernel",
        "hl",
        "--p",
        "0.5",
        "--n",
        "500",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_has_keys(&v, &["estimate", "n", "p", "kernel", "seed", "method"]);
    assert_has_keys(&v, REPORT_KEYS);
    assert_eq!(v["method"], "fast");
    assert_eq!(v["kernel"], "hl");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["config"]["seed"], 3);
    let naive = json(
        &uquant(&[
            "estimate",
            "--process",
            "iid",
            "--kernel",
            "hl",
            "--p",
            "0.5",
            "--n",
            "500",
            "--seed",
            "3",
            "--method",
            "naive",
        ])
        .stdout,
    );
    assert_eq!(naive["method"], "naive");
    assert_eq!(naive["estimate"], v["estimate"]);
}

#[test]
fn rate_study_schema_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("result.json");
    let dump = dir.path().join("dump.csv");
    let out = uquant(&[
        "rate-study",
        "--process",
        "iid",
        "--p",
        "0.5",
        "--n",
        "128..1024",
        "--reps",
        "500",
        "--seed",
        "42",
        "--out",
        out_path.to_str().unwrap(),
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_has_keys(
        &v,
        &[
            "config",
            "per_n",
            "fitted_slope",
            "slope_se",
            "theoretical_exponent",
            "gamma",
        ],
    );
    let per_n = v["per_n"].as_array().unwrap();
    assert_eq!(per_n.len(), 4);
    assert_has_keys(&per_n[0], &["n", "rms_r", "mean_r", "q90_abs_r"]);
    let mut r = csv::Reader::from_path(&dump).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["n", "rep", "r"]);
    assert_eq!(r.records().count(), 4 * 500);
}

#[test]
fn gen_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let out = uquant(&[
        "gen",
        "--process",
        "gauss",
        "--n",
        "1000",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["x"]);
    let xs: Vec<f64> = r
        .records()
        .map(|rec| rec.unwrap()[0].parse().unwrap())
        .collect();
    assert_eq!(xs.len(), 1000);
    assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
    let sidecar = Path::new(&format!("{}.json", path.display())).to_path_buf();
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_has_keys(&meta, &["process", "n", "seed", "params", "ks"]);
    assert!(meta["ks"].as_f64().unwrap() < 0.06);

    // stdout form: CSV only
    let out = uquant(&["gen", "--n", "3", "--seed", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next(), Some("x"));
}

#[test]
fn coverage_and_lil_schemas() {
    let v = json(
        &uquant(&[
            "coverage",
            "--process",
            "ar1:phi=0.5",
            "--kernel",
            "hl",
            "--p",
            "0.5",
            "--n",
            "300",
            "--reps",
            "500",
            "--level",
            "0.95",
            "--seed",
            "7",
        ])
        .stdout,
    );
    assert_has_keys(
        &v,
        &["nominal", "empirical", "replicates", "n", "std_error"],
    );
    let e = v["empirical"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&e));

    let v = json(
        &uquant(&[
            "lil",
            "--process",
            "iid",
            "--statistic",
            "quantile",
            "--p",
            "0.5",
            "--nmax",
            "2048",
            "--seed",
            "9",
        ])
        .stdout,
    );
    assert_has_keys(
        &v,
        &["diagnostics", "fraction_consistent", "checkpoints", "nmax"],
    );
    assert_has_keys(
        &v["diagnostics"][0],
        &["max_statistic", "per_checkpoint", "sigma2", "consistent"],
    );
}

#[test]
fn selftest_passes() {
    let out = uquant(&["selftest"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out.stdout);
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "process = ar1:phi=0.5\nkernel = qn\np = 0.25\nn = 400\nseed = 1\n",
    )
    .unwrap();
    let v = json(
        &uquant(&[
            "estimate",
            "--config",
            conf.to_str().unwrap(),
            "--seed",
            "2",
        ])
        .stdout,
    );
    assert_eq!(v["seed"], 2);
    assert_eq!(v["kernel"], "qn");
    assert_eq!(v["config"]["process"], "ar1:phi=0.5");
}

#[test]
fn identical_config_gives_identical_results() {
    let args = [
        "coverage", "--p", "0.5", "--n", "200", "--reps", "500", "--seed", "3",
    ];
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("wall_time_seconds");
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(
        strip(json(&uquant(&args).stdout)),
        strip(json(&uquant(&args).stdout))
    );
}
