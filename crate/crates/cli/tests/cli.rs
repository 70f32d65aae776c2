use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("oneshot-cli-{}-{name}", std::process::id()))
}

fn oneshot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oneshot")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn bundled_dequantize_example_holds() {
    let out = oneshot(&[
        "dequantize",
        "--channel",
        path(&data("channel_d3.json")),
        "--state",
        path(&data("state_d3.json")),
    ]);
    let v = json(&out);
    assert_eq!(v["schema"], "1.0");
    assert_eq!(v["command"], "dequantize");
    assert_eq!(v["result"]["d_a"], 3);
    assert!(v["result"]["margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["result"]["holds"], true);
    assert_eq!(v["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(v["result"]["bound"]["hmin_channel"]["bound_direction"].is_string());
    assert!(v.get("timestamp").is_none());
}

#[test]
fn monte_carlo_mode_is_seeded() {
    let args = |seed: &str| {
        oneshot(&[
            "dequantize",
            "--channel",
            path(&data("channel_d3.json")),
            "--state",
            path(&data("state_d3.json")),
            "--mode",
            "mc",
            "--samples",
            "200",
            "--seed",
            seed,
        ])
    };
    let (a, b) = (args("5"), args("5"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["result"]["lhs_kind"], "estimate");
    assert!(v["result"]["lhs_stderr"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let bad = scratch("bad.json");
    std::fs::write(&bad, "{\n  \"schmidt_weights\": [0.5, 0.5\n}\n").unwrap();
    let out = oneshot(&["dequantize", "--channel", path(&data("channel_d3.json")), "--state", path(&bad)]);
    std::fs::remove_file(&bad).ok();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column"), "{err}");
}

#[test]
fn unknown_schema_major_is_rejected() {
    let doc = scratch("schema.json");
    std::fs::write(&doc, r#"{"schema": "2.0", "schmidt_weights": [1.0]}"#).unwrap();
    let out = oneshot(&["entropy", "--state", path(&doc)]);
    std::fs::remove_file(&doc).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = oneshot(&["entropy", "--state", "/nonexistent/state.json"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let out = oneshot(&["entropy", "--state", path(&data("bell.json")), "--out", "/nonexistent/dir/x.json"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn dimension_cap_has_its_own_exit_code() {
    let out = Command::new(env!("CARGO_BIN_EXE_oneshot"))
        .args(["entropy", "--state", path(&data("bell.json"))])
        .env("ONESHOT_MAX_DIM", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn non_complementary_channel_is_refused() {
    let out = oneshot(&["dequantize", "--channel", path(&data("cq_d3.json")), "--state", path(&data("state_d3.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn entropy_of_bell_state() {
    let v = json(&oneshot(&["entropy", "--state", path(&data("bell.json"))]));
    assert!((v["result"]["value"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    let v = json(&oneshot(&["entropy", "--state", path(&data("bell.json")), "--kind", "hmax", "--b", ""]));
    assert!((v["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    for key in ["value", "eps", "bound_direction", "gap", "status"] {
        assert!(v["result"].get(key).is_some(), "{key}");
    }
}

#[test]
fn code_sim_reports_permutation_and_bound() {
    let v = json(&oneshot(&[
        "code-sim",
        "--channel",
        path(&data("cq_d3.json")),
        "--messages",
        "2",
        "--dist",
        path(&data("messages.json")),
    ]));
    let r = &v["result"];
    assert_eq!(r["examined"], 6);
    assert!(r["cycle_notation"].as_str().unwrap().starts_with('('));
    let (pe, bound) = (r["p_e"].as_f64().unwrap(), r["bound"]["value"].as_f64().unwrap());
    assert!(bound - 2.0 * pe >= -1e-8);
    assert!(r["bound"]["hmax_channel"]["status"].is_string());
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn code_sim_checks_message_count() {
    let out = oneshot(&[
        "code-sim",
        "--channel",
        path(&data("cq_d3.json")),
        "--messages",
        "3",
        "--dist",
        path(&data("messages.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_curve_csv() {
    let out = scratch("curve.csv");
    let run = || {
        let o = oneshot(&["hsw-rate", "--ensemble", path(&data("bb84.json")), "--n-max", "4", "--out", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(&out).unwrap()
    };
    let (first, second) = (run(), run());
    std::fs::remove_file(&out).ok();
    assert_eq!(first, second);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "n,log_type_class,hmax_term,projector_mass_term,rate_bits_per_use,holevo_reference");
    assert_eq!(lines.len(), 5);
    let ns: Vec<usize> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, vec![1, 2, 3, 4]);
    for l in &lines[1..] {
        let cells: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[4] <= cells[5] + 1e-6);
        assert!((cells[5] - 0.600876036693).abs() < 1e-12);
    }
}

#[test]
fn single_point_curve() {
    let out = oneshot(&["hsw-rate", "--ensemble", path(&data("bb84.json")), "--n-max", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}

#[test]
fn rate_rejects_eps_beyond_error_budget() {
    let out = oneshot(&["hsw-rate", "--ensemble", path(&data("bb84.json")), "--eps", "0.05", "--pe", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
}
