use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levelcross::fields::{detuning_general, FieldConfig};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levelcross"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Parsed CSV: metadata comment, header, numeric-or-text cells.
struct Csv {
    meta: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Csv {
        assert!(!text.contains('\r'), "CRLF in output");
        let mut lines = text.lines();
        let meta = lines.next().expect("metadata line").to_string();
        assert!(meta.starts_with("# "), "{meta}");
        let header: Vec<String> = lines.next().expect("header").split(',').map(String::from).collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        for r in &rows {
            assert_eq!(r.len(), header.len());
        }
        Csv { meta, header, rows }
    }

    fn read(path: &Path) -> Csv {
        Csv::parse(&fs::read_to_string(path).unwrap())
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    fn text(&self, name: &str) -> Vec<String> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i].clone()).collect()
    }

    fn meta_value(&self, key: &str) -> String {
        let prefix = format!("{key}=");
        self.meta.split(' ').find_map(|kv| kv.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key}")).into()
    }
}

fn stdout_csv(out: &Output) -> Csv {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    Csv::parse(std::str::from_utf8(&out.stdout).unwrap())
}

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("structured error on stderr");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn detuning_sweep_writes_one_curve_per_value() {
    let dir = TempDir::new().unwrap();
    let base = path(&dir, "fig4.csv");
    let out = run(&["detuning", "--delta1-values", "1.3333333333333333,3,5", "--samples", "3", "-o", p(&base)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(!base.exists());
    for k in 1..=3 {
        assert!(path(&dir, &format!("fig4_{k}.csv")).exists());
    }
    let c = Csv::read(&path(&dir, "fig4_2.csv"));
    assert_eq!(c.header, ["t", "delta_t"]);
    assert_eq!(c.meta_value("curve"), "2");
    assert_eq!(c.meta_value("delta1").parse::<f64>().unwrap(), 3.0);
    let y = c.col("delta_t");
    let s2 = 2f64.sqrt();
    assert!((y[0] - (-3.0 - 4.0 * s2)).abs() < 1e-12, "{}", y[0]);
    assert!((y[1] - (-3.0 + 4.0 * s2)).abs() < 1e-12, "{}", y[1]);
    assert_eq!(y[0], y[2]);
    // the swept files leave no temporaries behind
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn detuning_sweep_combined_grid() {
    let out = run(&["detuning", "--delta1-values=-5,2,4", "--combined", "--samples", "11", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let data = v["data"].as_object().unwrap();
    assert_eq!(data.keys().collect::<Vec<_>>(), ["delta1", "t", "delta_t"]);
    for col in data.values() {
        assert_eq!(col.as_array().unwrap().len(), 33);
    }
    assert_eq!(v["data"]["delta1"][11], 2.0);
    assert!(v["meta"].get("delta1").is_none());
}

#[test]
fn detuning_sweep_needs_an_output_path() {
    let out = run(&["detuning", "--delta1-values", "2,3"]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_kind(&out), "config");
}

#[test]
fn general_detuning_matches_library() {
    // a = 16, Δ1 = −1 + 3Δ2/5, Δ2 = −15/16
    let d2 = -15.0 / 16.0;
    let d1 = -1.0 + 3.0 * d2 / 5.0;
    let (s1, s2) = (d1.to_string(), d2.to_string());
    let out =
        run(&["detuning", "--model", "general", "--a", "16", "--delta1", &s1, "--delta2", &s2, "--samples", "17"]);
    let c = stdout_csv(&out);
    let cfg = FieldConfig::new(1.0, 16.0, d1, d2, 1.0, 0.0).unwrap();
    for (t, y) in c.col("t").into_iter().zip(c.col("delta_t")) {
        assert_eq!(y, detuning_general(&cfg, t));
    }
}

#[test]
fn heun_map_tuple() {
    let c = stdout_csv(&run(&[
        "heun-map", "--model", "general", "--u0", "1", "--delta1", "2", "--delta2", "2", "--a", "3",
    ]));
    assert_eq!(c.header, ["sign", "a", "q", "alpha", "beta", "gamma", "delta", "epsilon", "alpha1"]);
    let s = 2f64.sqrt();
    let close = |x: f64, y: f64| (x - y).abs() < 1e-13 * (1.0 + y.abs());
    for (i, sg) in [1.0, -1.0].into_iter().enumerate() {
        assert!(close(c.col("gamma")[i], 1.0 + sg * 2.0 * s));
        assert!(close(c.col("beta")[i], sg * 2.0 * s));
        assert!(close(c.col("q")[i], 4.0 * (1.0 + sg * s)));
        assert!(close(c.col("alpha1")[i], 1.0 + sg * s));
        assert_eq!(c.col("delta")[i], 2.0);
        assert_eq!(c.col("epsilon")[i], -2.0);
        assert_eq!(c.col("alpha")[i], 0.0);
    }
}

#[test]
fn compare_fig5_panel_passes() {
    let c = stdout_csv(&run(&["compare", "--delta1", "2", "--u0", "3.5"]));
    assert_eq!(c.text("verdict"), ["PASS"]);
    assert!(c.col("max_deviation")[0] <= 1e-8);
}

#[test]
fn compare_sweep_keeps_order_and_fails_with_code_4() {
    let dir = TempDir::new().unwrap();
    let out_path = path(&dir, "cmp.csv");
    let out = run(&["compare", "--delta1", "2", "--u0-values", "0.3,1,2,3.5", "-o", p(&out_path)]);
    assert_eq!(code(&out), 0);
    let c = Csv::read(&out_path);
    assert_eq!(c.col("u0"), [0.3, 1.0, 2.0, 3.5]);
    assert!(c.text("verdict").iter().all(|v| v == "PASS"));

    let out = run(&["compare", "--delta1", "2", "--u0-values", "0.3,1", "--threshold", "1e-18", "-o", p(&out_path)]);
    assert_eq!(code(&out), 4);
    let c = Csv::read(&out_path);
    assert_eq!(c.text("verdict"), ["FAIL", "FAIL"]);
}

#[test]
fn closed_form_agrees_with_simulation() {
    for extra in [
        &["--model", "n2", "--u0", "1.4", "--delta1", "4.2", "--delta", "1.3", "--t0", "0.4"][..],
        &["--model", "n3", "--u0", "0.5", "--delta1=-3"][..],
    ] {
        let mut args = vec!["closed-form", "--periods", "2", "--samples", "101", "--initial", "excited"];
        args.extend_from_slice(extra);
        let exact = stdout_csv(&run(&args));
        args[0] = "simulate";
        args.extend_from_slice(&["--rtol", "1e-12", "--atol", "1e-14"]);
        let numeric = stdout_csv(&run(&args));
        assert_eq!(exact.col("t"), numeric.col("t"));
        for name in ["re_a1", "im_a1", "re_a2", "im_a2"] {
            let d = exact.col(name).iter().zip(numeric.col(name)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d < 1e-8, "{extra:?} {name}: {d}");
        }
        for n in numeric.col("norm") {
            assert!((n - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn floquet_report_in_physical_units() {
    // scaled (U0, Δ1) = (1, 2) at Δ = 2
    let c = stdout_csv(&run(&["floquet", "--u0", "2", "--delta1", "4", "--delta", "2"]));
    let s = 2f64.sqrt();
    assert!((c.col("lambda1")[0] - 2.0 * (1.0 - s)).abs() < 1e-12);
    assert!((c.col("lambda2")[0] - 2.0 * (1.0 + s)).abs() < 1e-12);
    assert!(c.col("residual_mod_delta")[0] < 1e-8);
    assert!(c.col("modulus_defect")[0] < 1e-8);
    assert_eq!(c.meta_value("scaled_delta1").parse::<f64>().unwrap(), 2.0);
}

#[test]
fn floquet_rejects_other_models() {
    let out = run(&["floquet", "--model", "general", "--u0", "1", "--a", "3", "--delta1", "2", "--delta2", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn termination_table() {
    let c = stdout_csv(&run(&["terminate", "--u0", "1", "--delta1", "2", "--n-max", "3"]));
    assert_eq!(c.col("n"), [0.0, 1.0, 2.0, 3.0]);
    assert_eq!(c.text("integrability"), ["trivial", "trivial", "unconditional", "conditional"]);
    let a: f64 = c.text("admissible_a")[2].parse().unwrap();
    assert!((a - 3.0).abs() < 1e-10);
}

#[test]
fn output_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    for fmt in ["csv", "json"] {
        let mut seen = Vec::new();
        for k in 0..2 {
            let f = path(&dir, &format!("sim{k}.{fmt}"));
            let out =
                run(&["simulate", "--u0", "1", "--delta1", "2", "--periods", "3", "--samples", "50", "-o", p(&f)]);
            assert_eq!(code(&out), 0);
            seen.push(fs::read(&f).unwrap());
        }
        assert_eq!(seen[0], seen[1]);
    }
    let json: Value = serde_json::from_slice(&fs::read(path(&dir, "sim0.json")).unwrap()).unwrap();
    assert_eq!(json["data"]["pop2"].as_array().unwrap().len(), 50);
}

#[test]
fn csv_values_round_trip_with_17_digits() {
    let out = run(&["simulate", "--u0", "0.3", "--delta1", "2", "--samples", "7"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let c = Csv::parse(&text);
    assert!(c.meta.contains(&format!("tool=levelcross {}", env!("CARGO_PKG_VERSION"))));
    for row in &c.rows {
        for cell in row {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{cell}");
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), *cell);
        }
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.toml");
    fs::write(
        &cfg,
        "[field]\nmodel = \"n2\"\nu0 = 1.0\ndelta1 = 2.0\ndelta = 1.5\n\n[run]\nsamples = 5\nperiods = 2\nformat = \"json\"\n",
    )
    .unwrap();
    let out = run(&["--config", p(&cfg), "detuning", "--delta1", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["meta"]["delta1"], 3.0);
    assert_eq!(v["meta"]["delta"], 1.5);
    assert_eq!(v["meta"]["scaled_delta1"], 2.0);
    assert_eq!(v["data"]["t"].as_array().unwrap().len(), 5);
    let t_end = v["meta"]["t_end"].as_f64().unwrap();
    assert!((t_end - 2.0 * 2.0 * std::f64::consts::PI / 1.5).abs() < 1e-12);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.toml");
    fs::write(&bad, "[field]\nu0 = 1.0\nfrequency = 3.0\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--u0", "1", "--delta1", "2", "--samples", "1"],
        vec!["simulate", "--u0", "1", "--delta1", "2", "--t-start", "1", "--t-end", "1"],
        vec!["simulate", "--u0", "1", "--delta1", "2", "--t-end", "3", "--periods", "2"],
        vec!["simulate", "--u0", "1", "--delta1", "0.5"],
        vec!["simulate", "--u0", "1", "--delta1", "2", "--a", "3"],
        vec!["simulate", "--model", "general", "--u0", "1", "--delta1", "2"],
        vec!["simulate", "--model", "n3", "--u0", "1", "--delta1", "2", "--delta", "2"],
        vec!["--config", p(&bad), "simulate", "--delta1", "2"],
        vec!["--config", "/nonexistent/run.toml", "simulate"],
    ];
    for args in cases {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert_eq!(error_kind(&out), "config", "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_3_without_output() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "cf.csv");
    // Δ2 not an integer: the Beta series does not terminate and cannot reach |z| = √a.
    let out = run(&[
        "closed-form",
        "--model",
        "general",
        "--u0",
        "0.7",
        "--a",
        "0.09",
        "--delta1",
        "0.3",
        "--delta2",
        "0.55",
        "-o",
        p(&f),
    ]);
    assert_eq!(code(&out), 3);
    assert_eq!(error_kind(&out), "numerical");
    assert!(!f.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "missing/sub/out.csv");
    let out = run(&["simulate", "--u0", "1", "--delta1", "2", "--samples", "3", "-o", p(&f)]);
    assert_ne!(code(&out), 0);
    assert_eq!(error_kind(&out), "io");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}
