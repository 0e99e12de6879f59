use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_sampen");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &Value) {
    let envelope = schema("envelope");
    let errs: Vec<String> = envelope.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "envelope: {errs:?}");
    let cmd = v["command"].as_str().unwrap();
    let errs: Vec<String> = schema(cmd).iter_errors(&v["payload"]).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "{cmd} payload: {errs:?}\n{}", v["payload"]);
}

fn payload_without_times(mut v: Value) -> Value {
    let o = v.as_object_mut().unwrap();
    o.remove("started_at");
    o.remove("finished_at");
    v
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// Two labelled groups of eight signals each.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Self { dir };
        let a = f.path("a.csv");
        let b = f.path("b.csv");
        let sa = run(&["synth", "ar1", "--n", "8", "--len", "120", "--label", "ar", "--seed", "1", "--csv-out", a.to_str().unwrap()]);
        let sb = run(&["synth", "white-noise", "--n", "8", "--len", "120", "--label", "wn", "--seed", "2", "--csv-out", b.to_str().unwrap()]);
        assert_eq!(code(&sa), 0);
        assert_eq!(code(&sb), 0);
        let text_a = std::fs::read_to_string(&a).unwrap();
        let text_b = std::fs::read_to_string(&b).unwrap();
        let body_b: String = text_b.lines().skip(1).map(|l| format!("{l}\n")).collect();
        std::fs::write(f.path("ab.csv"), format!("{text_a}{body_b}")).unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["estimate", "--m", "2"])), 2);
    assert_eq!(code(&run(&["synth", "ar1", "--phi", "abc"])), 2);
}

#[test]
fn synth_writes_long_csv_to_stdout() {
    let out = run(&["synth", "white-noise", "--n", "2", "--len", "5", "--label", "x"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "signal_id,label,t,value");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("wn-0,x,0,"));
    // 17 significant digits.
    let value = lines[1].rsplit(',').next().unwrap();
    let mantissa = value.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn unstable_phi_is_a_usage_error() {
    assert_eq!(code(&run(&["synth", "ar1", "--phi", "1.0"])), 2);
}

#[test]
fn missing_and_malformed_input_are_data_errors() {
    let f = Fixture::new();
    assert_eq!(code(&run(&["estimate", "--input", &f.arg("nope.csv"), "--m", "2", "--r", "0.2"])), 3);
    std::fs::write(f.path("bad.csv"), "signal_id,label,t,value\ns,a,0,1.0\ns,a,0,2.0\n").unwrap();
    assert_eq!(code(&run(&["estimate", "--input", &f.arg("bad.csv"), "--m", "2", "--r", "0.2"])), 3);
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let f = Fixture::new();
    let ab = f.arg("ab.csv");
    assert_eq!(code(&run(&["estimate", "--input", &ab, "--m", "0", "--r", "0.2"])), 2);
    assert_eq!(code(&run(&["estimate", "--input", &ab, "--m", "2", "--r", "-1"])), 2);
    assert_eq!(code(&run(&["estimate", "--input", &ab, "--m", "2", "--r", "0.2", "--q", "1.5"])), 2);
    assert_eq!(code(&run(&["optimize", "--input", &ab, "--r-lo", "0.5", "--r-hi", "0.1"])), 2);
}

#[test]
fn all_infeasible_search_exits_4() {
    let f = Fixture::new();
    // Radii this small leave no template matches in 120 samples.
    let out = run(&[
        "optimize", "--input", &f.arg("ab.csv"), "--no-preprocess", "--trials", "4", "--replicates", "10",
        "--r-lo", "0.0001", "--r-hi", "0.0002", "--m-max", "3",
    ]);
    assert_eq!(code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_needs_exactly_two_labels() {
    let f = Fixture::new();
    let mut text = std::fs::read_to_string(f.path("ab.csv")).unwrap();
    for t in 0..120 {
        text.push_str(&format!("extra,third,{t},{}\n", (t as f64 * 0.7).sin()));
    }
    std::fs::write(f.path("abc.csv"), text).unwrap();
    let out = run(&["compare", "--input", &f.arg("abc.csv"), "--m", "2", "--r", "0.2"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn every_json_command_matches_its_schema() {
    let f = Fixture::new();
    let ab = f.arg("ab.csv");
    let cases: Vec<Vec<String>> = vec![
        vec!["optimize", "--input", &ab, "--trials", "12", "--replicates", "20"],
        vec!["optimize", "--input", &ab, "--trials", "12", "--replicates", "20", "--no-preprocess", "--q", "0.5"],
        vec!["estimate", "--input", &ab, "--m", "2", "--r", "0.2"],
        vec!["estimate", "--input", &ab, "--m", "1", "--r", "0.3", "--q", "0.5", "--replicates", "20"],
        vec!["estimate", "--input", &ab, "--m", "2", "--r", "0.2", "--fuzzen"],
        vec!["estimate", "--input", &ab, "--m", "2", "--r", "0.001"],
        vec!["compare", "--input", &ab, "--m", "2", "--r", "0.2", "--replicates", "20"],
        vec!["compare", "--input", &ab, "--trials", "12", "--replicates", "20", "--alternative", "less"],
        vec!["preprocess", "--input", &ab, "--csv-out", &f.arg("kept.csv")],
        vec!["baseline", "--input", &ab, "--method", "sampeneff", "--draws", "100"],
        vec!["baseline", "--input", &ab, "--method", "convergence", "--m", "2", "--draws", "100"],
        vec!["baseline", "--input", &ab, "--method", "standard", "--fuzzen", "--draws", "100"],
        vec!["synth", "ar1", "--n", "3", "--len", "50", "--csv-out", &f.arg("s.csv")],
        vec!["varbench", "--population", "200", "--subsample", "10", "--repeats", "2", "--replicates", "20"],
        vec!["compare-methods", "--count", "4", "--trials", "12", "--replicates", "20", "--draws", "100"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let v = json(&run(&args));
        assert_eq!(v["command"], args[0]);
        assert_valid(&v);
    }
    assert!(std::fs::read_to_string(f.path("kept.csv")).unwrap().starts_with("signal_id,label,t,value"));
}

#[test]
fn seeded_runs_are_reproducible_across_thread_counts() {
    let f = Fixture::new();
    let ab = f.arg("ab.csv");
    let base = ["optimize", "--input", &ab, "--trials", "12", "--replicates", "20", "--seed", "5"];
    let one = json(&run(&[&base[..], &["--threads", "1"]].concat()));
    let two = json(&run(&[&base[..], &["--threads", "3"]].concat()));
    assert_eq!(one["payload"], two["payload"]);
    let again = json(&run(&[&base[..], &["--threads", "1"]].concat()));
    assert_eq!(payload_without_times(one.clone()), payload_without_times(again));
    let other = json(&run(&["optimize", "--input", &ab, "--trials", "12", "--replicates", "20", "--seed", "6"]));
    assert_ne!(one["payload"]["result"]["history"], other["payload"]["result"]["history"]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let f = Fixture::new();
    let ab = f.arg("ab.csv");
    let cfg = f.path("run.toml");
    std::fs::write(&cfg, format!("seed = 9\n[estimate]\ninput = \"{ab}\"\nm = 1\nr = 0.3\n")).unwrap();
    let v = json(&run(&["estimate", "--config", cfg.to_str().unwrap(), "--r", "0.25"]));
    assert_eq!(v["payload"]["m"], 1);
    assert_eq!(v["payload"]["r"].as_f64(), Some(0.25));
    assert_eq!(v["config"]["seed"], "9");

    let plain = f.path("run.cfg");
    std::fs::write(&plain, format!("[estimate]\ninput={ab}\nm=2\nr=0.2\nraw=true\n")).unwrap();
    let v = json(&run(&["--config", plain.to_str().unwrap(), "estimate", "--m", "3"]));
    assert_eq!(v["payload"]["m"], 3);
    assert_eq!(v["payload"]["signals"][0]["normalized"], false);

    std::fs::write(&plain, "[estimate]\nnot_an_option=1\n").unwrap();
    assert_eq!(code(&run(&["estimate", "--config", plain.to_str().unwrap()])), 2);
}

#[test]
fn wide_csv_gives_the_same_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let long = dir.path().join("l.csv");
    let wide = dir.path().join("w.csv");
    let mut l = String::from("signal_id,label,t,value\n");
    let mut w = String::from("signal_id,label,x0,x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,x11\n");
    for s in 0..3 {
        let vals: Vec<f64> = (0..12).map(|t| ((t * (s + 3)) as f64 * 0.91).sin() + 0.1 * t as f64).collect();
        for (t, v) in vals.iter().enumerate() {
            l.push_str(&format!("s{s},g,{t},{v:?}\n"));
        }
        let row: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
        w.push_str(&format!("s{s},g,{}\n", row.join(",")));
    }
    std::fs::write(&long, l).unwrap();
    std::fs::write(&wide, w).unwrap();
    let a = json(&run(&["estimate", "--input", long.to_str().unwrap(), "--m", "1", "--r", "0.5"]));
    let b = json(&run(&["estimate", "--input", wide.to_str().unwrap(), "--m", "1", "--r", "0.5"]));
    assert_eq!(a["payload"]["input_layout"], "long");
    assert_eq!(b["payload"]["input_layout"], "wide");
    assert_eq!(a["payload"]["signals"], b["payload"]["signals"]);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(&[
        "varbench", "--population", "200", "--subsample", "10", "--repeats", "2", "--replicates", "10",
        "--output", out_path.to_str().unwrap(), "--csv-out", dir.path().join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_valid(&v);
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}
