use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use dyadnet::data::save_edge_list;
use dyadnet::EdgeSchema;
use dyadnet_cli::config::{RunConfig, Source};
use dyadnet_sim::{generate_design, Estimator, FeSetting, SimDesign};

fn dyadnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadnet")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A simulated dense network with one covariate, written as an edge list.
fn fixture(dir: &Path, n: usize) -> PathBuf {
    let design = SimDesign::standard(FeSetting::Dense, n, 1, 11, vec![Estimator::Mle]);
    let (data, _) = generate_design(&design, 0);
    let path = dir.join("edges.csv");
    save_edge_list(&data, &path, &EdgeSchema::default()).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest_config(out: &Path) -> RunConfig {
    serde_json::from_value(json(&out.join("manifest.json"))["config"].clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_writes_results_summary_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path(), 20);
    let out = tmp.path().join("est");
    let o = dyadnet(&["estimate", "--input", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let r = json(&out.join("results.json"));
    assert_eq!(r["command"], "estimate");
    assert_eq!(r["covariates"][0], "x");
    let beta = r["inference"]["beta"][0].as_f64().unwrap();
    let se = r["inference"]["se"][0].as_f64().unwrap();
    assert!(beta.is_finite() && se > 0.0);
    assert_eq!(r["diagnostics"]["converged"], true);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("covariate,estimate,se,t,p"));
    assert!(lines.next().unwrap().starts_with("x,"));

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["tool"], "dyadnet");
    assert_eq!(m["config"]["command"], "estimate");
    assert_eq!(m["provenance"]["input"], "flag");
    assert_eq!(m["provenance"]["family"], "default");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = dyadnet(&["estimate", "--no-such-flag", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--no-such-flag"));
}

#[test]
fn unknown_config_key_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "reps = 10\nrepz = 3\n").unwrap();
    let out = tmp.path().join("o");
    let o = dyadnet(&["partition-dump", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("repz"), "{}", stderr(&o));
}

#[test]
fn bad_enum_values_and_missing_input_are_input_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    for args in [
        vec!["estimate", "--family", "cauchit"],
        vec!["simulate", "--design", "medium"],
        vec!["jackknife", "--variant", "triple"],
        vec!["estimate"],
        vec!["estimate", "--input", "/nonexistent/edges.csv"],
        vec!["estimate", "--jobs", "0"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", s(&out)]);
        let o = dyadnet(&a);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}");
    }

    let input = fixture(tmp.path(), 8);
    let o = dyadnet(&["estimate", "--input", s(&input), "--outcome-col", "link", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("link"));
}

#[test]
fn non_convergence_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path(), 20);
    let out = tmp.path().join("o");
    let o = dyadnet(&["estimate", "--input", s(&input), "--max-iter", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("converge"));
    // The manifest is written before any work, so failed runs are still auditable.
    assert!(out.join("manifest.json").exists());
}

#[test]
fn empty_config_resolves_to_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = tmp.path().join("o");
    let o = dyadnet(&["partition-dump", "--config", s(&cfg), "--out", s(&out), "--n", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let got = manifest_config(&out);
    let (mut want, _) = RunConfig::resolve("partition-dump", &Default::default(), &Default::default());
    want.out = out.clone();
    want.n = 7;
    assert_eq!(got, want);

    let prov: std::collections::BTreeMap<String, Source> =
        serde_json::from_value(json(&out.join("manifest.json"))["provenance"].clone()).unwrap();
    for (k, v) in &prov {
        let expected = if k == "out" || k == "n" { Source::Flag } else { Source::Default };
        assert_eq!(*v, expected, "{k}");
    }
}

#[test]
fn flags_override_file_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "reps = 100\nseed = 7\ndesign = \"sqrt\"\n").unwrap();
    let out = tmp.path().join("o");
    let o = dyadnet(&["partition-dump", "--config", s(&cfg), "--reps", "50", "--n", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = manifest_config(&out);
    assert_eq!((got.reps, got.seed, got.design.as_str()), (50, 7, "sqrt"));
    let prov = &json(&out.join("manifest.json"))["provenance"];
    assert_eq!(prov["reps"], "flag");
    assert_eq!(prov["seed"], "file");
    assert_eq!(prov["tol"], "default");
}

#[test]
fn test_command_defaults_to_the_jackknife_bootstrap() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path(), 12);
    let out = tmp.path().join("o");
    let o = dyadnet(&["test", "--input", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = manifest_config(&out);
    assert_eq!((cfg.n_boot, cfg.bootstrap_jackknife), (200, true));
    let r = json(&out.join("results.json"));
    assert_eq!(r["bootstrap"]["draws"], 200);
    assert_eq!(r["bootstrap"]["jackknife"], true);
    assert!(r["bootstrap"]["se"].as_f64().unwrap() > 0.0);
    assert!(r["effect"]["t_jackknife"].as_f64().unwrap().is_finite());
}

#[test]
fn manifest_reload_reproduces_the_configuration_and_results() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path(), 16);
    let first = tmp.path().join("a");
    let o = dyadnet(&[
        "jackknife",
        "--input",
        s(&input),
        "--variant",
        "weighted",
        "--seed",
        "3",
        "--out",
        s(&first),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let second = tmp.path().join("b");
    let manifest = first.join("manifest.json");
    let o = dyadnet(&["jackknife", "--config", s(&manifest), "--out", s(&second)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut a = manifest_config(&first);
    let b = manifest_config(&second);
    a.out = second.clone();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(first.join("results.json")).unwrap(),
        fs::read(second.join("results.json")).unwrap()
    );
}

fn results_for_jobs(cmd: &[&str], jobs: &str, dir: &Path) -> Vec<u8> {
    let out = dir.join(format!("{}-{jobs}", cmd[0]));
    let mut args = cmd.to_vec();
    args.extend(["--jobs", jobs, "--out", s(&out)]);
    let o = dyadnet(&args);
    assert_eq!(code(&o), 0, "{cmd:?}: {}", stderr(&o));
    fs::read(out.join("results.json")).unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path(), 13);
    let input = s(&input);
    let commands: [&[&str]; 4] = [
        &["jackknife", "--input", input, "--variant", "split"],
        &["jackknife", "--input", input, "--relabels", "3", "--leave-l", "2"],
        &["effects", "--input", input, "--effect", "marginal:x", "--n-boot", "20", "--bootstrap-refit"],
        &["simulate", "--n", "10", "--reps", "4", "--estimators", "mle,j,wj,ss,d", "--design", "mid"],
    ];
    for cmd in commands {
        let one = results_for_jobs(cmd, "1", tmp.path());
        let three = results_for_jobs(cmd, "3", tmp.path());
        assert!(one == three, "{cmd:?} differs across --jobs");
    }
}

#[test]
fn simulate_writes_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = dyadnet(&["simulate", "--n", "12", "--reps", "3", "--estimators", "mle,j,wj", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.starts_with("statistic,MLE,J,WJ\n"));
    assert_eq!(table.lines().count(), 6);
    let reps = fs::read_to_string(out.join("reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 3 * 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Bias (mean)"));
    let r = json(&out.join("results.json"));
    assert_eq!(r["summary"]["n_reps"], 3);
}

#[test]
fn partition_dump_covers_every_edge_once() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    let o = dyadnet(&["partition-dump", "--n", "7", "--leave-l", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&out.join("results.json"));
    assert_eq!(r["n_sets"], 3);
    assert_eq!(r["valid"], true);

    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for line in csv.lines().skip(1) {
        let f: Vec<usize> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(f[1] != f[2]);
        assert!(seen.insert((f[1], f[2])), "edge listed twice: {line}");
    }
    assert_eq!(seen.len(), 7 * 6);

    let o = dyadnet(&["partition-dump", "--n", "7", "--leave-l", "4", "--out", s(&out)]);
    assert_eq!(code(&o), 2, "l must divide N-1");
}
