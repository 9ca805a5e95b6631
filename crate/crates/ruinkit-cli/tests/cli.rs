//! End-to-end behavior of the binary: exit codes, config handling, output
//! shapes, and bitwise determinism across thread counts.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ruinkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    bin()
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ruinkit-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn exposure_ruin_reports_the_closed_form() {
    let doc = json_of(&run(&["ruin", "--p", "1e-4", "--n", "10000"]));
    let p = doc["report"]["ruin_probability"].as_f64().unwrap();
    assert!((p - 0.6321389535670295).abs() < 1e-9, "got {p}");
    assert_eq!(doc["config"]["subcommand"], "ruin");
    assert_eq!(doc["config"]["parameters"]["mode"], "exposure");
    assert_eq!(doc["config"]["seed"], 0);
    assert_eq!(doc["config"]["replicates"], 100_000);
}

#[test]
fn gambler_mode_reports_the_closed_form() {
    let doc = json_of(&run(&["ruin", "--a", "1", "--upper", "2", "--p-up", "0.6"]));
    let p = doc["report"]["ruin_probability"].as_f64().unwrap();
    assert!((p - 0.4).abs() < 1e-12, "got {p}");
}

#[test]
fn quadrant_places_fat_systemic_in_the_policy_domain() {
    let doc = json_of(&run(&["quadrant", "--tail", "fat", "--scope", "systemic"]));
    assert_eq!(doc["report"]["quadrant"], "IV");
    assert_eq!(doc["report"]["pp_applies"], true);

    let doc = json_of(&run(&["quadrant", "--tail", "thin", "--scope", "local"]));
    assert_eq!(doc["report"]["quadrant"], "I");
    assert_eq!(doc["report"]["pp_applies"], false);
}

#[test]
fn unknown_flag_exits_2_and_names_it() {
    let out = run(&["ruin", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "diagnostic must be one line: {err}");
    assert!(err.contains("--frobnicate"), "diagnostic: {err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let path = scratch("unknown-key.json");
    fs::write(&path, r#"{"subcommand":"ruin","parameters":{"p":0.1,"n":3,"frob":1}}"#).unwrap();
    let out = run(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("frob"), "diagnostic: {err}");
}

#[test]
fn config_and_argv_subcommands_must_agree() {
    let path = scratch("mismatch.json");
    fs::write(&path, r#"{"subcommand":"sweep"}"#).unwrap();
    let out = run(&["ruin", "--p", "0.1", "--n", "2", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep") && err.contains("ruin"), "diagnostic: {err}");
}

#[test]
fn missing_subcommand_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file_values() {
    let path = scratch("override.json");
    fs::write(
        &path,
        r#"{"subcommand":"ruin","parameters":{"p":1e-4,"n":10000},"seed":9,"replicates":777}"#,
    )
    .unwrap();
    let doc = json_of(&run(&["--config", path.to_str().unwrap(), "--seed", "3"]));
    assert_eq!(doc["config"]["seed"], 3, "flag wins");
    assert_eq!(doc["config"]["replicates"], 777, "file value survives");
    let doc = json_of(&run(&[
        "ruin",
        "--n",
        "1",
        "--config",
        path.to_str().unwrap(),
    ]));
    assert_eq!(doc["config"]["parameters"]["n"], 1);
    assert_eq!(doc["config"]["parameters"]["p"], 1e-4);
}

#[test]
fn csv_outputs_echo_config_and_use_the_documented_headers() {
    let out = run(&["sweep", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# ruinkit config: "), "head: {head}");
    let echoed: Value =
        serde_json::from_str(head.strip_prefix("# ruinkit config: ").unwrap()).unwrap();
    assert_eq!(echoed["subcommand"], "sweep");
    assert_eq!(echoed["format"], "csv");
    assert_eq!(
        lines.next().unwrap(),
        "family,mu,sigma,ir,k,per_period_ruin,horizon_ruin"
    );
    // Three default families over the four default scales.
    assert_eq!(lines.count(), 12);
}

#[test]
fn max_to_sum_csv_is_log2_thinned() {
    let out = run(&[
        "tails", "--op", "maxsum", "--family", "exponential", "--sample-size", "4096",
        "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    lines.next();
    assert_eq!(lines.next().unwrap(), "n,r_np");
    let ns: Vec<u64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let expected: Vec<u64> = (0..=12).map(|k| 1u64 << k).collect();
    assert_eq!(ns, expected, "prefix points 1,2,4,...,4096");
}

#[test]
fn summax_csv_has_the_documented_header() {
    let out = run(&[
        "tails", "--op", "summax", "--family", "pareto", "--alpha", "1", "--xmin", "1",
        "--n", "4", "--x", "100", "--replicates", "20000", "--format", "csv",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "n,x,ratio_a,ratio_b");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn cascade_csv_is_one_size_per_replicate() {
    let out = run(&[
        "cascade", "--m", "0.5", "--replicates", "500", "--seed", "11", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    lines.next();
    assert_eq!(lines.next().unwrap(), "size");
    let sizes: Vec<u64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(sizes.len(), 500);
    assert!(sizes.iter().all(|&s| s >= 1));
}

#[test]
fn csv_is_refused_where_no_table_is_defined() {
    let out = run(&["quadrant", "--tail", "thin", "--scope", "local", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["ruin", "--p", "0.1", "--n", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1_with_the_module_text() {
    let x = scratch("diff-x.txt");
    let y = scratch("diff-y.txt");
    fs::write(&x, "1.0\n2.0\n3.0\n").unwrap();
    fs::write(&y, "1.0\n2.0\n").unwrap();
    let out = run(&[
        "compare", "--op", "diff",
        "--x", x.to_str().unwrap(),
        "--y", y.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("equal lengths"), "diagnostic: {err}");
}

#[test]
fn paired_difference_on_files_matches_hand_arithmetic() {
    let x = scratch("hand-x.txt");
    let y = scratch("hand-y.txt");
    fs::write(&x, "1.0\n2.0\n3.0\n4.0\n").unwrap();
    fs::write(&y, "0.5\n1.0\n1.5\n2.0\n").unwrap();
    let doc = json_of(&run(&[
        "compare", "--op", "diff",
        "--x", x.to_str().unwrap(),
        "--y", y.to_str().unwrap(),
    ]));
    // Differences 0.5, 1.0, 1.5, 2.0: mean 1.25, sample variance 5/12.
    let mean = doc["report"]["correct"]["mean"].as_f64().unwrap();
    let var = doc["report"]["correct"]["variance"].as_f64().unwrap();
    assert!((mean - 1.25).abs() < 1e-12);
    assert!((var - 5.0 / 12.0).abs() < 1e-12);
}

#[test]
fn output_flag_writes_the_file_and_keeps_stdout_quiet() {
    let path = scratch("report.json");
    let out = run(&[
        "ruin", "--p", "0.01", "--n", "10",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["config"]["output"], path.to_str().unwrap());
    assert!(doc["report"]["ruin_probability"].is_f64());
}

#[test]
fn simulation_output_is_byte_identical_across_thread_counts() {
    let walk_config = scratch("walk-det.json");
    fs::write(
        &walk_config,
        r#"{"subcommand":"ruin","parameters":{"walk":{"start":5,"step":{"family":"bernoulli","loc":-1,"scale":2,"alpha":0.5},"upper_barrier":10}},"replicates":4000,"seed":21}"#,
    )
    .unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--config", walk_config.to_str().unwrap()],
        vec!["cascade", "--m", "0.8", "--replicates", "3000", "--seed", "5", "--format", "csv"],
        vec!["compare", "--op", "twotest", "--n-per-group", "8", "--effect-x", "0.3", "--replicates", "3000", "--seed", "9"],
        vec![
            "tails", "--op", "conv", "--family", "pareto", "--alpha", "2", "--xmin", "1",
            "--replicates", "200000", "--seed", "13", "--format", "csv",
        ],
    ];
    for args in cases {
        let one = run_with_threads(&args, "1");
        let four = run_with_threads(&args, "4");
        let again = run_with_threads(&args, "4");
        assert!(one.status.success(), "{args:?}: {}", String::from_utf8_lossy(&one.stderr));
        assert_eq!(one.stdout, four.stdout, "thread count changed output for {args:?}");
        assert_eq!(four.stdout, again.stdout, "rerun changed output for {args:?}");
    }
}

#[test]
fn harm_table_files_are_accepted_on_the_command_line() {
    let table = scratch("harm-table.csv");
    fs::write(&table, "x,h\n0,0\n1,0\n2,1\n4,9\n").unwrap();
    let doc = json_of(&run(&[
        "fragility", "--op", "probe",
        "--harm", &format!("table:{}", table.display()),
        "--x", "2", "--delta", "1",
    ]));
    // Piecewise-linear through (1,0),(2,1),(4,9): h(1)+h(3)-2h(2) = 0+5-2.
    let v = doc["report"]["second_difference"].as_f64().unwrap();
    assert!((v - 3.0).abs() < 1e-12, "got {v}");
    assert_eq!(doc["report"]["convex"], true);
}

#[test]
fn diagnose_reports_a_tail_class_on_synthetic_data() {
    let doc = json_of(&run(&[
        "tails", "--family", "exponential", "--sample-size", "30000", "--replicates", "50000",
    ]));
    assert_eq!(doc["report"]["tail_class"], "thin");
    assert_eq!(doc["config"]["parameters"]["op"], "diagnose");
    assert!(doc["report"]["hill"]["alpha"].is_f64());
}
