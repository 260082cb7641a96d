use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn smlsafe(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_smlsafe")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn machine(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.extend(["--format", "machine"]);
    let (code, out, err) = smlsafe(&full);
    assert!(code != 2, "{args:?}: {err}");
    (code, serde_json::from_str(&out).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn assess_all_full_is_compliant() {
    let (code, v) = machine(&["assess", "--config", path(&data("assess_all_full.toml"))]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["compliant"], true);
    assert_eq!(v["result"]["practices"].as_array().unwrap().len(), 9);
}

#[test]
fn assess_partial_and_incomplete_fail() {
    let dir = tempfile::tempdir().unwrap();
    let full = std::fs::read_to_string(data("assess_all_full.toml")).unwrap();
    let partial = full.replacen(
        "level = \"F\"\nrationale = \"\"",
        "level = \"P\"\nrationale = \"review pending\"",
        1,
    );
    assert_ne!(partial, full);
    let p = dir.path().join("partial.toml");
    std::fs::write(&p, &partial).unwrap();
    let (code, v) = machine(&["assess", "--config", path(&p)]);
    assert_eq!(code, 1);
    assert_eq!(v["result"]["noncompliant"][0], "SWE.2.BP1");

    let cut = full.find("[[ratings]]").unwrap();
    let p = dir.path().join("unrated.toml");
    std::fs::write(&p, &full[..cut]).unwrap();
    let (code, v) = machine(&["assess", "--config", path(&p)]);
    assert_eq!(code, 1);
    assert_eq!(v["result"]["unrated"].as_array().unwrap().len(), 9);

    // a full rating with no evidence is a structural error
    let p = dir.path().join("no_evidence.toml");
    let cut_ev = full.find("[[evidence]]").unwrap();
    let ratings = full.find("[[ratings]]").unwrap();
    std::fs::write(&p, format!("{}{}", &full[..cut_ev], &full[ratings..])).unwrap();
    assert_eq!(smlsafe(&["assess", "--config", path(&p)]).0, 2);
}

#[test]
fn ledger_one_year_fails_strict_target() {
    let (code, v) = machine(&["ledger", "--config", path(&data("ledger_one_year.toml"))]);
    assert_eq!(code, 1);
    let r = &v["result"];
    assert_eq!(r["eligible_hours"], 8760.0);
    assert!((r["lambda_upper"].as_f64().unwrap() * 8760.0 - 2.9957).abs() < 1e-3);
    assert_eq!(v["config"]["min_hours"], 8760.0);
    assert_eq!(v["config"]["confidence"], 0.95);
}

#[test]
fn ledger_passes_loose_target_and_honours_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ledger.toml");
    let ledger = data("usage_one_year.jsonl");
    std::fs::write(&cfg, format!("ledger = {:?}\ntarget_pfh = 1e-3\n", path(&ledger))).unwrap();
    let (code, v) = machine(&["ledger", "--config", path(&cfg)]);
    assert_eq!(code, 0);
    let (code, v99) = machine(&["ledger", "--config", path(&cfg), "--confidence", "0.99"]);
    assert_eq!(code, 0);
    assert_eq!(v99["confidence"], 0.99);
    assert!(v99["result"]["lambda_upper"].as_f64() > v["result"]["lambda_upper"].as_f64());
}

#[test]
fn tampered_ledger_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("usage_one_year.jsonl")).unwrap();
    let forged = text.replacen("\"period_hours\":730.0", "\"period_hours\":7300.0", 1);
    let ledger = dir.path().join("usage.jsonl");
    std::fs::write(&ledger, forged).unwrap();
    let cfg = dir.path().join("ledger.toml");
    std::fs::write(&cfg, "ledger = \"usage.jsonl\"\ntarget_pfh = 1.0\n").unwrap();
    let (code, _, err) = smlsafe(&["ledger", "--config", path(&cfg)]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
}

#[test]
fn compare_defaults_and_weights() {
    let (code, v) = machine(&["compare"]);
    assert_eq!(code, 0);
    let totals: Vec<(String, f64)> = v["result"]["ranking"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["tsc_id"].as_str().unwrap().to_string(), e["total"].as_f64().unwrap()))
        .collect();
    let get = |id: &str| totals.iter().find(|(t, _)| t == id).unwrap().1;
    assert_eq!(
        [get("1-1"), get("1-2"), get("2-1"), get("2-2"), get("2-3")],
        [7.0, 11.0, 7.0, 5.0, 5.0]
    );
    assert_eq!(v["config"]["weights"]["hardware_cost"], 1.0);

    let (code, v) = machine(&["compare", "--config", path(&data("compare_no_hardware.toml"))]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["ranking"]["entries"][0]["tsc_id"], "1-1");

    let (_, text, _) = smlsafe(&["compare"]);
    assert!(text.contains("2-2=5, 2-3=5, 1-1=7, 2-1=7, 1-2=11"));
}

#[test]
fn seed_override_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let cfg = data("sim_gross_class_b.toml");
    let (code, a) = machine(&[
        "simulate",
        "--config",
        path(&cfg),
        "--seed",
        "5",
        "--trace",
        path(&trace),
    ]);
    assert_eq!(code, 1);
    assert_eq!(a["seed"], 5);
    assert_eq!(a["config"]["seed"], 5);
    let csv = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 100_001);
    assert!(lines[0].starts_with("demand,"));
    let dangerous = lines.iter().filter(|l| l.ends_with(",dangerous")).count() as u64;
    assert_eq!(dangerous, a["result"]["dangerous_events"].as_u64().unwrap());

    let (_, b) = machine(&["simulate", "--config", path(&cfg), "--seed", "6"]);
    assert_ne!(a["result"]["dangerous_events"], b["result"]["dangerous_events"]);
}

#[test]
fn monitored_and_redundant_examples_run() {
    let (code, v) = machine(&["simulate", "--config", path(&data("sim_monitored.toml"))]);
    assert_eq!(code, 0);
    assert!(v["result"]["safe_state_events"].as_u64().unwrap() > 0);
    let (code, v) = machine(&["simulate", "--config", path(&data("sim_redundant_2oo3.toml"))]);
    assert_eq!(code, 0);
    assert_eq!(v["config"]["architecture"]["voter"]["wrong_output_mode"], "concordant");
    assert_eq!(v["config"]["architecture"]["voter"]["k_agree"], 2);
    let exact = v["result"]["enumeration"]["concordant"]["dangerous"].as_f64().unwrap();
    assert!((exact - 2.98e-4).abs() < 1e-15);
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("sim_gross_class_b.toml"))
        .unwrap()
        .replace("gaussian_std = 0.05", "gaussian_std = -1.0")
        .replace("gross_error_prob = 1e-3", "gross_error_prob = 2.0");
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, text).unwrap();
    let (code, _, err) = smlsafe(&["simulate", "--config", path(&p)]);
    assert_eq!(code, 2);
    assert!(err.contains("gaussian_std"), "{err}");
    assert!(err.contains("gross_error_prob"), "{err}");
}

#[test]
fn operational_errors_exit_two() {
    let cfg = data("eval_normal_6sigma.toml");
    for args in [
        vec!["evaluate"],
        vec!["evaluate", "--config", "/nonexistent/config.toml"],
        vec!["evaluate", "--config", path(&cfg), "--confidence", "1.5"],
        vec!["evaluate", "--config", path(&cfg), "--seed", "1"],
        vec!["evaluate", "--config", path(&cfg), "--format", "yaml"],
        vec!["compare", "--confidence", "0.9"],
        vec!["frobnicate"],
    ] {
        let (code, out, _) = smlsafe(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(out.is_empty(), "{args:?} wrote a report");
    }
}

#[test]
fn target_forms_agree() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, target: &str| {
        let p = dir.path().join(name);
        std::fs::write(
            &p,
            format!("[normal]\nmean = 0.0\nstd = 1.0\n\n[safe_range]\nhalf_width = 6.0\n\n[target]\n{target}\n"),
        )
        .unwrap();
        p
    };
    let by_class = machine(&["evaluate", "--config", path(&write("c.toml", "class = \"E\""))]).1;
    let by_sil = machine(&["evaluate", "--config", path(&write("s.toml", "sil = \"SIL3\""))]).1;
    assert_eq!(by_class["result"], by_sil["result"]);
    let by_rate = machine(&[
        "evaluate",
        "--config",
        path(&write("d.toml", "pfh_limit = 1e-8\ndemand_rate = 10.0")),
    ]);
    assert_eq!(by_rate.0, 1);
    assert_eq!(by_rate.1["result"]["threshold"], 1.0 - 1e-8 / 10.0);
    let (code, _, _) = smlsafe(&[
        "evaluate",
        "--config",
        path(&write("x.toml", "class = \"E\"\nsil = \"SIL3\"")),
    ]);
    assert_eq!(code, 2);
    let (code, _, _) = smlsafe(&["evaluate", "--config", path(&write("u.toml", "sil = \"SIL2\""))]);
    assert_eq!(code, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Corrupting a valid config never yields a pass/fail verdict: either it
    // still parses to the same kind of document or the tool reports an error.
    #[test]
    fn malformed_configs_exit_two(
        which in 0usize..4,
        cut in 0usize..2000,
        junk in prop::sample::select(vec!["[", "= =", "x = ", "\u{0}", "]]", "kind = 7", "seed = -1", "unknown_key = 1"]),
    ) {
        let (cmd, file) = [
            ("evaluate", "eval_normal_6sigma.toml"),
            ("simulate", "sim_error_free.toml"),
            ("ledger", "ledger_one_year.toml"),
            ("assess", "assess_all_full.toml"),
        ][which];
        let text = std::fs::read_to_string(data(file)).unwrap();
        let at = text.char_indices().map(|(i, _)| i).nth(cut % text.len()).unwrap_or(0);
        let bad = format!("{}\n{junk}\n{}", &text[..at], &text[at..]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(file);
        std::fs::write(&p, bad).unwrap();
        if cmd == "ledger" {
            std::fs::copy(data("usage_one_year.jsonl"), dir.path().join("usage_one_year.jsonl")).unwrap();
        }
        let (code, out, err) = smlsafe(&[cmd, "--config", path(&p)]);
        prop_assert_eq!(code, 2, "stdout: {} stderr: {}", out, err);
        prop_assert!(out.is_empty());
    }
}
